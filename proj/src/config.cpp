#include "h2dispatch/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "h2dispatch/errors.hpp"
#include "h2dispatch/json_util.hpp"

namespace h2d {

using jsonutil::get_num;
using jsonutil::require_keys;

namespace {

bool near_multiple(double v, double step) {
    double r = v / step;
    return std::abs(r - std::round(r)) < 1e-9 * (1.0 + std::abs(r));
}

} // namespace

std::string to_string(FuelCellMode m) {
    return m == FuelCellMode::literal ? "literal" : "discharge";
}

FuelCellMode fuel_cell_mode_from_string(const std::string& s) {
    if (s == "literal") return FuelCellMode::literal;
    if (s == "discharge") return FuelCellMode::discharge;
    throw ValidationError("fuel_cell_mode: must be 'literal' or 'discharge', got '" + s + "'");
}

void SystemConfig::validate(double max_price) const {
    if (!(w > 0)) throw ValidationError("w: must be > 0");
    if (!(m >= 0)) throw ValidationError("m: must be >= 0");
    if (!(k_c >= 0)) throw ValidationError("k_c: must be >= 0");
    if (!(k_plus >= 0)) throw ValidationError("k_plus: must be >= 0");
    if (!(k_minus >= 0)) throw ValidationError("k_minus: must be >= 0");
    if (!(c_plus >= 0)) throw ValidationError("c_plus: must be >= 0");
    if (!(alpha > 0 && alpha <= 1)) throw ValidationError("alpha: must be in (0, 1]");
    if (!(T >= 1)) throw ValidationError("T: must be >= 1");
    if (!(s > max_price + c_plus))
        throw ValidationError("s: penalty must exceed max grid price + c_plus (" +
                              std::to_string(max_price + c_plus) + ")");
}

void GridSpec::validate() const {
    if (!(dx > 0)) throw ValidationError("dx: must be > 0");
    if (!(dc > 0)) throw ValidationError("dc: must be > 0");
    if (!(dj > 0)) throw ValidationError("dj: must be > 0");
    if (!(c_max >= 0)) throw ValidationError("c_max: must be >= 0");
    if (!near_multiple(c_max, dc))
        throw ValidationError("c_max: must be an integer multiple of dc");
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = nlohmann::json{{"w", c.w},
                       {"m", c.m},
                       {"k_c", c.k_c},
                       {"k_plus", c.k_plus},
                       {"k_minus", c.k_minus},
                       {"c_plus", c.c_plus},
                       {"alpha", c.alpha},
                       {"s", c.s},
                       {"T", c.T},
                       {"fuel_cell_mode", to_string(c.fuel_cell_mode)}};
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
    require_keys(j, {"w", "m", "k_c", "k_plus", "k_minus", "c_plus", "alpha", "s", "T",
                     "fuel_cell_mode"},
                 "SystemConfig");
    c.w = get_num(j, "w", "SystemConfig");
    c.m = get_num(j, "m", "SystemConfig");
    c.k_c = get_num(j, "k_c", "SystemConfig");
    c.k_plus = get_num(j, "k_plus", "SystemConfig");
    c.k_minus = get_num(j, "k_minus", "SystemConfig");
    c.c_plus = get_num(j, "c_plus", "SystemConfig");
    c.alpha = get_num(j, "alpha", "SystemConfig");
    c.s = get_num(j, "s", "SystemConfig");
    double t = get_num(j, "T", "SystemConfig");
    if (t != std::floor(t)) throw ValidationError("T: must be an integer");
    c.T = int(t);
    if (j.contains("fuel_cell_mode")) {
        if (!j.at("fuel_cell_mode").is_string())
            throw ValidationError("fuel_cell_mode: must be a string");
        c.fuel_cell_mode = fuel_cell_mode_from_string(j.at("fuel_cell_mode").get<std::string>());
    }
}

void to_json(nlohmann::json& j, const GridSpec& g) {
    j = nlohmann::json{{"dx", g.dx}, {"dc", g.dc}, {"c_max", g.c_max}, {"dj", g.dj}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
    require_keys(j, {"dx", "dc", "c_max", "dj"}, "GridSpec");
    g.dx = get_num(j, "dx", "GridSpec");
    g.dc = get_num(j, "dc", "GridSpec");
    g.c_max = get_num(j, "c_max", "GridSpec");
    g.dj = get_num(j, "dj", "GridSpec");
}

SystemConfig load_system_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    return j.get<SystemConfig>();
}

void save_system_config(const SystemConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    nlohmann::json j = c;
    out << j.dump(2) << '\n';
}

} // namespace h2d
