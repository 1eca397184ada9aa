#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace h2d {

// Semantics of the fuel-cell term in the sell bound: "literal" caps sales by
// current stock plus net production; "discharge" caps the storage draw itself
// by k_minus, so sales may additionally pass through same-day overage.
enum class FuelCellMode { literal, discharge };

std::string to_string(FuelCellMode m);
FuelCellMode fuel_cell_mode_from_string(const std::string& s);

// Physical system parameters. Energy in MWh, prices in money/MWh.
struct SystemConfig {
    double w = 5.0;         // installed PV capacity (MWp); scales production
    double m = 1000.0;      // storage capacity (MWh)
    double k_c = 30.0;      // distribution-cable capacity per period (MWh)
    double k_plus = 50.0;   // electrolyzer (charge) capacity per period (MWh)
    double k_minus = 50.0;  // fuel-cell (discharge) capacity per period (MWh)
    double c_plus = 5.0;    // per-MWh markup paid when buying
    double alpha = 0.5;     // conversion efficiency, applied on charge
    double s = 1000.0;      // penalty per MWh of unmet demand
    int T = 365;            // periods per year
    FuelCellMode fuel_cell_mode = FuelCellMode::literal;

    // Throws ValidationError naming the offending field. `max_price` is the
    // top of the price grid; the penalty must dominate max_price + c_plus.
    void validate(double max_price) const;
};

// Discretization resolution.
struct GridSpec {
    double dx = 10.0;   // inventory step (MWh)
    double dc = 3.0;    // price step
    double c_max = 90.0; // top of the price grid (grid starts at 0)
    double dj = 5.0;    // net-production step (MWh)

    void validate() const;
};

void to_json(nlohmann::json& j, const SystemConfig& c);
void from_json(const nlohmann::json& j, SystemConfig& c); // rejects unknown keys
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

SystemConfig load_system_config(const std::string& path);
void save_system_config(const SystemConfig& c, const std::string& path);

} // namespace h2d
