#include "h2dispatch/calibration.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "h2dispatch/errors.hpp"
#include "h2dispatch/json_util.hpp"
#include "h2dispatch/parallel.hpp"

namespace h2d {

using jsonutil::get_num;
using jsonutil::require_keys;

void Calibration::validate() const {
    if (weekly_beta.size() != 52)
        throw ValidationError("Calibration: weekly_beta must have 52 entries");
    for (size_t i = 0; i < weekly_beta.size(); ++i)
        if (weekly_beta[i].week != int(i) + 1)
            throw ValidationError("Calibration: weekly_beta must be ordered by week");
    if (!(w_ref > 0)) throw ValidationError("Calibration: w_ref must be > 0");
    if (!ar1.stationary())
        throw ValidationError("Calibration: AR(1) price process is not stationary");
}

Calibration synthetic_calibration() {
    Calibration cal;
    cal.synthetic = true;
    cal.w_ref = 5.0;
    cal.ar1 = {5.23, 0.87, 7.7};
    cal.seasonality.variant = SeasonalVariant::raw;
    cal.ar1_std_error = 7.7;

    // Demand: winter-declining then summer-rising two-piece trend, exactly
    // continuous at the split. The second segment rises steeply enough that
    // storage drawdown is well underway by mid-winter.
    cal.demand.split_day = 199;
    cal.demand.seg1_intercept = 15.3;
    cal.demand.seg1_slope = -0.0302;
    cal.demand.seg2_slope = 0.06;
    cal.demand.seg2_intercept =
        (15.3 - 0.0302 * 199.0) - 0.06 * 199.0; // continuity at day 199
    cal.demand.sigma_d = 0.62;
    cal.demand.households_scale = 1.0;

    // Production: constant weekly maximum, seasonal mean capacity factor
    // peaking in late May (cool clear weather peaks measured capacity factors
    // before the solstice), trough at the year edges, week-constant
    // dispersion a + b. The raised cosine is cubed to narrow the high-output
    // season: net production then turns negative in early autumn, which is
    // what drives the fill-summer/drain-winter storage cycle.
    const double scale = 55.0;
    const double cf_trough = 0.06, cf_peak = 0.70, nu = 6.0;
    cal.weekly_beta.resize(52);
    for (int w = 1; w <= 52; ++w) {
        double phase = 2.0 * std::numbers::pi * double(w - 22) / 52.0;
        double half = (1.0 + std::cos(phase)) / 2.0;
        double cf = cf_trough + (cf_peak - cf_trough) * half * half * half;
        WeeklyBeta& wb = cal.weekly_beta[size_t(w - 1)];
        wb.week = w;
        wb.scale = scale;
        wb.a = nu * cf;
        wb.b = nu * (1.0 - cf);
    }
    return cal;
}

void to_json(nlohmann::json& j, const Calibration& c) {
    j = nlohmann::json{{"w_ref", c.w_ref},
                       {"synthetic", c.synthetic},
                       {"ar1", c.ar1},
                       {"seasonality", c.seasonality},
                       {"ar1_std_error", c.ar1_std_error},
                       {"weekly_beta", c.weekly_beta},
                       {"demand", c.demand}};
}

void from_json(const nlohmann::json& j, Calibration& c) {
    require_keys(j, {"w_ref", "synthetic", "ar1", "seasonality", "ar1_std_error",
                     "weekly_beta", "demand"},
                 "Calibration");
    c.w_ref = get_num(j, "w_ref", "Calibration");
    if (!j.contains("synthetic") || !j.at("synthetic").is_boolean())
        throw ValidationError("Calibration: 'synthetic' must be a boolean");
    c.synthetic = j.at("synthetic").get<bool>();
    c.ar1 = j.at("ar1").get<Ar1Params>();
    c.seasonality = j.at("seasonality").get<PriceSeasonalityModel>();
    c.ar1_std_error = get_num(j, "ar1_std_error", "Calibration");
    if (!j.contains("weekly_beta") || !j.at("weekly_beta").is_array())
        throw ValidationError("Calibration: 'weekly_beta' must be an array");
    c.weekly_beta = j.at("weekly_beta").get<std::vector<WeeklyBeta>>();
    c.demand = j.at("demand").get<DemandModel>();
    c.validate();
}

Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open calibration file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    return j.get<Calibration>();
}

void save_calibration(const Calibration& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    nlohmann::json j = c;
    out << j.dump(2) << '\n';
}

std::vector<std::pair<double, double>> net_production_bounds(const Calibration& cal,
                                                             const SystemConfig& cfg) {
    cal.validate();
    const double ws = cal.w_scale(cfg);
    std::vector<std::pair<double, double>> bounds(size_t(cfg.T));
    for (int day = 1; day <= cfg.T; ++day) {
        const WeeklyBeta& wb = cal.weekly_beta[size_t(week_of_day(day) - 1)];
        double mu = cal.demand.mu(day), sd = cal.demand.sigma();
        double d_lo = std::max(0.0, mu - 6 * sd);
        double d_hi = std::max(0.0, mu + 6 * sd);
        bounds[size_t(day - 1)] = {-d_hi, wb.scale * ws - d_lo};
    }
    return bounds;
}

ProblemSetup build_setup(const SystemConfig& cfg, const GridSpec& gspec,
                         const Calibration& cal, int threads) {
    ProblemSetup s;
    s.cfg = cfg;
    s.gspec = gspec;
    s.grids = make_grids(cfg, gspec, net_production_bounds(cal, cfg));
    s.chain = discretize_ar1(cal.ar1, s.grids.c_grid);
    s.pmfs.resize(size_t(cfg.T));
    const double ws = cal.w_scale(cfg);
    parallel_for(cfg.T, threads, [&](long t) {
        s.pmfs[size_t(t)] = net_production_pmf(int(t) + 1, cal.weekly_beta, ws, cal.demand,
                                               s.grids.y_grids[size_t(t)], gspec.dj);
    });
    s.demand_mean_by_day.resize(size_t(cfg.T));
    for (int day = 1; day <= cfg.T; ++day) {
        double mu = cal.demand.mu(day), sd = cal.demand.sigma();
        double e;
        if (sd <= 0) {
            e = std::max(mu, 0.0);
        } else {
            // Mean of a normal truncated to [0, inf).
            double a = -mu / sd;
            double z = 1.0 - 0.5 * std::erfc(-a / std::sqrt(2.0));
            double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
            e = z > 0 ? mu + sd * pdf / z : 0.0;
        }
        s.demand_mean_by_day[size_t(day - 1)] = e;
    }
    return s;
}

} // namespace h2d
