#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "h2dispatch/config.hpp"
#include "h2dispatch/grids.hpp"
#include "h2dispatch/stochastics.hpp"

namespace h2d {

// Everything estimated from data (or synthesized) that the solver needs:
// price process, weekly production betas, and the demand model. Production
// scales are stored at a reference capacity w_ref and rescaled linearly to
// the config's w at use.
struct Calibration {
    Ar1Params ar1;
    PriceSeasonalityModel seasonality;
    double ar1_std_error = 0;
    std::vector<WeeklyBeta> weekly_beta; // 52 entries, weeks ascending
    DemandModel demand;
    double w_ref = 5.0;
    bool synthetic = false;

    double w_scale(const SystemConfig& cfg) const { return cfg.w / w_ref; }
    void validate() const;
};

// Built-in calibration used when no input data is supplied: AR(1) prices,
// a sinusoidal weekly capacity-factor profile (peak mid-year, trough at the
// year edges) with week-constant beta dispersion, and a two-piece demand
// trend with a mid-year changepoint.
Calibration synthetic_calibration();

void to_json(nlohmann::json& j, const Calibration& c);
void from_json(const nlohmann::json& j, Calibration& c);
Calibration load_calibration(const std::string& path);
void save_calibration(const Calibration& c, const std::string& path);

// Raw per-day (lo, hi) net production range used to size the y grids:
// production in [0, scale], demand within 6 sigma of its mean (floored at 0).
std::vector<std::pair<double, double>> net_production_bounds(const Calibration& cal,
                                                             const SystemConfig& cfg);

// A solvable problem instance: config, grids, price chain and per-day pmfs.
struct ProblemSetup {
    SystemConfig cfg;
    GridSpec gspec;
    Grids grids;
    PriceChain chain;
    std::vector<NetProductionPmf> pmfs;      // [day-1]
    std::vector<double> demand_mean_by_day;  // [day-1], truncated-normal mean
};

ProblemSetup build_setup(const SystemConfig& cfg, const GridSpec& gspec,
                         const Calibration& cal, int threads = 1);

} // namespace h2d
