#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "h2dispatch/dates.hpp"

namespace h2d {

// ---------------------------------------------------------------------------
// Prices: AR(1) with optional additive calendar-dummy seasonality.

struct Ar1Params {
    double phi = 0;     // intercept
    double theta = 0;   // lag-1 coefficient
    double sigma_c = 0; // innovation standard deviation

    bool stationary() const;
};

enum class SeasonalVariant { raw, monthly, monthly_weekday };

std::string to_string(SeasonalVariant v);
SeasonalVariant seasonal_variant_from_string(const std::string& s);

// Additive calendar effect f'(t). Reference levels are January and Monday.
struct PriceSeasonalityModel {
    SeasonalVariant variant = SeasonalVariant::raw;
    std::vector<double> month_effects;   // 11 entries, Feb..Dec (empty for raw)
    std::vector<double> weekday_effects; // 6 entries, Tue..Sun (monthly_weekday only)

    double effect(int month, int weekday_iso) const;
};

struct Ar1FitResult {
    Ar1Params params;
    PriceSeasonalityModel seasonality;
    double std_error = 0; // one-step-ahead RMSE, computed as in the source comparison
    int n_obs = 0;
};

// Fits C_t = phi + theta * z_{t-1} + eps on the (deseasonalized, for non-raw
// variants) series z. dates must parallel `series` for non-raw variants.
Ar1FitResult fit_ar1(const std::vector<double>& series, const std::vector<CivilDate>& dates,
                     SeasonalVariant variant);

// Finite price chain on a uniform grid.
struct PriceChain {
    std::vector<double> grid;
    std::vector<double> trans; // row-major n x n, rows sum to 1

    int n() const { return int(grid.size()); }
    const double* row(int i) const { return trans.data() + size_t(i) * grid.size(); }
    std::vector<double> stationary() const;  // power iteration
    double stationary_mean() const;
    double lag1_autocorr() const;            // exact, under the stationary law
};

// Interval (Tauchen-style) discretization: each row i integrates the normal
// transition density over the half-open cells of the grid; the end cells
// absorb the tails, so every row sums to exactly one.
PriceChain discretize_ar1(const Ar1Params& p, const std::vector<double>& c_grid);

// ---------------------------------------------------------------------------
// Solar production: per-week scaled beta.

struct WeeklyBeta {
    int week = 1;     // 1..52
    double a = 1;     // beta shape
    double b = 1;     // beta shape
    double scale = 0; // max daily production for the week (MWh)
};

struct WeeklyBetaFit {
    std::vector<WeeklyBeta> betas;      // 52 entries
    std::vector<int> fallback_weeks;    // weeks where moment matching failed
};

// Moment-matching fit per week. `obs[w]` holds daily production (MWh) for ISO
// week w+1; at least 10 observations per week are required. If theoretical
// per-week maxima are supplied they floor the scale, otherwise the week max
// is used. Degenerate moments fall back to a = b = 1 and flag the week.
WeeklyBetaFit fit_weekly_beta(const std::array<std::vector<double>, 52>& obs,
                              const std::vector<double>* theoretical_scale);

// ---------------------------------------------------------------------------
// Demand: two-piece linear trend with normal noise, truncated at zero.

struct DemandModel {
    int split_day = 2;        // last day governed by segment 1
    double seg1_intercept = 0, seg1_slope = 0;
    double seg2_intercept = 0, seg2_slope = 0;
    double sigma_d = 0;       // max of the two segment residual standard errors
    double households_scale = 1.0;

    double mu(int day) const; // mean daily demand (MWh), includes households_scale
    double sigma() const { return sigma_d * households_scale; }
};

// Exhaustive changepoint search (split in [30, T-30]) with per-segment OLS;
// picks the split minimizing the sum of residual standard errors.
DemandModel fit_demand(const std::vector<double>& daily_consumption);

// ---------------------------------------------------------------------------
// Net production pmf on a day's y grid.

struct NetProductionPmf {
    int day = 1;
    std::vector<double> support; // the day's y grid
    std::vector<double> probs;   // same length, sums to 1

    double mean() const;
};

// Discrete pmf on a fine lattice {k*h : k0 <= k < k0 + p.size()}.
struct FinePmf {
    double h = 0;
    long k0 = 0;
    std::vector<double> p;
};

FinePmf production_fine_pmf(double a, double b, double scale, double h);
// Normal(mu, sigma) truncated to [0, inf); sigma == 0 gives a point mass.
FinePmf demand_fine_pmf(double mu, double sigma, double h);

// Distribution of Y - D for independent fine pmfs on a common step, binned
// onto y_grid by nearest point; mass outside the range is absorbed at the
// end points.
NetProductionPmf bin_difference_pmf(int day, const FinePmf& production, const FinePmf& demand,
                                    const std::vector<double>& y_grid);

// Full pipeline for one day: beta production (scaled by w_scale) minus
// truncated-normal demand, discretized on a fine step dj/10.
NetProductionPmf net_production_pmf(int day, const std::vector<WeeklyBeta>& betas,
                                    double w_scale, const DemandModel& demand,
                                    const std::vector<double>& y_grid, double dj);

// ---------------------------------------------------------------------------
// Sampling.

struct DayDraw {
    double y_bar = 0; // snapped to the day's y grid
    int y_index = 0;
    double c = 0;
    int c_index = 0;
};

// Draws production (scaled beta), demand (truncated normal), and the next
// price-chain state. Draw order is fixed: production, demand, then price.
DayDraw sample_day(int day, const std::vector<WeeklyBeta>& betas, double w_scale,
                   const DemandModel& demand, const PriceChain& chain, int prev_c_index,
                   const std::vector<double>& y_grid, std::mt19937_64& rng);

// JSON serialization for calibration persistence.
void to_json(nlohmann::json& j, const Ar1Params& p);
void from_json(const nlohmann::json& j, Ar1Params& p);
void to_json(nlohmann::json& j, const PriceSeasonalityModel& m);
void from_json(const nlohmann::json& j, PriceSeasonalityModel& m);
void to_json(nlohmann::json& j, const WeeklyBeta& w);
void from_json(const nlohmann::json& j, WeeklyBeta& w);
void to_json(nlohmann::json& j, const DemandModel& d);
void from_json(const nlohmann::json& j, DemandModel& d);

} // namespace h2d
