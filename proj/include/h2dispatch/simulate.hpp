#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "h2dispatch/dp.hpp"

namespace h2d {

struct SimConfig {
    long years = 11000;        // total simulated years, warmup included
    long warmup_years = 1000;  // excluded from all statistics
    std::uint64_t seed = 42;
    long replication_block = 1000; // measured years per independent stream

    void validate() const; // years > warmup_years >= 0, block >= 1
};

// How the traded quantity relates to the day's net production. "Exact" means
// u matches y_bar within half an action step (inclusive); the action lattice
// is coarser than the y lattice, so exact equality is tested with tolerance.
enum class ActionClass : int {
    sell_exact_overage = 0,
    sell_overage_plus_inventory,
    sell_part_store_rest,
    store_overage_and_buy,
    buy_exact_shortage,
    buy_more_store_rest,
    buy_less_draw_storage,
    sell_despite_shortage,
};
constexpr int kNumActionClasses = 8;

const char* to_string(ActionClass c);

// Classifies a day's action. Requires |y_bar| >= dj/2 (exact-zero days are
// excluded from classification); throws ValidationError otherwise.
ActionClass classify_action(double y_bar, double u, const Grids& grids);

struct KpiReport {
    double mean_profit_per_year = 0;
    double se_profit = 0;
    double mean_profit_ex_penalty = 0; // trading profit, unmet penalty removed
    double electrolyzer_utilization_pct = 0;  // over periods with charged > 0
    bool utilization_defined = false;         // false when the electrolyzer never ran
    double electrolyzer_utilization_all_pct = 0; // over all periods
    double pct_time_congestion = 0;
    double pct_time_congestion_buying = 0;
    double pct_time_congestion_selling = 0;
    double pct_unmet_demand = 0;   // unmet energy / expected demand energy
    double mean_unmet_mwh_per_year = 0;
    long years_simulated = 0;      // measured years (warmup excluded)
    long warmup_years = 0;
    std::uint64_t seed = 0;
    long replication_block = 0;
    std::vector<double> mean_inventory_by_day;                  // [T]
    std::vector<std::array<double, kNumActionClasses>> action_class_freq_by_day; // [T]
    std::vector<double> buy_congestion_by_day;  // fraction of years, [T]
    std::vector<double> sell_congestion_by_day; // fraction of years, [T]
};

// Rolls the policy forward day by day. Inventory and price carry across year
// boundaries. Measured years are split into replication blocks, each with its
// own seeded stream and a pro-rata share of the warmup; block results merge
// in block order, so the report is bit-identical for any thread count.
//
// `policy_grids` is the geometry the policy was solved on. It must share the
// x and c grids with `world`; realized y values are mapped to the policy's
// y grid by nearest point, which lets a policy solved on different y grids
// (e.g. a stationary benchmark) run under the true seasonal world.
KpiReport simulate(const PolicyTable& policy, const Grids& policy_grids,
                   const ProblemSetup& world, const SimConfig& sim, int threads);

// Convenience wrapper: builds the world from (cfg, gspec, cal) and runs with
// the policy's own grids.
KpiReport simulate(const PolicyTable& policy, const Calibration& cal,
                   const SystemConfig& cfg, const GridSpec& gspec, const SimConfig& sim,
                   int threads);

// Per-day (buy, sell) congestion fractions from a finished report.
std::vector<std::pair<double, double>> congestion_trace(const KpiReport& r);

void to_json(nlohmann::json& j, const KpiReport& r);
void from_json(const nlohmann::json& j, KpiReport& r);
void save_kpi_report(const KpiReport& r, const std::string& path);
KpiReport load_kpi_report(const std::string& path);

// Long-format per-day trace CSV with columns (day, metric, value).
void write_trace_csv(const KpiReport& r, const std::string& path);

} // namespace h2d
