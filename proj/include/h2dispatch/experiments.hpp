#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "h2dispatch/dp.hpp"
#include "h2dispatch/simulate.hpp"

namespace h2d {

// Reference system: 5 MWp solar, 30 MWh/day cable, 50 MWh/day converters,
// 1000 MWh storage, alpha 0.5, 5/MWh markup; grids dx=10, dc=3 on [0,90], dj=5.
std::pair<SystemConfig, GridSpec> base_case_config();

// World with the seasonal structure averaged out: every day carries the
// uniform day-average of the base pmfs, re-binned on the union y lattice.
ProblemSetup stationary_setup(const ProblemSetup& base);

struct BenchmarkSet {
    KpiReport base, bm1, bm2;
    ConvergenceReport base_conv, bm1_conv, bm2_conv;
};

// base = standard pipeline; BM1 = no storage (m = k_plus = k_minus = 0);
// BM2 = policy solved against the stationary world, evaluated under the
// true seasonal world.
BenchmarkSet run_benchmarks(const Calibration& cal, const SimConfig& sim,
                            const SolveOptions& opt);

struct ExperimentPlan {
    std::string name = "sweep";
    std::string sweep_param;             // k_c | m | k_plus | k_minus | alpha | c_plus | w
    std::vector<double> values;          // nonempty, strictly increasing
    std::string cross_param;             // optional second parameter, "" = none
    std::vector<double> cross_values;
    SystemConfig base;                   // defaults: base_case_config()
    GridSpec gspec;
    SimConfig sim;
    double epsilon = 1e-3;
    int max_iters = 500;
    std::uint64_t master_seed = 42;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);
ExperimentPlan load_plan(const std::string& path);

// Applies a named sweep parameter to a config; throws on unknown names.
void set_sweep_param(SystemConfig& cfg, const std::string& name, double value);

// Deterministic per-row simulation seed.
std::uint64_t row_seed(std::uint64_t master_seed, long row);

struct SweepResultRow {
    long row = 0;
    double value = 0;
    double cross_value = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    ConvergenceReport conv;
    KpiReport kpi;
    bool infeasible = false; // unavoidable unmet demand observed
};

// One solve + simulate per configuration; rows ordered cross-major, sweep
// values ascending within. Solver non-convergence is recorded in the row,
// never thrown.
std::vector<SweepResultRow> run_sweep(const ExperimentPlan& plan, const Calibration& cal,
                                      int threads);

// Documented flat schema; one row per configuration.
void write_sweep_csv(const std::vector<SweepResultRow>& rows, const ExperimentPlan& plan,
                     const std::string& path);

} // namespace h2d
