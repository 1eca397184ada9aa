#include "h2dispatch/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "h2dispatch/csv.hpp"
#include "h2dispatch/errors.hpp"
#include "h2dispatch/json_util.hpp"

namespace h2d {

using jsonutil::get_num;
using jsonutil::require_keys;

std::pair<SystemConfig, GridSpec> base_case_config() {
    SystemConfig cfg; // defaults are the base case
    GridSpec gspec;
    return {cfg, gspec};
}

ProblemSetup stationary_setup(const ProblemSetup& base) {
    ProblemSetup s;
    s.cfg = base.cfg;
    s.gspec = base.gspec;
    s.chain = base.chain;
    s.demand_mean_by_day = base.demand_mean_by_day;

    const Grids& bg = base.grids;
    const int T = base.cfg.T;
    long klo = bg.y0_steps[0], khi = bg.y0_steps[0] + bg.ny(1) - 1;
    for (int t = 0; t < T; ++t) {
        klo = std::min(klo, bg.y0_steps[size_t(t)]);
        khi = std::max(khi, bg.y0_steps[size_t(t)] + bg.ny(t + 1) - 1);
    }
    std::vector<double> ygrid;
    ygrid.reserve(size_t(khi - klo + 1));
    for (long k = klo; k <= khi; ++k) ygrid.push_back(double(k) * bg.dj);

    // Uniform day-average of the daily pmfs; exact re-binning since all days
    // share the dj lattice.
    std::vector<double> avg(ygrid.size(), 0.0);
    for (int t = 0; t < T; ++t) {
        const auto& pmf = base.pmfs[size_t(t)];
        long off = bg.y0_steps[size_t(t)] - klo;
        for (size_t i = 0; i < pmf.probs.size(); ++i)
            avg[size_t(off + long(i))] += pmf.probs[i] / double(T);
    }

    s.grids = bg;
    s.grids.y_grids.assign(size_t(T), ygrid);
    s.grids.y0_steps.assign(size_t(T), klo);
    s.pmfs.resize(size_t(T));
    for (int t = 0; t < T; ++t) {
        s.pmfs[size_t(t)].day = t + 1;
        s.pmfs[size_t(t)].support = ygrid;
        s.pmfs[size_t(t)].probs = avg;
    }
    return s;
}

BenchmarkSet run_benchmarks(const Calibration& cal, const SimConfig& sim,
                            const SolveOptions& opt) {
    auto [cfg, gspec] = base_case_config();
    BenchmarkSet out;

    ProblemSetup base = build_setup(cfg, gspec, cal, opt.threads);
    {
        PeriodicSolution sol = solve_periodic(base, opt);
        out.base_conv = sol.report;
        out.base = simulate(sol.policy, base.grids, base, sim, opt.threads);
    }
    {
        SystemConfig c1 = cfg;
        c1.m = 0;
        c1.k_plus = 0;
        c1.k_minus = 0;
        ProblemSetup bm1 = build_setup(c1, gspec, cal, opt.threads);
        PeriodicSolution sol = solve_periodic(bm1, opt);
        out.bm1_conv = sol.report;
        out.bm1 = simulate(sol.policy, bm1.grids, bm1, sim, opt.threads);
    }
    {
        ProblemSetup bm2 = stationary_setup(base);
        PeriodicSolution sol = solve_periodic(bm2, opt);
        out.bm2_conv = sol.report;
        out.bm2 = simulate(sol.policy, bm2.grids, base, sim, opt.threads);
    }
    return out;
}

void ExperimentPlan::validate() const {
    static const std::set<std::string> params = {"k_c", "m",     "k_plus", "k_minus",
                                                 "alpha", "c_plus", "w"};
    if (!params.count(sweep_param))
        throw ValidationError("ExperimentPlan: sweep_param '" + sweep_param +
                              "' is not a sweepable SystemConfig field");
    if (values.empty()) throw ValidationError("ExperimentPlan: values must be nonempty");
    for (size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1]))
            throw ValidationError("ExperimentPlan: values must be strictly increasing");
    if (!cross_param.empty()) {
        if (!params.count(cross_param))
            throw ValidationError("ExperimentPlan: cross_param '" + cross_param +
                                  "' is not a sweepable SystemConfig field");
        if (cross_param == sweep_param)
            throw ValidationError("ExperimentPlan: cross_param equals sweep_param");
        if (cross_values.empty())
            throw ValidationError("ExperimentPlan: cross_values must be nonempty");
        for (size_t i = 1; i < cross_values.size(); ++i)
            if (!(cross_values[i] > cross_values[i - 1]))
                throw ValidationError("ExperimentPlan: cross_values must be strictly increasing");
    } else if (!cross_values.empty()) {
        throw ValidationError("ExperimentPlan: cross_values given without cross_param");
    }
    sim.validate();
    if (!(epsilon > 0)) throw ValidationError("ExperimentPlan: epsilon must be > 0");
    if (max_iters < 1) throw ValidationError("ExperimentPlan: max_iters must be >= 1");
    gspec.validate();
}

void set_sweep_param(SystemConfig& cfg, const std::string& name, double value) {
    if (name == "k_c") cfg.k_c = value;
    else if (name == "m") cfg.m = value;
    else if (name == "k_plus") cfg.k_plus = value;
    else if (name == "k_minus") cfg.k_minus = value;
    else if (name == "alpha") cfg.alpha = value;
    else if (name == "c_plus") cfg.c_plus = value;
    else if (name == "w") cfg.w = value;
    else throw ValidationError("set_sweep_param: unknown parameter '" + name + "'");
}

std::uint64_t row_seed(std::uint64_t master_seed, long row) {
    std::uint64_t x = master_seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(row) + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<SweepResultRow> run_sweep(const ExperimentPlan& plan, const Calibration& cal,
                                      int threads) {
    plan.validate();
    std::vector<double> crosses = plan.cross_values;
    if (crosses.empty()) crosses.push_back(std::numeric_limits<double>::quiet_NaN());

    std::vector<SweepResultRow> rows;
    long idx = 0;
    for (double cv : crosses) {
        for (double v : plan.values) {
            SweepResultRow row;
            row.row = idx;
            row.value = v;
            row.cross_value = cv;
            row.seed = row_seed(plan.master_seed, idx);

            SystemConfig cfg = plan.base;
            set_sweep_param(cfg, plan.sweep_param, v);
            if (!plan.cross_param.empty()) set_sweep_param(cfg, plan.cross_param, cv);

            ProblemSetup setup = build_setup(cfg, plan.gspec, cal, threads);
            SolveOptions opt;
            opt.epsilon = plan.epsilon;
            opt.max_iters = plan.max_iters;
            opt.threads = threads;
            PeriodicSolution sol = solve_periodic(setup, opt);
            row.conv = sol.report;
            row.conv.span_trace.clear(); // keep rows light

            SimConfig sim = plan.sim;
            sim.seed = row.seed;
            row.kpi = simulate(sol.policy, setup.grids, setup, sim, threads);
            row.infeasible = row.kpi.mean_unmet_mwh_per_year > 0;
            rows.push_back(std::move(row));
            ++idx;
        }
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepResultRow>& rows, const ExperimentPlan& plan,
                     const std::string& path) {
    csv::Writer w(path);
    w.row({"row", "sweep_param", "value", "cross_param", "cross_value", "seed", "converged",
           "iterations", "g", "span", "mean_profit", "se_profit", "mean_profit_ex_penalty",
           "utilization_pct", "utilization_defined", "utilization_all_pct", "congestion_pct",
           "congestion_buy_pct", "congestion_sell_pct", "pct_unmet", "mean_unmet_mwh",
           "infeasible"});
    for (const auto& r : rows) {
        w.row({csv::Writer::num(r.row), plan.sweep_param, csv::Writer::num(r.value),
               plan.cross_param.empty() ? "-" : plan.cross_param,
               std::isnan(r.cross_value) ? "-" : csv::Writer::num(r.cross_value),
               std::to_string(r.seed), r.conv.converged ? "1" : "0",
               csv::Writer::num(long(r.conv.iterations)), csv::Writer::num(r.conv.g),
               csv::Writer::num(r.conv.span), csv::Writer::num(r.kpi.mean_profit_per_year),
               csv::Writer::num(r.kpi.se_profit),
               csv::Writer::num(r.kpi.mean_profit_ex_penalty),
               r.kpi.utilization_defined
                   ? csv::Writer::num(r.kpi.electrolyzer_utilization_pct)
                   : "-",
               r.kpi.utilization_defined ? "1" : "0",
               csv::Writer::num(r.kpi.electrolyzer_utilization_all_pct),
               csv::Writer::num(r.kpi.pct_time_congestion),
               csv::Writer::num(r.kpi.pct_time_congestion_buying),
               csv::Writer::num(r.kpi.pct_time_congestion_selling),
               csv::Writer::num(r.kpi.pct_unmet_demand),
               csv::Writer::num(r.kpi.mean_unmet_mwh_per_year), r.infeasible ? "1" : "0"});
    }
}

void to_json(nlohmann::json& j, const ExperimentPlan& p) {
    j = nlohmann::json{{"name", p.name},
                       {"sweep_param", p.sweep_param},
                       {"values", p.values},
                       {"cross_param", p.cross_param},
                       {"cross_values", p.cross_values},
                       {"base_config", p.base},
                       {"grid", p.gspec},
                       {"sim", {{"years", p.sim.years},
                                {"warmup_years", p.sim.warmup_years},
                                {"replication_block", p.sim.replication_block}}},
                       {"epsilon", p.epsilon},
                       {"max_iters", p.max_iters},
                       {"seed", p.master_seed}};
}

void from_json(const nlohmann::json& j, ExperimentPlan& p) {
    require_keys(j, {"name", "sweep_param", "values", "cross_param", "cross_values",
                     "base_config", "grid", "sim", "epsilon", "max_iters", "seed"},
                 "ExperimentPlan");
    ExperimentPlan d; // defaults
    p = d;
    if (j.contains("name")) p.name = j.at("name").get<std::string>();
    p.sweep_param = jsonutil::get_str(j, "sweep_param", "ExperimentPlan");
    if (!j.contains("values"))
        throw ValidationError("ExperimentPlan: missing key 'values'");
    p.values = j.at("values").get<std::vector<double>>();
    if (j.contains("cross_param")) p.cross_param = j.at("cross_param").get<std::string>();
    if (j.contains("cross_values"))
        p.cross_values = j.at("cross_values").get<std::vector<double>>();
    if (j.contains("base_config")) p.base = j.at("base_config").get<SystemConfig>();
    if (j.contains("grid")) p.gspec = j.at("grid").get<GridSpec>();
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        require_keys(s, {"years", "warmup_years", "replication_block", "seed"},
                     "ExperimentPlan.sim");
        if (s.contains("years")) p.sim.years = s.at("years").get<long>();
        if (s.contains("warmup_years")) p.sim.warmup_years = s.at("warmup_years").get<long>();
        if (s.contains("replication_block"))
            p.sim.replication_block = s.at("replication_block").get<long>();
    }
    if (j.contains("epsilon")) p.epsilon = get_num(j, "epsilon", "ExperimentPlan");
    if (j.contains("max_iters")) p.max_iters = jsonutil::get_int(j, "max_iters", "ExperimentPlan");
    if (j.contains("seed")) p.master_seed = j.at("seed").get<std::uint64_t>();
    p.validate();
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open plan file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    return j.get<ExperimentPlan>();
}

} // namespace h2d
