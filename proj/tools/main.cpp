// Command-line front end: fit, solve, simulate, sweep, report.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "h2dispatch/csv.hpp"
#include "h2dispatch/dates.hpp"
#include "h2dispatch/dp.hpp"
#include "h2dispatch/errors.hpp"
#include "h2dispatch/experiments.hpp"
#include "h2dispatch/manifest.hpp"
#include "h2dispatch/parallel.hpp"
#include "h2dispatch/simulate.hpp"

namespace fs = std::filesystem;
using namespace h2d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNotConverged = 3;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

GridSpec load_grid_spec(const std::string& path) {
    if (path.empty()) return GridSpec{};
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    return j.get<GridSpec>();
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string prices, production, consumption, out_dir;
    std::string variant = "auto";
    bool synthetic = false;
    double w_ref = 5.0;
    double households_scale = 1.0;
};

int cmd_fit(const FitArgs& a) {
    Timer timer;
    ensure_dir(a.out_dir);
    RunManifest man;
    man.command = "fit";

    Calibration cal;
    if (a.synthetic) {
        cal = synthetic_calibration();
        cal.demand.households_scale = a.households_scale;
    } else {
        if (a.prices.empty() || a.production.empty() || a.consumption.empty())
            throw ValidationError(
                "fit: need --prices, --production and --consumption (or --synthetic)");
        man.inputs = {{"prices", a.prices},
                      {"production", a.production},
                      {"consumption", a.consumption}};

        // Prices: chronological series with dates for the dummy regressions.
        csv::Table pt = csv::read_file(a.prices);
        csv::require_header(pt, {"date", "price_eur_mwh"}, a.prices);
        std::vector<std::pair<CivilDate, double>> rows;
        rows.reserve(pt.rows.size());
        for (size_t i = 0; i < pt.rows.size(); ++i)
            rows.emplace_back(parse_iso_date(pt.cell(i, 0)),
                              csv::to_double(pt.cell(i, 1), a.prices));
        std::stable_sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) {
            return to_sys_days(l.first) < to_sys_days(r.first);
        });
        std::vector<double> series;
        std::vector<CivilDate> dates;
        for (auto& [d, v] : rows) {
            dates.push_back(d);
            series.push_back(v);
        }

        std::vector<std::pair<SeasonalVariant, Ar1FitResult>> fits;
        for (auto v : {SeasonalVariant::monthly_weekday, SeasonalVariant::monthly,
                       SeasonalVariant::raw})
            fits.emplace_back(v, fit_ar1(series, dates, v));

        size_t best = 0;
        for (size_t i = 1; i < fits.size(); ++i)
            if (fits[i].second.std_error < fits[best].second.std_error) best = i;
        if (a.variant != "auto") {
            SeasonalVariant want = seasonal_variant_from_string(a.variant);
            for (size_t i = 0; i < fits.size(); ++i)
                if (fits[i].first == want) best = i;
        }
        cal.ar1 = fits[best].second.params;
        cal.seasonality = fits[best].second.seasonality;
        cal.ar1_std_error = fits[best].second.std_error;
        if (!cal.ar1.stationary())
            throw ValidationError("fit: selected AR(1) model is not stationary");

        {
            csv::Writer w(a.out_dir + "/price_fit_comparison.csv");
            w.row({"variant", "phi", "theta", "sigma_c", "std_error", "n_obs", "chosen"});
            for (size_t i = 0; i < fits.size(); ++i) {
                const auto& f = fits[i].second;
                w.row({to_string(fits[i].first), csv::Writer::num(f.params.phi),
                       csv::Writer::num(f.params.theta), csv::Writer::num(f.params.sigma_c),
                       csv::Writer::num(f.std_error), csv::Writer::num(long(f.n_obs)),
                       i == best ? "1" : "0"});
            }
            man.outputs.push_back(a.out_dir + "/price_fit_comparison.csv");
        }

        // Production: group daily MWh by ISO-like week of the day of year.
        csv::Table yt = csv::read_file(a.production);
        csv::require_header(yt, {"date", "mwh"}, a.production);
        std::array<std::vector<double>, 52> weekly;
        for (size_t i = 0; i < yt.rows.size(); ++i) {
            CivilDate d = parse_iso_date(yt.cell(i, 0));
            int week = week_of_day(day_of_year(d));
            weekly[size_t(week - 1)].push_back(csv::to_double(yt.cell(i, 1), a.production));
        }
        WeeklyBetaFit wb = fit_weekly_beta(weekly, nullptr);
        cal.weekly_beta = wb.betas;
        for (int w : wb.fallback_weeks)
            std::fprintf(stderr, "warning: week %d beta fit degenerate, using a=b=1\n", w);

        // Consumption: average per day of year (Feb 29 dropped), then the
        // changepoint fit runs on the day-of-year profile.
        csv::Table dt = csv::read_file(a.consumption);
        csv::require_header(dt, {"date", "mwh"}, a.consumption);
        std::vector<double> sum(365, 0.0);
        std::vector<long> cnt(365, 0);
        for (size_t i = 0; i < dt.rows.size(); ++i) {
            CivilDate d = parse_iso_date(dt.cell(i, 0));
            int doy = day_of_year(d);
            if (doy > 365) continue;
            sum[size_t(doy - 1)] += csv::to_double(dt.cell(i, 1), a.consumption);
            cnt[size_t(doy - 1)] += 1;
        }
        std::vector<double> profile;
        profile.reserve(365);
        for (int t = 0; t < 365; ++t) {
            if (cnt[size_t(t)] == 0)
                throw ValidationError("fit: no consumption data for day of year " +
                                      std::to_string(t + 1));
            profile.push_back(sum[size_t(t)] / double(cnt[size_t(t)]));
        }
        cal.demand = fit_demand(profile);
        cal.demand.households_scale = a.households_scale;
        cal.w_ref = a.w_ref;
        cal.synthetic = false;

        csv::Writer w(a.out_dir + "/demand_fit.csv");
        w.row({"split_day", "seg1_intercept", "seg1_slope", "seg2_intercept", "seg2_slope",
               "sigma_d"});
        w.row({csv::Writer::num(long(cal.demand.split_day)),
               csv::Writer::num(cal.demand.seg1_intercept),
               csv::Writer::num(cal.demand.seg1_slope),
               csv::Writer::num(cal.demand.seg2_intercept),
               csv::Writer::num(cal.demand.seg2_slope), csv::Writer::num(cal.demand.sigma_d)});
        man.outputs.push_back(a.out_dir + "/demand_fit.csv");
    }

    cal.validate();
    save_calibration(cal, a.out_dir + "/calibration.json");
    man.outputs.insert(man.outputs.begin(), a.out_dir + "/calibration.json");
    man.duration_seconds = timer.seconds();
    write_manifest(man, a.out_dir);
    std::printf("fit: wrote %s/calibration.json\n", a.out_dir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
    std::string config, calibration, grid, out_dir;
    double epsilon = 1e-3;
    int iters = 500;
    int threads = 0;
    bool strict = false;
    bool stationary = false; // solve against the day-averaged (BM2) world
    std::vector<std::string> slices;
};

std::pair<std::vector<int>, std::vector<double>> parse_slice_tokens(
    const std::vector<std::string>& tokens) {
    std::vector<int> days;
    std::vector<double> pcts;
    for (const auto& tok : tokens) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--export-policy-slices: expected key=v1,v2 got '" + tok + "'");
        std::string key = tok.substr(0, eq);
        std::stringstream ss(tok.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            if (key == "day" || key == "days")
                days.push_back(int(csv::to_long(item, "--export-policy-slices")));
            else if (key == "percentiles" || key == "percentile")
                pcts.push_back(csv::to_double(item, "--export-policy-slices"));
            else
                throw ValidationError("--export-policy-slices: unknown key '" + key + "'");
        }
    }
    return {days, pcts};
}

int cmd_solve(const SolveArgs& a) {
    Timer timer;
    ensure_dir(a.out_dir);
    SystemConfig cfg = load_system_config(a.config);
    Calibration cal = load_calibration(a.calibration);
    GridSpec gspec = load_grid_spec(a.grid);
    int threads = a.threads > 0 ? a.threads : default_threads();

    ProblemSetup setup = build_setup(cfg, gspec, cal, threads);
    if (a.stationary) setup = stationary_setup(setup);

    SolveOptions opt;
    opt.epsilon = a.epsilon;
    opt.max_iters = a.iters;
    opt.threads = threads;
    PeriodicSolution sol = solve_periodic(setup, opt);

    save_policy(sol.policy, setup.grids, a.out_dir + "/policy.bin");
    save_values(sol.values, setup.grids, a.out_dir + "/values.bin");
    {
        nlohmann::json j{{"g", sol.report.g},
                         {"span", sol.report.span},
                         {"iterations", sol.report.iterations},
                         {"converged", sol.report.converged},
                         {"epsilon", opt.epsilon},
                         {"span_trace", sol.report.span_trace}};
        std::ofstream out(a.out_dir + "/convergence.json");
        if (!out) throw IoError("cannot open file for writing: " + a.out_dir + "/convergence.json");
        out << j.dump(2) << '\n';
    }

    RunManifest man;
    man.command = "solve";
    man.inputs = {{"config", a.config}, {"calibration", a.calibration}};
    if (!a.grid.empty()) man.inputs.emplace_back("grid", a.grid);
    man.gspec = gspec;
    man.gspec_used = true;
    man.outputs = {a.out_dir + "/policy.bin", a.out_dir + "/values.bin",
                   a.out_dir + "/convergence.json"};

    if (!a.slices.empty()) {
        auto [days, pcts] = parse_slice_tokens(a.slices);
        for (int day : days) {
            if (day < 1 || day > cfg.T)
                throw ValidationError("--export-policy-slices: day out of range");
            std::vector<int> yidx;
            for (double p : pcts) {
                const auto& pmf = setup.pmfs[size_t(day - 1)];
                double cum = 0;
                int iy = int(pmf.probs.size()) - 1;
                for (size_t i = 0; i < pmf.probs.size(); ++i) {
                    cum += pmf.probs[i];
                    if (cum >= p / 100.0) {
                        iy = int(i);
                        break;
                    }
                }
                yidx.push_back(iy);
            }
            char name[64];
            std::snprintf(name, sizeof name, "/policy_slice_day_%03d.csv", day);
            export_policy_csv(sol.policy, sol.values, setup.grids, {{day, yidx}},
                              a.out_dir + name);
            man.outputs.push_back(a.out_dir + name);
        }
    }

    man.duration_seconds = timer.seconds();
    write_manifest(man, a.out_dir);
    std::printf("solve: g=%.4f span=%.6g iterations=%d converged=%s\n", sol.report.g,
                sol.report.span, sol.report.iterations,
                sol.report.converged ? "yes" : "no");
    if (a.strict && !sol.report.converged) {
        std::fprintf(stderr, "error: solver did not converge within %d iterations\n", a.iters);
        return kExitNotConverged;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string policy, config, calibration, grid, out_dir;
    long years = 11000, warmup = 1000, block = 1000;
    std::uint64_t seed = 42;
    int threads = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    Timer timer;
    ensure_dir(a.out_dir);
    SystemConfig cfg = load_system_config(a.config);
    Calibration cal = load_calibration(a.calibration);
    GridSpec gspec = load_grid_spec(a.grid);
    int threads = a.threads > 0 ? a.threads : default_threads();

    Grids policy_grids;
    PolicyTable policy = load_policy(a.policy, &policy_grids);
    ProblemSetup world = build_setup(cfg, gspec, cal, threads);

    SimConfig sim;
    sim.years = a.years;
    sim.warmup_years = a.warmup;
    sim.seed = a.seed;
    sim.replication_block = a.block;

    KpiReport rep = simulate(policy, policy_grids, world, sim, threads);
    save_kpi_report(rep, a.out_dir + "/kpi.json");
    write_trace_csv(rep, a.out_dir + "/daily_traces.csv");

    RunManifest man;
    man.command = "simulate";
    man.inputs = {{"policy", a.policy},
                  {"config", a.config},
                  {"calibration", a.calibration}};
    if (!a.grid.empty()) man.inputs.emplace_back("grid", a.grid);
    man.seed = a.seed;
    man.seed_used = true;
    man.gspec = gspec;
    man.gspec_used = true;
    man.outputs = {a.out_dir + "/kpi.json", a.out_dir + "/daily_traces.csv"};
    man.duration_seconds = timer.seconds();
    write_manifest(man, a.out_dir);
    std::printf("simulate: mean_profit=%.2f se=%.2f congestion=%.2f%%\n",
                rep.mean_profit_per_year, rep.se_profit, rep.pct_time_congestion);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string plan, calibration, out_dir;
    int threads = 0;
    bool strict = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_sweep(const SweepArgs& a) {
    Timer timer;
    ensure_dir(a.out_dir);
    ExperimentPlan plan = load_plan(a.plan);
    if (a.seed_set) plan.master_seed = a.seed;
    Calibration cal = load_calibration(a.calibration);
    int threads = a.threads > 0 ? a.threads : default_threads();

    std::vector<SweepResultRow> rows = run_sweep(plan, cal, threads);
    std::string csv_path = a.out_dir + "/" + plan.name + ".csv";
    write_sweep_csv(rows, plan, csv_path);

    bool all_converged = true;
    nlohmann::json detail = nlohmann::json::array();
    for (const auto& r : rows) {
        all_converged = all_converged && r.conv.converged;
        detail.push_back({{"row", r.row},
                          {"value", r.value},
                          {"seed", r.seed},
                          {"converged", r.conv.converged},
                          {"iterations", r.conv.iterations},
                          {"g", r.conv.g},
                          {"span", r.conv.span},
                          {"infeasible", r.infeasible}});
    }

    RunManifest man;
    man.command = "sweep";
    man.inputs = {{"plan", a.plan}, {"calibration", a.calibration}};
    man.seed = plan.master_seed;
    man.seed_used = true;
    man.gspec = plan.gspec;
    man.gspec_used = true;
    man.outputs = {csv_path};
    man.duration_seconds = timer.seconds();
    nlohmann::json extra{{"rows", detail}};
    man.extra = &extra;
    write_manifest(man, a.out_dir);
    std::printf("sweep: %zu rows -> %s\n", rows.size(), csv_path.c_str());
    if (a.strict && !all_converged) {
        std::fprintf(stderr, "error: at least one sweep row did not converge\n");
        return kExitNotConverged;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string names;
    std::string out_dir;
};

int cmd_report(const ReportArgs& a) {
    Timer timer;
    ensure_dir(a.out_dir);
    if (a.inputs.empty()) throw ValidationError("report: need at least one KPI JSON file");

    std::vector<std::string> names;
    if (!a.names.empty()) {
        std::stringstream ss(a.names);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
        if (names.size() != a.inputs.size())
            throw ValidationError("report: --names count must match the number of inputs");
    } else {
        for (const auto& p : a.inputs) {
            fs::path fp(p);
            std::string n = fp.parent_path().filename().string();
            if (n.empty()) n = fp.stem().string();
            names.push_back(n);
        }
    }

    std::vector<KpiReport> reps;
    for (const auto& p : a.inputs) reps.push_back(load_kpi_report(p));

    std::string summary_path = a.out_dir + "/summary.csv";
    {
        csv::Writer w(summary_path);
        std::vector<std::string> head{"metric"};
        head.insert(head.end(), names.begin(), names.end());
        w.row(head);
        auto num_row = [&](const std::string& metric, auto getter) {
            std::vector<std::string> row{metric};
            for (const auto& r : reps) row.push_back(getter(r));
            w.row(row);
        };
        auto d = [](double v) { return csv::Writer::num(v); };
        num_row("mean_profit_per_year",
                [&](const KpiReport& r) { return d(r.mean_profit_per_year); });
        num_row("se_profit", [&](const KpiReport& r) { return d(r.se_profit); });
        num_row("mean_profit_ex_penalty",
                [&](const KpiReport& r) { return d(r.mean_profit_ex_penalty); });
        num_row("electrolyzer_utilization_pct", [&](const KpiReport& r) {
            return r.utilization_defined ? d(r.electrolyzer_utilization_pct)
                                         : std::string("-");
        });
        num_row("electrolyzer_utilization_all_pct",
                [&](const KpiReport& r) { return d(r.electrolyzer_utilization_all_pct); });
        num_row("pct_time_congestion",
                [&](const KpiReport& r) { return d(r.pct_time_congestion); });
        num_row("pct_time_congestion_buying",
                [&](const KpiReport& r) { return d(r.pct_time_congestion_buying); });
        num_row("pct_time_congestion_selling",
                [&](const KpiReport& r) { return d(r.pct_time_congestion_selling); });
        num_row("pct_unmet_demand", [&](const KpiReport& r) { return d(r.pct_unmet_demand); });
        num_row("mean_unmet_mwh_per_year",
                [&](const KpiReport& r) { return d(r.mean_unmet_mwh_per_year); });
        num_row("years_simulated",
                [&](const KpiReport& r) { return csv::Writer::num(long(r.years_simulated)); });
    }

    RunManifest man;
    man.command = "report";
    man.outputs = {summary_path};
    for (size_t i = 0; i < reps.size(); ++i) {
        man.inputs.emplace_back(names[i], a.inputs[i]);
        std::string tp = a.out_dir + "/daily_traces_" + names[i] + ".csv";
        write_trace_csv(reps[i], tp);
        man.outputs.push_back(tp);
    }
    man.duration_seconds = timer.seconds();
    write_manifest(man, a.out_dir);
    std::printf("report: wrote %s\n", summary_path.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Seasonal storage dispatch: calibrate, solve, simulate, sweep"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("h2dispatch ") + kToolVersion);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit stochastic models from CSV data");
    fit->add_option("--prices", fa.prices, "prices CSV (date,price_eur_mwh)");
    fit->add_option("--production", fa.production, "production CSV (date,mwh)");
    fit->add_option("--consumption", fa.consumption, "consumption CSV (date,mwh)");
    fit->add_option("--variant", fa.variant,
                    "price model: auto|raw|monthly|monthly_weekday (default auto)");
    fit->add_flag("--synthetic", fa.synthetic, "write the built-in synthetic calibration");
    fit->add_option("--w-ref", fa.w_ref, "installed capacity of the production data (MWp)");
    fit->add_option("--households-scale", fa.households_scale, "demand scaling factor");
    fit->add_option("--out-dir", fa.out_dir, "output directory")->required();

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "Solve the periodic dispatch policy");
    solve->add_option("--config", sa.config, "SystemConfig JSON")->required();
    solve->add_option("--calibration", sa.calibration, "calibration JSON")->required();
    solve->add_option("--grid", sa.grid, "GridSpec JSON (default: base grids)");
    solve->add_option("--epsilon", sa.epsilon, "span convergence threshold");
    solve->add_option("--iters", sa.iters, "maximum year iterations");
    solve->add_option("--threads", sa.threads, "worker threads (default: hardware)");
    solve->add_flag("--strict", sa.strict, "exit 3 on non-convergence");
    solve->add_flag("--stationary", sa.stationary,
                    "solve against the day-averaged stationary world (BM2)");
    solve->add_option("--export-policy-slices", sa.slices,
                      "e.g. day=1,180 percentiles=25,75")
        ->expected(-1);
    solve->add_option("--out-dir", sa.out_dir, "output directory")->required();

    SimulateArgs ma;
    auto* simc = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    simc->add_option("--policy", ma.policy, "policy binary from solve")->required();
    simc->add_option("--config", ma.config, "SystemConfig JSON")->required();
    simc->add_option("--calibration", ma.calibration, "calibration JSON")->required();
    simc->add_option("--grid", ma.grid, "GridSpec JSON (default: base grids)");
    simc->add_option("--years", ma.years, "total simulated years");
    simc->add_option("--warmup", ma.warmup, "warmup years excluded from statistics");
    simc->add_option("--seed", ma.seed, "random seed");
    simc->add_option("--block", ma.block, "measured years per replication block");
    simc->add_option("--threads", ma.threads, "worker threads (default: hardware)");
    simc->add_option("--out-dir", ma.out_dir, "output directory")->required();

    SweepArgs wa;
    auto* sweep = app.add_subcommand("sweep", "Run a sensitivity sweep from a plan");
    sweep->add_option("--plan", wa.plan, "ExperimentPlan JSON")->required();
    sweep->add_option("--calibration", wa.calibration, "calibration JSON")->required();
    auto* seed_opt = sweep->add_option("--seed", wa.seed, "override the plan's master seed");
    sweep->add_option("--threads", wa.threads, "worker threads (default: hardware)");
    sweep->add_flag("--strict", wa.strict, "exit 3 if any row fails to converge");
    sweep->add_option("--out-dir", wa.out_dir, "output directory")->required();

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Aggregate KPI JSONs into summary tables");
    report->add_option("inputs", ra.inputs, "KPI JSON files")->required();
    report->add_option("--names", ra.names, "comma-separated column names");
    report->add_option("--out-dir", ra.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (*fit) return cmd_fit(fa);
        if (*solve) return cmd_solve(sa);
        if (*simc) return cmd_simulate(ma);
        if (*sweep) {
            wa.seed_set = seed_opt->count() > 0;
            return cmd_sweep(wa);
        }
        if (*report) return cmd_report(ra);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputError;
    }
    return kExitInputError;
}
