#include "h2dispatch/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "h2dispatch/csv.hpp"
#include "h2dispatch/errors.hpp"
#include "h2dispatch/json_util.hpp"
#include "h2dispatch/parallel.hpp"

namespace h2d {

using jsonutil::get_num;

void SimConfig::validate() const {
    if (warmup_years < 0) throw ValidationError("SimConfig: warmup_years must be >= 0");
    if (years <= warmup_years)
        throw ValidationError("SimConfig: years must exceed warmup_years");
    if (replication_block < 1)
        throw ValidationError("SimConfig: replication_block must be >= 1");
}

const char* to_string(ActionClass c) {
    switch (c) {
        case ActionClass::sell_exact_overage: return "sell_exact_overage";
        case ActionClass::sell_overage_plus_inventory: return "sell_overage_plus_inventory";
        case ActionClass::sell_part_store_rest: return "sell_part_store_rest";
        case ActionClass::store_overage_and_buy: return "store_overage_and_buy";
        case ActionClass::buy_exact_shortage: return "buy_exact_shortage";
        case ActionClass::buy_more_store_rest: return "buy_more_store_rest";
        case ActionClass::buy_less_draw_storage: return "buy_less_draw_storage";
        case ActionClass::sell_despite_shortage: return "sell_despite_shortage";
    }
    return "?";
}

ActionClass classify_action(double y_bar, double u, const Grids& grids) {
    if (std::abs(y_bar) < grids.dj / 2 - 1e-9)
        throw ValidationError("classify_action: |y_bar| below dj/2 is excluded");
    const double tol = grids.dx / 2 + 1e-9;
    if (y_bar > 0) {
        if (std::abs(u - y_bar) <= tol) return ActionClass::sell_exact_overage;
        if (u > y_bar) return ActionClass::sell_overage_plus_inventory;
        if (u >= 0) return ActionClass::sell_part_store_rest;
        return ActionClass::store_overage_and_buy;
    }
    if (std::abs(u - y_bar) <= tol) return ActionClass::buy_exact_shortage;
    if (u < y_bar) return ActionClass::buy_more_store_rest;
    if (u <= 0) return ActionClass::buy_less_draw_storage;
    return ActionClass::sell_despite_shortage;
}

namespace {

struct BlockAcc {
    double profit_sum = 0, profit_sq = 0;     // per-year
    double profit_ex_sum = 0;
    double unmet_sum = 0;
    double charged_sum = 0;                   // over charged > 0 periods
    long charged_periods = 0;
    double charged_all_sum = 0;               // over all periods
    long periods = 0;
    long cong_buy = 0, cong_sell = 0;
    long years = 0;
    std::vector<double> inv_by_day;                       // sums of x
    std::vector<std::array<long, kNumActionClasses>> cls; // counts
    std::vector<long> overage_days, shortage_days;
    std::vector<long> cong_buy_by_day, cong_sell_by_day;

    explicit BlockAcc(int T)
        : inv_by_day(size_t(T), 0.0),
          cls(size_t(T)),
          overage_days(size_t(T), 0),
          shortage_days(size_t(T), 0),
          cong_buy_by_day(size_t(T), 0),
          cong_sell_by_day(size_t(T), 0) {
        for (auto& a : cls) a.fill(0);
    }
};

struct DayTables {
    std::vector<std::vector<double>> pmf_cdf;   // [day][iy]
    std::vector<std::vector<double>> chain_cdf; // [ic][ic']
    std::vector<std::vector<int>> y_map;        // world iy -> policy iy
};

int sample_cdf(const std::vector<double>& cdf, double u) {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) return int(cdf.size()) - 1;
    return int(it - cdf.begin());
}

} // namespace

KpiReport simulate(const PolicyTable& policy, const Grids& policy_grids,
                   const ProblemSetup& world, const SimConfig& sim, int threads) {
    sim.validate();
    const Grids& g = world.grids;
    const int T = world.cfg.T;
    if (policy.T != T) throw ValidationError("simulate: policy horizon differs from config T");
    if (policy_grids.nx() != g.nx() || policy_grids.nc() != g.nc() ||
        std::abs(policy_grids.dx - g.dx) > 1e-12 || std::abs(policy_grids.dc - g.dc) > 1e-12)
        throw ValidationError("simulate: policy x/c grids differ from the world's");

    DayTables tab;
    tab.pmf_cdf.resize(size_t(T));
    tab.y_map.resize(size_t(T));
    for (int t = 0; t < T; ++t) {
        const auto& p = world.pmfs[size_t(t)].probs;
        auto& cdf = tab.pmf_cdf[size_t(t)];
        cdf.resize(p.size());
        std::partial_sum(p.begin(), p.end(), cdf.begin());
        cdf.back() = 1.0;
        auto& ym = tab.y_map[size_t(t)];
        ym.resize(g.y_grids[size_t(t)].size());
        for (size_t iy = 0; iy < ym.size(); ++iy)
            ym[iy] = policy_grids.y_index_nearest(t + 1, g.y_grids[size_t(t)][iy]);
    }
    tab.chain_cdf.resize(size_t(g.nc()));
    for (int ic = 0; ic < g.nc(); ++ic) {
        const double* r = world.chain.row(ic);
        auto& cdf = tab.chain_cdf[size_t(ic)];
        cdf.assign(r, r + g.nc());
        std::partial_sum(cdf.begin(), cdf.end(), cdf.begin());
        cdf.back() = 1.0;
    }

    const long measured = sim.years - sim.warmup_years;
    const long block = std::min(sim.replication_block, measured);
    const long nblocks = (measured + block - 1) / block;
    const long warm_per_block = (sim.warmup_years + nblocks - 1) / nblocks;
    const int ic0 = g.c_index_nearest(world.chain.stationary_mean());

    double expected_demand_year = 0;
    for (double d : world.demand_mean_by_day) expected_demand_year += d;

    std::vector<BlockAcc> accs;
    accs.reserve(size_t(nblocks));
    for (long b = 0; b < nblocks; ++b) accs.emplace_back(T);

    parallel_for(nblocks, threads, [&](long b) {
        BlockAcc& acc = accs[size_t(b)];
        std::seed_seq seq{std::uint32_t(sim.seed), std::uint32_t(sim.seed >> 32),
                          std::uint32_t(b), std::uint32_t(0xb10c)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> un(0.0, 1.0);

        long years_b = std::min(block, measured - b * block);
        double x = 0.0;
        int ic_prev = ic0;
        for (long y = 0; y < warm_per_block + years_b; ++y) {
            const bool count = y >= warm_per_block;
            double profit = 0, profit_ex = 0;
            for (int t = 1; t <= T; ++t) {
                int iy = sample_cdf(tab.pmf_cdf[size_t(t - 1)], un(rng));
                int ic = sample_cdf(tab.chain_cdf[size_t(ic_prev)], un(rng));
                double y_bar = g.y_grids[size_t(t - 1)][size_t(iy)];
                double c = g.c_grid[size_t(ic)];
                long ix = std::lround(x / g.dx);
                int iy_pol = tab.y_map[size_t(t - 1)][size_t(iy)];
                double u = double(policy.at(policy_grids, t, int(ix), iy_pol, ic)) * policy.dx;
                TransitionOutcome o = apply_action(x, y_bar, u, world.cfg, g);
                double r = reward(u, c, o.unmet, world.cfg);
                profit += r;
                profit_ex += r + world.cfg.s * o.unmet;
                if (count) {
                    acc.periods += 1;
                    acc.unmet_sum += o.unmet;
                    acc.charged_all_sum += o.charged;
                    if (o.charged > 0) {
                        acc.charged_sum += o.charged;
                        acc.charged_periods += 1;
                    }
                    acc.inv_by_day[size_t(t - 1)] += x;
                    bool cb = u < 0 && u == -world.cfg.k_c;
                    bool cs = u > 0 && u == world.cfg.k_c;
                    acc.cong_buy += cb;
                    acc.cong_sell += cs;
                    acc.cong_buy_by_day[size_t(t - 1)] += cb;
                    acc.cong_sell_by_day[size_t(t - 1)] += cs;
                    if (std::abs(y_bar) >= g.dj / 2 - 1e-9) {
                        ActionClass cls = classify_action(y_bar, u, g);
                        acc.cls[size_t(t - 1)][size_t(cls)] += 1;
                        if (y_bar > 0)
                            acc.overage_days[size_t(t - 1)] += 1;
                        else
                            acc.shortage_days[size_t(t - 1)] += 1;
                    }
                }
                x = o.x_next;
                ic_prev = ic;
            }
            if (count) {
                acc.profit_sum += profit;
                acc.profit_sq += profit * profit;
                acc.profit_ex_sum += profit_ex;
                acc.years += 1;
            }
        }
    });

    // Merge in block order.
    BlockAcc tot(T);
    for (const BlockAcc& a : accs) {
        tot.profit_sum += a.profit_sum;
        tot.profit_sq += a.profit_sq;
        tot.profit_ex_sum += a.profit_ex_sum;
        tot.unmet_sum += a.unmet_sum;
        tot.charged_sum += a.charged_sum;
        tot.charged_periods += a.charged_periods;
        tot.charged_all_sum += a.charged_all_sum;
        tot.periods += a.periods;
        tot.cong_buy += a.cong_buy;
        tot.cong_sell += a.cong_sell;
        tot.years += a.years;
        for (int t = 0; t < T; ++t) {
            tot.inv_by_day[size_t(t)] += a.inv_by_day[size_t(t)];
            tot.overage_days[size_t(t)] += a.overage_days[size_t(t)];
            tot.shortage_days[size_t(t)] += a.shortage_days[size_t(t)];
            tot.cong_buy_by_day[size_t(t)] += a.cong_buy_by_day[size_t(t)];
            tot.cong_sell_by_day[size_t(t)] += a.cong_sell_by_day[size_t(t)];
            for (int k = 0; k < kNumActionClasses; ++k)
                tot.cls[size_t(t)][size_t(k)] += a.cls[size_t(t)][size_t(k)];
        }
    }

    KpiReport rep;
    rep.years_simulated = tot.years;
    rep.warmup_years = sim.warmup_years;
    rep.seed = sim.seed;
    rep.replication_block = sim.replication_block;
    const double ny = double(tot.years);
    rep.mean_profit_per_year = tot.profit_sum / ny;
    double var = ny > 1 ? (tot.profit_sq - tot.profit_sum * tot.profit_sum / ny) / (ny - 1)
                        : 0.0;
    rep.se_profit = var > 0 ? std::sqrt(var / ny) : 0.0;
    rep.mean_profit_ex_penalty = tot.profit_ex_sum / ny;
    rep.utilization_defined = tot.charged_periods > 0 && world.cfg.k_plus > 0;
    rep.electrolyzer_utilization_pct =
        rep.utilization_defined
            ? 100.0 * tot.charged_sum / (double(tot.charged_periods) * world.cfg.k_plus)
            : 0.0;
    rep.electrolyzer_utilization_all_pct =
        world.cfg.k_plus > 0 && tot.periods > 0
            ? 100.0 * tot.charged_all_sum / (double(tot.periods) * world.cfg.k_plus)
            : 0.0;
    rep.pct_time_congestion_buying = 100.0 * double(tot.cong_buy) / double(tot.periods);
    rep.pct_time_congestion_selling = 100.0 * double(tot.cong_sell) / double(tot.periods);
    rep.pct_time_congestion = rep.pct_time_congestion_buying + rep.pct_time_congestion_selling;
    rep.mean_unmet_mwh_per_year = tot.unmet_sum / ny;
    rep.pct_unmet_demand = expected_demand_year > 0
                               ? 100.0 * tot.unmet_sum / (expected_demand_year * ny)
                               : 0.0;
    rep.mean_inventory_by_day.resize(size_t(T));
    rep.buy_congestion_by_day.resize(size_t(T));
    rep.sell_congestion_by_day.resize(size_t(T));
    rep.action_class_freq_by_day.assign(size_t(T), {});
    for (int t = 0; t < T; ++t) {
        rep.mean_inventory_by_day[size_t(t)] = tot.inv_by_day[size_t(t)] / ny;
        rep.buy_congestion_by_day[size_t(t)] = double(tot.cong_buy_by_day[size_t(t)]) / ny;
        rep.sell_congestion_by_day[size_t(t)] = double(tot.cong_sell_by_day[size_t(t)]) / ny;
        auto& f = rep.action_class_freq_by_day[size_t(t)];
        f.fill(0.0);
        double no = double(tot.overage_days[size_t(t)]);
        double ns = double(tot.shortage_days[size_t(t)]);
        for (int k = 0; k < kNumActionClasses; ++k) {
            bool overage_class = k < 4;
            double den = overage_class ? no : ns;
            if (den > 0) f[size_t(k)] = double(tot.cls[size_t(t)][size_t(k)]) / den;
        }
    }
    return rep;
}

KpiReport simulate(const PolicyTable& policy, const Calibration& cal,
                   const SystemConfig& cfg, const GridSpec& gspec, const SimConfig& sim,
                   int threads) {
    ProblemSetup world = build_setup(cfg, gspec, cal, threads);
    return simulate(policy, world.grids, world, sim, threads);
}

std::vector<std::pair<double, double>> congestion_trace(const KpiReport& r) {
    std::vector<std::pair<double, double>> out;
    out.reserve(r.buy_congestion_by_day.size());
    for (size_t t = 0; t < r.buy_congestion_by_day.size(); ++t)
        out.emplace_back(r.buy_congestion_by_day[t], r.sell_congestion_by_day[t]);
    return out;
}

void to_json(nlohmann::json& j, const KpiReport& r) {
    std::vector<std::vector<double>> cls;
    cls.reserve(r.action_class_freq_by_day.size());
    for (const auto& a : r.action_class_freq_by_day)
        cls.emplace_back(a.begin(), a.end());
    j = nlohmann::json{{"mean_profit_per_year", r.mean_profit_per_year},
                       {"se_profit", r.se_profit},
                       {"mean_profit_ex_penalty", r.mean_profit_ex_penalty},
                       {"electrolyzer_utilization_pct", r.electrolyzer_utilization_pct},
                       {"utilization_defined", r.utilization_defined},
                       {"electrolyzer_utilization_all_pct", r.electrolyzer_utilization_all_pct},
                       {"pct_time_congestion", r.pct_time_congestion},
                       {"pct_time_congestion_buying", r.pct_time_congestion_buying},
                       {"pct_time_congestion_selling", r.pct_time_congestion_selling},
                       {"pct_unmet_demand", r.pct_unmet_demand},
                       {"mean_unmet_mwh_per_year", r.mean_unmet_mwh_per_year},
                       {"years_simulated", r.years_simulated},
                       {"warmup_years", r.warmup_years},
                       {"seed", r.seed},
                       {"replication_block", r.replication_block},
                       {"mean_inventory_by_day", r.mean_inventory_by_day},
                       {"action_class_freq_by_day", cls},
                       {"buy_congestion_by_day", r.buy_congestion_by_day},
                       {"sell_congestion_by_day", r.sell_congestion_by_day}};
}

void from_json(const nlohmann::json& j, KpiReport& r) {
    r.mean_profit_per_year = get_num(j, "mean_profit_per_year", "KpiReport");
    r.se_profit = get_num(j, "se_profit", "KpiReport");
    r.mean_profit_ex_penalty = get_num(j, "mean_profit_ex_penalty", "KpiReport");
    r.electrolyzer_utilization_pct = get_num(j, "electrolyzer_utilization_pct", "KpiReport");
    r.utilization_defined = j.at("utilization_defined").get<bool>();
    r.electrolyzer_utilization_all_pct =
        get_num(j, "electrolyzer_utilization_all_pct", "KpiReport");
    r.pct_time_congestion = get_num(j, "pct_time_congestion", "KpiReport");
    r.pct_time_congestion_buying = get_num(j, "pct_time_congestion_buying", "KpiReport");
    r.pct_time_congestion_selling = get_num(j, "pct_time_congestion_selling", "KpiReport");
    r.pct_unmet_demand = get_num(j, "pct_unmet_demand", "KpiReport");
    r.mean_unmet_mwh_per_year = get_num(j, "mean_unmet_mwh_per_year", "KpiReport");
    r.years_simulated = j.at("years_simulated").get<long>();
    r.warmup_years = j.at("warmup_years").get<long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.replication_block = j.at("replication_block").get<long>();
    r.mean_inventory_by_day = j.at("mean_inventory_by_day").get<std::vector<double>>();
    r.buy_congestion_by_day = j.at("buy_congestion_by_day").get<std::vector<double>>();
    r.sell_congestion_by_day = j.at("sell_congestion_by_day").get<std::vector<double>>();
    auto cls = j.at("action_class_freq_by_day").get<std::vector<std::vector<double>>>();
    r.action_class_freq_by_day.assign(cls.size(), {});
    for (size_t t = 0; t < cls.size(); ++t) {
        if (cls[t].size() != kNumActionClasses)
            throw ValidationError("KpiReport: action class row must have 8 entries");
        std::copy(cls[t].begin(), cls[t].end(), r.action_class_freq_by_day[t].begin());
    }
}

void save_kpi_report(const KpiReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    nlohmann::json j = r;
    out << j.dump(2) << '\n';
}

KpiReport load_kpi_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open KPI file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    return j.get<KpiReport>();
}

void write_trace_csv(const KpiReport& r, const std::string& path) {
    csv::Writer w(path);
    w.row({"day", "metric", "value"});
    const int T = int(r.mean_inventory_by_day.size());
    for (int t = 1; t <= T; ++t) {
        auto day = csv::Writer::num(long(t));
        w.row({day, "mean_inventory", csv::Writer::num(r.mean_inventory_by_day[size_t(t - 1)])});
        w.row({day, "buy_congestion_frac",
               csv::Writer::num(r.buy_congestion_by_day[size_t(t - 1)])});
        w.row({day, "sell_congestion_frac",
               csv::Writer::num(r.sell_congestion_by_day[size_t(t - 1)])});
        for (int k = 0; k < kNumActionClasses; ++k)
            w.row({day, std::string("freq_") + to_string(ActionClass(k)),
                   csv::Writer::num(r.action_class_freq_by_day[size_t(t - 1)][size_t(k)])});
    }
}

} // namespace h2d
