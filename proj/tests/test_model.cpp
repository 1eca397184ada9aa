#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2dispatch/config.hpp"
#include "h2dispatch/errors.hpp"
#include "h2dispatch/grids.hpp"
#include "h2dispatch/model.hpp"

using namespace h2d;
namespace fs = std::filesystem;

namespace {

SystemConfig base_cfg() { return SystemConfig{}; }

std::vector<std::pair<double, double>> flat_bounds(int days, double lo, double hi) {
    return std::vector<std::pair<double, double>>(size_t(days), {lo, hi});
}

Grids base_grids(double dx = 10.0) {
    SystemConfig cfg = base_cfg();
    GridSpec spec;
    spec.dx = dx;
    return make_grids(cfg, spec, flat_bounds(cfg.T, -40.0, 55.0));
}

} // namespace

TEST_CASE("buy bound is the tightest of cable, storage headroom and electrolyzer") {
    SystemConfig cfg = base_cfg();
    CHECK(buy_bound(State{1, 0.0, 35.0, 42.0}, cfg) == doctest::Approx(15.0));   // electrolyzer
    CHECK(buy_bound(State{1, 1000.0, 0.0, 42.0}, cfg) == doctest::Approx(0.0));  // storage full
    CHECK(buy_bound(State{1, 500.0, -15.0, 42.0}, cfg) == doctest::Approx(30.0)); // cable
}

TEST_CASE("sell bound is the tightest of cable, available energy and fuel cell") {
    SystemConfig cfg = base_cfg();
    CHECK(sell_bound(State{1, 0.0, 35.0, 42.0}, cfg) == doctest::Approx(30.0));
    CHECK(sell_bound(State{1, 0.0, -15.0, 42.0}, cfg) == doctest::Approx(0.0));
    CHECK(sell_bound(State{1, 100.0, -15.0, 42.0}, cfg) == doctest::Approx(30.0));
}

TEST_CASE("fuel cell mode changes only the discharge term of the sell bound") {
    SystemConfig cfg = base_cfg();
    cfg.k_minus = 5.0;
    cfg.k_c = 100.0;
    State st{1, 10.0, 30.0, 42.0};
    cfg.fuel_cell_mode = FuelCellMode::literal;
    CHECK(sell_bound(st, cfg) == doctest::Approx(5.0)); // total sales capped
    cfg.fuel_cell_mode = FuelCellMode::discharge;
    CHECK(sell_bound(st, cfg) == doctest::Approx(35.0)); // overage passes through
}

TEST_CASE("feasible actions enumerate the lattice between the rounded bounds") {
    SystemConfig cfg = base_cfg();
    Grids g5 = base_grids(5.0);
    // B = 15, S = 30 on a 5 MWh lattice.
    std::vector<double> expect{-15, -10, -5, 0, 5, 10, 15, 20, 25, 30};
    auto acts = feasible_actions(State{1, 0.0, 35.0, 42.0}, cfg, g5);
    REQUIRE(acts.size() == expect.size());
    for (size_t i = 0; i < acts.size(); ++i) CHECK(acts[i] == doctest::Approx(expect[i]));

    SystemConfig shut = cfg;
    shut.k_c = 0.0;
    auto only_hold = feasible_actions(State{1, 0.0, 35.0, 42.0}, shut, g5);
    REQUIRE(only_hold.size() == 1);
    CHECK(only_hold[0] == doctest::Approx(0.0));

    Grids g10 = base_grids(10.0);
    auto acts10 = feasible_actions(State{1, 0.0, 35.0, 42.0}, cfg, g10);
    CHECK(acts10.back() == doctest::Approx(30.0)); // cable cap reached
    auto [lo, hi] = action_step_bounds(0.0, 35.0, cfg, 10.0);
    CHECK(lo == -1);
    CHECK(hi == 3);
}

TEST_CASE("apply_action covers charge, clamped discharge and lossless withdrawal") {
    SystemConfig cfg = base_cfg();
    Grids g10 = base_grids(10.0);
    Grids g5 = base_grids(5.0);

    TransitionOutcome a = apply_action(100.0, 20.0, 0.0, cfg, g10);
    CHECK(a.x_next == doctest::Approx(110.0));
    CHECK(a.charged == doctest::Approx(20.0));
    CHECK(a.unmet == doctest::Approx(0.0));
    CHECK(a.spilled == doctest::Approx(0.0));

    TransitionOutcome b = apply_action(0.0, -15.0, -10.0, cfg, g10);
    CHECK(b.x_next == doctest::Approx(0.0));
    CHECK(b.discharged == doctest::Approx(0.0));
    CHECK(b.unmet == doctest::Approx(5.0));

    TransitionOutcome c = apply_action(50.0, -15.0, 0.0, cfg, g5);
    CHECK(c.discharged == doctest::Approx(15.0));
    CHECK(c.x_next == doctest::Approx(35.0));
    CHECK(c.unmet == doctest::Approx(0.0));
}

TEST_CASE("apply_action saturates the electrolyzer and spills the excess") {
    SystemConfig cfg = base_cfg();
    cfg.k_plus = 10.0;
    Grids g10 = base_grids(10.0);
    TransitionOutcome o = apply_action(0.0, 35.0, 0.0, cfg, g10);
    CHECK(o.charged == doctest::Approx(10.0));
    CHECK(o.spilled == doctest::Approx(25.0));
    // alpha * charged = 5 is a half-step tie on the 10 MWh lattice: snaps down.
    CHECK(o.x_next == doctest::Approx(0.0));
    CHECK(o.unmet == doctest::Approx(0.0));
}

TEST_CASE("reward: selling earns the price, buying pays the markup, unmet is penalized") {
    SystemConfig cfg = base_cfg();
    CHECK(reward(10.0, 20.0, 0.0, cfg) == doctest::Approx(200.0));
    CHECK(reward(-10.0, 20.0, 0.0, cfg) == doctest::Approx(-250.0));
    CHECK(reward(0.0, 40.0, 3.0, cfg) == doctest::Approx(-3000.0));
}

TEST_CASE("reward is piecewise linear with a kink only at zero") {
    SystemConfig cfg = base_cfg();
    const double c = 42.0;
    CHECK(reward(0.0, c, 0.0, cfg) == doctest::Approx(0.0));
    for (double u : {10.0, 20.0, 30.0})
        CHECK(reward(u, c, 0.0, cfg) == doctest::Approx(u * c));
    for (double u : {-10.0, -20.0, -30.0})
        CHECK(reward(u, c, 0.0, cfg) == doctest::Approx(u * (c + cfg.c_plus)));
    // Penalty enters additively regardless of the trading branch.
    CHECK(reward(-10.0, c, 2.0, cfg) ==
          doctest::Approx(reward(-10.0, c, 0.0, cfg) - 2.0 * cfg.s));
}

TEST_CASE("inventory snapping rounds half-ties down and clamps to the store") {
    CHECK(snap_inventory(35.0, 10.0, 1000.0) == doctest::Approx(30.0));
    CHECK(snap_inventory(35.01, 10.0, 1000.0) == doctest::Approx(40.0));
    CHECK(snap_inventory(34.99, 10.0, 1000.0) == doctest::Approx(30.0));
    CHECK(snap_inventory(45.0, 10.0, 1000.0) == doctest::Approx(40.0));
    CHECK(snap_inventory(-3.0, 10.0, 1000.0) == doctest::Approx(0.0));
    CHECK(snap_inventory(1007.0, 10.0, 1000.0) == doctest::Approx(1000.0));
}

TEST_CASE("every feasible action respects the bounds and conserves energy") {
    SystemConfig cfg = base_cfg();
    Grids g = base_grids(10.0);
    const double dx = g.dx;
    for (double x = 0.0; x <= cfg.m; x += 100.0) {
        for (double y = -40.0; y <= 55.0; y += 5.0) {
            State st{1, x, y, 42.0};
            auto acts = feasible_actions(st, cfg, g);
            REQUIRE(!acts.empty());
            bool has_zero = false;
            double prev = -1e300;
            for (double u : acts) {
                CHECK(u > prev); // strictly ascending
                prev = u;
                if (u == 0.0) has_zero = true;
                CHECK(std::abs(u) <= cfg.k_c + 1e-9);
                // Both headroom terms clamp at zero, like the bounds themselves.
                CHECK(u <= std::max(0.0, x + y) + dx + 1e-9);
                CHECK(-u <= std::max(0.0, (cfg.m - x - cfg.alpha * y) / cfg.alpha) + dx + 1e-9);
                CHECK(std::abs(u / dx - std::round(u / dx)) < 1e-9);

                TransitionOutcome o = apply_action(x, y, u, cfg, g);
                CHECK(o.x_next >= 0.0);
                CHECK(o.x_next <= cfg.m);
                CHECK_NOTHROW(g.x_index(o.x_next));
                CHECK(o.charged >= 0.0);
                CHECK(o.discharged >= 0.0);
                CHECK(o.unmet >= 0.0);
                CHECK(o.spilled >= 0.0);
                CHECK(!(o.charged > 0.0 && o.discharged > 0.0));
                CHECK(o.unmet * o.spilled == doctest::Approx(0.0));
                CHECK(o.charged <= cfg.k_plus + 1e-9);
                CHECK(o.discharged <= std::min(x, cfg.k_minus) + 1e-9);
                // Flow balance before snapping.
                CHECK(y - u ==
                      doctest::Approx(o.charged + o.spilled - o.discharged - o.unmet)
                          .epsilon(1e-12));
            }
            CHECK(has_zero);
        }
    }
}

TEST_CASE("lossless conversion makes charge and discharge inverse operations") {
    SystemConfig cfg = base_cfg();
    cfg.alpha = 1.0;
    Grids g = base_grids(10.0);
    TransitionOutcome up = apply_action(100.0, 20.0, 0.0, cfg, g);
    CHECK(up.x_next == doctest::Approx(120.0));
    TransitionOutcome down = apply_action(up.x_next, -20.0, 0.0, cfg, g);
    CHECK(down.x_next == doctest::Approx(100.0));
    // Off-lattice charge snaps by at most half a step.
    TransitionOutcome odd = apply_action(0.0, 35.0, 0.0, cfg, g);
    CHECK(std::abs(odd.x_next - 35.0) <= 5.0);
}

TEST_CASE("grids: geometry, exact indexing and nearest-point lookup") {
    SystemConfig cfg = base_cfg();
    GridSpec spec;
    std::vector<std::pair<double, double>> yb = flat_bounds(cfg.T, -12.3, 17.2);
    Grids g = make_grids(cfg, spec, yb);

    CHECK(g.nx() == 101);
    CHECK(g.x_grid.front() == doctest::Approx(0.0));
    CHECK(g.x_grid.back() == doctest::Approx(1000.0));
    CHECK(g.nc() == 31);
    CHECK(g.c_grid.front() == doctest::Approx(0.0));
    CHECK(g.c_grid.back() == doctest::Approx(90.0));
    CHECK(g.days() == cfg.T);
    // Smallest 5 MWh lattice covering [-12.3, 17.2] is [-15, 20].
    CHECK(g.y_grids[0].front() == doctest::Approx(-15.0));
    CHECK(g.y_grids[0].back() == doctest::Approx(20.0));
    CHECK(g.ny(1) == 8);
    CHECK(g.y0_steps[0] == -3);

    CHECK(g.x_index(40.0) == 4);
    CHECK_THROWS_AS((void)g.x_index(41.0), ValidationError);
    CHECK(g.x_index_nearest(41.0) == 4);
    CHECK(g.x_index_nearest(-50.0) == 0);
    CHECK(g.x_index_nearest(2000.0) == 100);
    CHECK(g.c_index(42.0) == 14);
    CHECK_THROWS_AS((void)g.c_index(42.5), ValidationError);
    CHECK(g.y_index(1, -15.0) == 0);
    CHECK(g.y_index_nearest(1, 100.0) == g.ny(1) - 1);
}

TEST_CASE("grids: capacity must sit on the inventory lattice") {
    SystemConfig cfg = base_cfg();
    cfg.m = 1005.0;
    GridSpec spec;
    CHECK_THROWS_AS(make_grids(cfg, spec, flat_bounds(cfg.T, -40.0, 55.0)),
                    ValidationError);
}

TEST_CASE("system config JSON round-trips and rejects malformed input") {
    SystemConfig cfg = base_cfg();
    cfg.k_c = 40.0;
    cfg.fuel_cell_mode = FuelCellMode::discharge;
    nlohmann::json j = cfg;
    SystemConfig back = j.get<SystemConfig>();
    CHECK(back.w == cfg.w);
    CHECK(back.m == cfg.m);
    CHECK(back.k_c == cfg.k_c);
    CHECK(back.k_plus == cfg.k_plus);
    CHECK(back.k_minus == cfg.k_minus);
    CHECK(back.c_plus == cfg.c_plus);
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.s == cfg.s);
    CHECK(back.T == cfg.T);
    CHECK(back.fuel_cell_mode == cfg.fuel_cell_mode);

    nlohmann::json bad = j;
    bad["typo_field"] = 1.0;
    CHECK_THROWS_AS((void)bad.get<SystemConfig>(), ValidationError);
    nlohmann::json missing = j;
    missing.erase("m");
    CHECK_THROWS_AS((void)missing.get<SystemConfig>(), ValidationError);
}

TEST_CASE("system config file persistence and the error taxonomy") {
    fs::path dir = fs::temp_directory_path() / "h2d_model_test";
    fs::create_directories(dir);
    fs::path p = dir / "config.json";
    SystemConfig cfg = base_cfg();
    cfg.alpha = 0.75;
    save_system_config(cfg, p.string());
    SystemConfig back = load_system_config(p.string());
    CHECK(back.alpha == doctest::Approx(0.75));
    CHECK_THROWS_AS((void)load_system_config((dir / "missing.json").string()), IoError);
    std::ofstream(dir / "garbage.json") << "{ not json";
    CHECK_THROWS_AS((void)load_system_config((dir / "garbage.json").string()), IoError);
    fs::remove_all(dir);
}

TEST_CASE("config validation rejects out-of-range parameters") {
    const double max_price = 90.0;
    SystemConfig ok = base_cfg();
    CHECK_NOTHROW(ok.validate(max_price));

    SystemConfig c1 = ok;
    c1.alpha = 0.0;
    CHECK_THROWS_AS(c1.validate(max_price), ValidationError);
    SystemConfig c2 = ok;
    c2.alpha = 1.5;
    CHECK_THROWS_AS(c2.validate(max_price), ValidationError);
    SystemConfig c3 = ok;
    c3.s = 90.0; // must dominate max price + markup
    CHECK_THROWS_AS(c3.validate(max_price), ValidationError);
    SystemConfig c4 = ok;
    c4.m = -1.0;
    CHECK_THROWS_AS(c4.validate(max_price), ValidationError);
    SystemConfig c5 = ok;
    c5.T = 0;
    CHECK_THROWS_AS(c5.validate(max_price), ValidationError);
    SystemConfig c6 = ok;
    c6.w = 0.0;
    CHECK_THROWS_AS(c6.validate(max_price), ValidationError);
    SystemConfig c7 = ok;
    c7.k_c = -5.0;
    CHECK_THROWS_AS(c7.validate(max_price), ValidationError);

    GridSpec gs;
    CHECK_NOTHROW(gs.validate());
    GridSpec g1;
    g1.dx = 0.0;
    CHECK_THROWS_AS(g1.validate(), ValidationError);
    GridSpec g2;
    g2.dc = -1.0;
    CHECK_THROWS_AS(g2.validate(), ValidationError);
    GridSpec g3;
    g3.dj = 0.0;
    CHECK_THROWS_AS(g3.validate(), ValidationError);

    CHECK_THROWS_AS((void)fuel_cell_mode_from_string("bogus"), ValidationError);
    CHECK(fuel_cell_mode_from_string("literal") == FuelCellMode::literal);
    CHECK(fuel_cell_mode_from_string("discharge") == FuelCellMode::discharge);
    CHECK(to_string(FuelCellMode::literal) == "literal");
}
