#pragma once

#include <utility>
#include <vector>

#include "h2dispatch/config.hpp"
#include "h2dispatch/grids.hpp"

namespace h2d {

// Decision state at the end of a period: day of year (1-based), inventory x,
// realized net production y_bar (production minus consumption), price c.
struct State {
    int day = 1;
    double x = 0;
    double y_bar = 0;
    double c = 0;
};

// Physical result of applying a trade u in a state. Exactly one of
// charged/discharged can be positive, and unmet * spilled == 0.
struct TransitionOutcome {
    double x_next = 0;      // inventory after conversion and lattice snap
    double unmet = 0;       // shortage not covered by grid or storage (MWh)
    double spilled = 0;     // overage curtailed at the electrolyzer (MWh)
    double charged = 0;     // energy sent into the electrolyzer (MWh)
    double discharged = 0;  // energy drawn from storage (MWh)
};

// Largest purchasable quantity (u >= 0 is buying): bounded by the cable, by
// storage headroom after conversion, and by electrolyzer capacity net of the
// overage that must be absorbed alongside the purchase. Never negative.
double buy_bound(const State& st, const SystemConfig& cfg);

// Largest sellable quantity: bounded by the cable, by available energy
// (inventory plus net production), and by the fuel cell. Never negative.
double sell_bound(const State& st, const SystemConfig& cfg);

// Action steps on the dx lattice: returns (lo, hi) with u = i*dx feasible for
// all lo <= i <= hi; always contains 0. Selling is u = i*dx with i > 0.
std::pair<long, long> action_step_bounds(double x, double y_bar, const SystemConfig& cfg,
                                         double dx);

// All feasible lattice actions for a state, ascending. Sign convention:
// u > 0 sells, u < 0 buys.
std::vector<double> feasible_actions(const State& st, const SystemConfig& cfg,
                                     const Grids& grids);

// Moves the storage flow f = y_bar - u through the electrolyzer/fuel cell,
// saturating at capacities and stock, then snaps inventory to the lattice.
TransitionOutcome apply_action(double x, double y_bar, double u, const SystemConfig& cfg,
                               const Grids& grids);

// One-period profit: sales earn u*c, purchases pay the markup (u < 0 costs
// |u|*(c + c_plus)), unmet demand is penalized at s per MWh.
double reward(double u, double c, double unmet, const SystemConfig& cfg);

} // namespace h2d
