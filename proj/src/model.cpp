#include "h2dispatch/model.hpp"

#include <algorithm>
#include <cmath>

namespace h2d {

double buy_bound(const State& st, const SystemConfig& cfg) {
    double room = (cfg.m - st.x - cfg.alpha * st.y_bar) / cfg.alpha;
    double b = std::min({cfg.k_c, room, cfg.k_plus - st.y_bar});
    return std::max(0.0, b);
}

double sell_bound(const State& st, const SystemConfig& cfg) {
    double cell = cfg.fuel_cell_mode == FuelCellMode::literal
                      ? cfg.k_minus
                      : std::max(st.y_bar, 0.0) + cfg.k_minus;
    double sgl = std::min({cfg.k_c, st.x + st.y_bar, cell});
    return std::max(0.0, sgl);
}

std::pair<long, long> action_step_bounds(double x, double y_bar, const SystemConfig& cfg,
                                         double dx) {
    State st{1, x, y_bar, 0.0};
    double b = buy_bound(st, cfg);
    double sl = sell_bound(st, cfg);
    // Epsilon rescues exact-integer bounds from inexact alpha arithmetic.
    long hi = long(std::floor(sl / dx + 1e-9));
    long lo = -long(std::floor(b / dx + 1e-9));
    return {lo, hi};
}

std::vector<double> feasible_actions(const State& st, const SystemConfig& cfg,
                                     const Grids& grids) {
    auto [lo, hi] = action_step_bounds(st.x, st.y_bar, cfg, grids.dx);
    std::vector<double> out;
    out.reserve(size_t(hi - lo + 1));
    for (long i = lo; i <= hi; ++i) out.push_back(double(i) * grids.dx);
    return out;
}

TransitionOutcome apply_action(double x, double y_bar, double u, const SystemConfig& cfg,
                               const Grids& grids) {
    TransitionOutcome o;
    double f = y_bar - u; // energy pushed toward (f > 0) or pulled from (f < 0) storage
    double x_raw = x;
    if (f >= 0) {
        double headroom = std::max(0.0, (cfg.m - x) / cfg.alpha);
        o.charged = std::min({f, cfg.k_plus, headroom});
        o.spilled = f - o.charged;
        x_raw = x + cfg.alpha * o.charged;
    } else {
        double need = -f;
        o.discharged = std::min({need, x, cfg.k_minus});
        o.unmet = need - o.discharged;
        x_raw = x - o.discharged;
    }
    o.x_next = snap_inventory(x_raw, grids.dx, cfg.m);
    return o;
}

double reward(double u, double c, double unmet, const SystemConfig& cfg) {
    double trade = u >= 0 ? u * c : u * (c + cfg.c_plus);
    return trade - cfg.s * unmet;
}

} // namespace h2d
