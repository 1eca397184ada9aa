#include "h2dispatch/grids.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "h2dispatch/errors.hpp"

namespace h2d {

namespace {

int exact_index(const std::vector<double>& grid, double v, const char* what) {
    if (!grid.empty()) {
        double step = grid.size() > 1 ? grid[1] - grid[0] : 1.0;
        double r = (v - grid[0]) / step;
        long i = std::lround(r);
        if (i >= 0 && i < long(grid.size()) && std::abs(v - grid[size_t(i)]) <= 1e-6)
            return int(i);
    }
    throw ValidationError(std::string(what) + ": value " + std::to_string(v) +
                          " is not a grid point");
}

int nearest_index(const std::vector<double>& grid, double v) {
    double step = grid.size() > 1 ? grid[1] - grid[0] : 1.0;
    long i = std::lround((v - grid[0]) / step);
    i = std::clamp(i, 0L, long(grid.size()) - 1);
    return int(i);
}

} // namespace

int Grids::x_index(double x) const { return exact_index(x_grid, x, "x"); }
int Grids::c_index(double c) const { return exact_index(c_grid, c, "c"); }
int Grids::y_index(int day, double y) const {
    return exact_index(y_grids[size_t(day - 1)], y, "y_bar");
}

int Grids::x_index_nearest(double x) const { return nearest_index(x_grid, x); }
int Grids::c_index_nearest(double c) const { return nearest_index(c_grid, c); }
int Grids::y_index_nearest(int day, double y) const {
    return nearest_index(y_grids[size_t(day - 1)], y);
}

Grids make_grids(const SystemConfig& cfg, const GridSpec& spec,
                 const std::vector<std::pair<double, double>>& y_bounds) {
    spec.validate();
    cfg.validate(spec.c_max);
    if (int(y_bounds.size()) != cfg.T)
        throw ValidationError("make_grids: need one y bound per day (" +
                              std::to_string(cfg.T) + "), got " +
                              std::to_string(y_bounds.size()));
    double mr = cfg.m / spec.dx;
    if (std::abs(mr - std::round(mr)) > 1e-9 * (1.0 + mr))
        throw ValidationError("m: must be an integer multiple of dx");

    Grids g;
    g.dx = spec.dx;
    g.dc = spec.dc;
    g.dj = spec.dj;
    long nxm = std::lround(mr);
    g.x_grid.reserve(size_t(nxm + 1));
    for (long i = 0; i <= nxm; ++i) g.x_grid.push_back(double(i) * spec.dx);
    long ncm = std::lround(spec.c_max / spec.dc);
    g.c_grid.reserve(size_t(ncm + 1));
    for (long i = 0; i <= ncm; ++i) g.c_grid.push_back(double(i) * spec.dc);

    g.y_grids.resize(y_bounds.size());
    g.y0_steps.resize(y_bounds.size());
    for (size_t t = 0; t < y_bounds.size(); ++t) {
        auto [lo, hi] = y_bounds[t];
        if (!(lo <= hi))
            throw ValidationError("y bounds for day " + std::to_string(t + 1) +
                                  ": lo > hi");
        long klo = long(std::floor(lo / spec.dj + 1e-9));
        long khi = long(std::ceil(hi / spec.dj - 1e-9));
        if (khi < klo) khi = klo;
        g.y0_steps[t] = klo;
        auto& yt = g.y_grids[t];
        yt.reserve(size_t(khi - klo + 1));
        for (long k = klo; k <= khi; ++k) yt.push_back(double(k) * spec.dj);
    }
    return g;
}

double snap_inventory(double v, double dx, double m) {
    v = std::clamp(v, 0.0, m);
    // floor(r + 0.5 - eps): exact .5 offsets go down, everything else rounds
    // to nearest. A snap can then at most keep, never raise, the lattice cell
    // reachable from a half-step value.
    long k = long(std::floor(v / dx + 0.5 - 1e-9));
    long kmax = std::lround(m / dx);
    k = std::clamp(k, 0L, kmax);
    return double(k) * dx;
}

} // namespace h2d
