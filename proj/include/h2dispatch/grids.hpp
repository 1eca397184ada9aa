#pragma once

#include <utility>
#include <vector>

#include "h2dispatch/config.hpp"

namespace h2d {

// Discrete state space: one inventory grid, one price grid, and a per-day net
// production grid. All grids are uniform; y grids share the dj lattice
// (every point is an integer multiple of dj), so points of different days with
// equal value have equal lattice offsets.
struct Grids {
    std::vector<double> x_grid;              // 0, dx, ..., m
    std::vector<double> c_grid;              // c0, c0+dc, ..., c_max
    std::vector<std::vector<double>> y_grids; // [day-1] -> l_minus..l_plus step dj
    std::vector<long> y0_steps;               // y_grids[t].front() / dj
    double dx = 0, dc = 0, dj = 0;

    int nx() const { return int(x_grid.size()); }
    int nc() const { return int(c_grid.size()); }
    int ny(int day) const { return int(y_grids[size_t(day - 1)].size()); }
    int days() const { return int(y_grids.size()); }

    // Exact-membership index (tolerance 1e-6 absolute); throws ValidationError.
    int x_index(double x) const;
    int c_index(double c) const;
    int y_index(int day, double y) const;

    // Nearest grid point, clamped to the grid range.
    int x_index_nearest(double x) const;
    int c_index_nearest(double c) const;
    int y_index_nearest(int day, double y) const;
};

// Builds the grids for a config. `y_bounds[t]` gives the raw (lo, hi) net
// production range for day t+1; each day's grid is the smallest dj-aligned
// lattice interval covering it. Requires m to be a multiple of dx.
Grids make_grids(const SystemConfig& cfg, const GridSpec& spec,
                 const std::vector<std::pair<double, double>>& y_bounds);

// Rounds an inventory value to the x lattice, clamped to [0, m]. Half-way
// ties round DOWN so that snapping can never manufacture inventory.
double snap_inventory(double v, double dx, double m);

} // namespace h2d
