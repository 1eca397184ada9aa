#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "h2dispatch/calibration.hpp"
#include "h2dispatch/model.hpp"

namespace h2d {

// Value function, one flat slab per day: index (ix * ny_t + iy) * nc + ic.
struct ValueTable {
    int T = 0;
    std::vector<std::vector<double>> days;

    const double& at(const Grids& g, int day, int ix, int iy, int ic) const {
        return days[size_t(day - 1)][size_t((ix * g.ny(day) + iy) * g.nc() + ic)];
    }
};

// Optimal action as a signed step count on the dx lattice (u = steps * dx,
// positive sells), same layout as ValueTable.
struct PolicyTable {
    int T = 0;
    double dx = 0;
    std::vector<std::vector<int8_t>> steps;

    int8_t at(const Grids& g, int day, int ix, int iy, int ic) const {
        return steps[size_t(day - 1)][size_t((ix * g.ny(day) + iy) * g.nc() + ic)];
    }
};

struct ConvergenceReport {
    double g = 0;     // long-run average reward per year: mean of the last delta
    double span = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> span_trace; // span after each year iteration
};

struct SolveOptions {
    double epsilon = 1e-3; // convergence threshold on span(delta V_day1)
    int max_iters = 500;
    int threads = 1;
    double boundary_init = 0.0; // constant initial terminal value
};

// One backward step for `day` (1-based). v_next is the successor day's value
// slab, pmf_next the successor day's net-production pmf. Writes the day's
// value and policy slabs; every cell is written exactly once, so results are
// identical for any thread count.
void bellman_backup(int day, const std::vector<double>& v_next,
                    const NetProductionPmf& pmf_next, const ProblemSetup& s, int threads,
                    std::vector<double>& v_out, std::vector<int8_t>& pol_out);

struct YearSolution {
    ValueTable values;
    PolicyTable policy;
};

// Backward sweep over one year. v_boundary is the terminal value attached to
// the *next* year's day 1 (same shape as the day-1 slab). days[0] of the
// result is the year's initial value function.
YearSolution solve_year(const std::vector<double>& v_boundary, const ProblemSetup& s,
                        int threads);

struct PeriodicSolution {
    ValueTable values;
    PolicyTable policy;
    ConvergenceReport report;
};

// Year-over-year value iteration: feeds each year's day-1 values back in as
// the terminal boundary until the per-cell improvement is uniform within
// epsilon (span criterion); g is the mean improvement of the last iteration.
PeriodicSolution solve_periodic(const ProblemSetup& s, const SolveOptions& opt);

// Optimal trade for an on-grid state; throws ValidationError off-grid.
double extract_action(const PolicyTable& pol, const Grids& grids, const State& st);

// Compact binary persistence. Files embed the grid geometry.
void save_policy(const PolicyTable& pol, const Grids& g, const std::string& path);
PolicyTable load_policy(const std::string& path, Grids* grids_out);
void save_values(const ValueTable& val, const Grids& g, const std::string& path);
ValueTable load_values(const std::string& path, Grids* grids_out);

// True if the geometry embedded in a loaded file matches freshly built grids.
bool grids_compatible(const Grids& a, const Grids& b);

// Long-format CSV (day, x, y_bar, c, u_star, V). Each entry of `slices` is a
// day plus the y indices to export (empty list = the day's whole y grid).
void export_policy_csv(const PolicyTable& pol, const ValueTable& val, const Grids& g,
                       const std::vector<std::pair<int, std::vector<int>>>& slices,
                       const std::string& path);

} // namespace h2d
