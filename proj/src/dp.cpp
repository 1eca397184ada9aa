#include "h2dispatch/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "h2dispatch/csv.hpp"
#include "h2dispatch/errors.hpp"
#include "h2dispatch/parallel.hpp"

namespace h2d {

namespace {

// Tie rank: prefer the smallest |u|, and selling over buying at equal size.
inline long tie_rank(long step) { return 2 * std::labs(step) + (step < 0 ? 1 : 0); }

void check_action_range(const ProblemSetup& s) {
    long max_step = long(std::floor(s.cfg.k_c / s.grids.dx + 1e-9));
    if (max_step > 127)
        throw ValidationError("k_c/dx exceeds the policy step range (127)");
}

} // namespace

void bellman_backup(int day, const std::vector<double>& v_next,
                    const NetProductionPmf& pmf_next, const ProblemSetup& s, int threads,
                    std::vector<double>& v_out, std::vector<int8_t>& pol_out) {
    const Grids& g = s.grids;
    const int nx = g.nx(), nc = g.nc(), ny = g.ny(day);
    const int ny2 = int(pmf_next.probs.size());
    if (v_next.size() != size_t(nx) * ny2 * nc)
        throw ValidationError("bellman_backup: v_next shape mismatch");
    v_out.resize(size_t(nx) * ny * nc);
    pol_out.resize(size_t(nx) * ny * nc);

    // M[ix][ic] = E[ V_next(ix, y', c') | c ], factored through the price rows.
    std::vector<double> M(size_t(nx) * nc);
    parallel_for(nx, threads, [&](long ix) {
        std::vector<double> w(size_t(nc), 0.0);
        for (int iy2 = 0; iy2 < ny2; ++iy2) {
            double p = pmf_next.probs[size_t(iy2)];
            if (p == 0) continue;
            const double* vrow = v_next.data() + (size_t(ix) * ny2 + size_t(iy2)) * nc;
            for (int ic = 0; ic < nc; ++ic) w[size_t(ic)] += p * vrow[ic];
        }
        double* mrow = M.data() + size_t(ix) * nc;
        for (int ic = 0; ic < nc; ++ic) {
            const double* pr = s.chain.row(ic);
            double acc = 0;
            for (int ic2 = 0; ic2 < nc; ++ic2) acc += pr[ic2] * w[size_t(ic2)];
            mrow[ic] = acc;
        }
    });

    parallel_for(nx, threads, [&](long ix) {
        const double x = g.x_grid[size_t(ix)];
        struct Act {
            long step;
            double u;
            double fixed; // markup + penalty part of the reward
            const double* mrow;
        };
        std::vector<Act> acts;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = g.y_grids[size_t(day - 1)][size_t(iy)];
            auto [lo, hi] = action_step_bounds(x, y, s.cfg, g.dx);
            acts.clear();
            for (long i = lo; i <= hi; ++i) {
                double u = double(i) * g.dx;
                TransitionOutcome o = apply_action(x, y, u, s.cfg, g);
                long ix2 = std::lround(o.x_next / g.dx);
                double fixed = -s.cfg.s * o.unmet + (u < 0 ? u * s.cfg.c_plus : 0.0);
                acts.push_back({i, u, fixed, M.data() + size_t(ix2) * nc});
            }
            double* vcell = v_out.data() + (size_t(ix) * ny + size_t(iy)) * size_t(nc);
            int8_t* pcell = pol_out.data() + (size_t(ix) * ny + size_t(iy)) * size_t(nc);
            for (int ic = 0; ic < nc; ++ic) {
                const double c = g.c_grid[size_t(ic)];
                double best = -std::numeric_limits<double>::infinity();
                long best_step = 0, best_rank = std::numeric_limits<long>::max();
                for (const Act& a : acts) {
                    double val = a.u * c + a.fixed + a.mrow[ic];
                    long rank = tie_rank(a.step);
                    if (val > best || (val == best && rank < best_rank)) {
                        best = val;
                        best_step = a.step;
                        best_rank = rank;
                    }
                }
                vcell[ic] = best;
                pcell[ic] = int8_t(best_step);
            }
        }
    });
}

namespace {

void solve_year_inplace(const std::vector<double>& v_boundary, const ProblemSetup& s,
                        int threads, ValueTable& V, PolicyTable& P) {
    const int T = s.cfg.T;
    check_action_range(s);
    V.T = T;
    P.T = T;
    P.dx = s.grids.dx;
    V.days.resize(size_t(T));
    P.steps.resize(size_t(T));
    for (int t = T; t >= 1; --t) {
        const std::vector<double>& v_next = (t == T) ? v_boundary : V.days[size_t(t)];
        const NetProductionPmf& pmf_next = s.pmfs[size_t(t % T)];
        bellman_backup(t, v_next, pmf_next, s, threads, V.days[size_t(t - 1)],
                       P.steps[size_t(t - 1)]);
    }
}

} // namespace

YearSolution solve_year(const std::vector<double>& v_boundary, const ProblemSetup& s,
                        int threads) {
    YearSolution out;
    solve_year_inplace(v_boundary, s, threads, out.values, out.policy);
    return out;
}

PeriodicSolution solve_periodic(const ProblemSetup& s, const SolveOptions& opt) {
    if (!(opt.epsilon > 0)) throw ValidationError("solve_periodic: epsilon must be > 0");
    if (opt.max_iters < 1) throw ValidationError("solve_periodic: max_iters must be >= 1");
    const Grids& g = s.grids;
    const size_t day1_size = size_t(g.nx()) * g.ny(1) * g.nc();

    PeriodicSolution ps;
    std::vector<double> boundary(day1_size, opt.boundary_init);
    for (int k = 1; k <= opt.max_iters; ++k) {
        solve_year_inplace(boundary, s, opt.threads, ps.values, ps.policy);
        const std::vector<double>& v0 = ps.values.days[0];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0;
        for (size_t i = 0; i < day1_size; ++i) {
            double d = v0[i] - boundary[i];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            sum += d;
        }
        ps.report.iterations = k;
        ps.report.span = hi - lo;
        ps.report.g = sum / double(day1_size);
        ps.report.span_trace.push_back(ps.report.span);
        boundary = v0;
        if (ps.report.span <= opt.epsilon) {
            ps.report.converged = true;
            break;
        }
    }
    return ps;
}

double extract_action(const PolicyTable& pol, const Grids& grids, const State& st) {
    if (st.day < 1 || st.day > pol.T)
        throw ValidationError("extract_action: day out of range");
    int ix = grids.x_index(st.x);
    int iy = grids.y_index(st.day, st.y_bar);
    int ic = grids.c_index(st.c);
    return double(pol.at(grids, st.day, ix, iy, ic)) * pol.dx;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kPolicyMagic[8] = {'H', '2', 'D', 'P', 'O', 'L', 'v', '1'};
constexpr char kValueMagic[8] = {'H', '2', 'D', 'V', 'A', 'L', 'v', '1'};

struct Header {
    int32_t T = 0, nx = 0, nc = 0;
    double dx = 0, dc = 0, dj = 0, c0 = 0;
};

void write_geometry(std::ofstream& out, const char* magic, const Grids& g) {
    out.write(magic, 8);
    Header h{int32_t(g.days()), int32_t(g.nx()), int32_t(g.nc()),
             g.dx, g.dc, g.dj, g.c_grid.empty() ? 0.0 : g.c_grid[0]};
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    for (int t = 0; t < g.days(); ++t) {
        int32_t ny = int32_t(g.ny(t + 1));
        int32_t y0 = int32_t(g.y0_steps[size_t(t)]);
        out.write(reinterpret_cast<const char*>(&ny), sizeof ny);
        out.write(reinterpret_cast<const char*>(&y0), sizeof y0);
    }
}

Grids read_geometry(std::ifstream& in, const char* magic, const std::string& path,
                    int32_t* T_out) {
    char m[8];
    in.read(m, 8);
    if (!in || std::memcmp(m, magic, 8) != 0)
        throw IoError(path + ": not a " + std::string(magic, 8) + " file");
    Header h;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in || h.T < 1 || h.nx < 1 || h.nc < 1 || h.dx <= 0 || h.dj <= 0)
        throw IoError(path + ": corrupt header");
    Grids g;
    g.dx = h.dx;
    g.dc = h.dc;
    g.dj = h.dj;
    g.x_grid.resize(size_t(h.nx));
    for (int i = 0; i < h.nx; ++i) g.x_grid[size_t(i)] = double(i) * h.dx;
    g.c_grid.resize(size_t(h.nc));
    for (int i = 0; i < h.nc; ++i) g.c_grid[size_t(i)] = h.c0 + double(i) * h.dc;
    g.y_grids.resize(size_t(h.T));
    g.y0_steps.resize(size_t(h.T));
    for (int t = 0; t < h.T; ++t) {
        int32_t ny = 0, y0 = 0;
        in.read(reinterpret_cast<char*>(&ny), sizeof ny);
        in.read(reinterpret_cast<char*>(&y0), sizeof y0);
        if (!in || ny < 1) throw IoError(path + ": corrupt day geometry");
        g.y0_steps[size_t(t)] = y0;
        auto& yt = g.y_grids[size_t(t)];
        yt.resize(size_t(ny));
        for (int i = 0; i < ny; ++i) yt[size_t(i)] = double(y0 + i) * h.dj;
    }
    *T_out = h.T;
    return g;
}

} // namespace

bool grids_compatible(const Grids& a, const Grids& b) {
    if (a.nx() != b.nx() || a.nc() != b.nc() || a.days() != b.days()) return false;
    if (std::abs(a.dx - b.dx) > 1e-12 || std::abs(a.dc - b.dc) > 1e-12 ||
        std::abs(a.dj - b.dj) > 1e-12)
        return false;
    if (!a.c_grid.empty() && std::abs(a.c_grid[0] - b.c_grid[0]) > 1e-9) return false;
    for (int t = 0; t < a.days(); ++t)
        if (a.ny(t + 1) != b.ny(t + 1) || a.y0_steps[size_t(t)] != b.y0_steps[size_t(t)])
            return false;
    return true;
}

void save_policy(const PolicyTable& pol, const Grids& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    write_geometry(out, kPolicyMagic, g);
    for (int t = 0; t < pol.T; ++t) {
        const auto& d = pol.steps[size_t(t)];
        out.write(reinterpret_cast<const char*>(d.data()), std::streamsize(d.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

PolicyTable load_policy(const std::string& path, Grids* grids_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open policy file: " + path);
    int32_t T = 0;
    Grids g = read_geometry(in, kPolicyMagic, path, &T);
    PolicyTable pol;
    pol.T = T;
    pol.dx = g.dx;
    pol.steps.resize(size_t(T));
    for (int t = 0; t < T; ++t) {
        size_t n = size_t(g.nx()) * g.ny(t + 1) * g.nc();
        pol.steps[size_t(t)].resize(n);
        in.read(reinterpret_cast<char*>(pol.steps[size_t(t)].data()), std::streamsize(n));
    }
    if (!in) throw IoError(path + ": truncated policy data");
    if (grids_out) *grids_out = std::move(g);
    return pol;
}

void save_values(const ValueTable& val, const Grids& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    write_geometry(out, kValueMagic, g);
    for (int t = 0; t < val.T; ++t) {
        const auto& d = val.days[size_t(t)];
        out.write(reinterpret_cast<const char*>(d.data()),
                  std::streamsize(d.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed: " + path);
}

ValueTable load_values(const std::string& path, Grids* grids_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open value file: " + path);
    int32_t T = 0;
    Grids g = read_geometry(in, kValueMagic, path, &T);
    ValueTable val;
    val.T = T;
    val.days.resize(size_t(T));
    for (int t = 0; t < T; ++t) {
        size_t n = size_t(g.nx()) * g.ny(t + 1) * g.nc();
        val.days[size_t(t)].resize(n);
        in.read(reinterpret_cast<char*>(val.days[size_t(t)].data()),
                std::streamsize(n * sizeof(double)));
    }
    if (!in) throw IoError(path + ": truncated value data");
    if (grids_out) *grids_out = std::move(g);
    return val;
}

void export_policy_csv(const PolicyTable& pol, const ValueTable& val, const Grids& g,
                       const std::vector<std::pair<int, std::vector<int>>>& slices,
                       const std::string& path) {
    csv::Writer w(path);
    w.row({"day", "x", "y_bar", "c", "u_star", "V"});
    for (const auto& [day, yidx] : slices) {
        if (day < 1 || day > pol.T) throw ValidationError("export_policy_csv: bad day");
        std::vector<int> ys = yidx;
        if (ys.empty())
            for (int iy = 0; iy < g.ny(day); ++iy) ys.push_back(iy);
        for (int ix = 0; ix < g.nx(); ++ix)
            for (int iy : ys) {
                if (iy < 0 || iy >= g.ny(day))
                    throw ValidationError("export_policy_csv: bad y index");
                for (int ic = 0; ic < g.nc(); ++ic) {
                    double u = double(pol.at(g, day, ix, iy, ic)) * pol.dx;
                    w.row({csv::Writer::num(long(day)), csv::Writer::num(g.x_grid[size_t(ix)]),
                           csv::Writer::num(g.y_grids[size_t(day - 1)][size_t(iy)]),
                           csv::Writer::num(g.c_grid[size_t(ic)]), csv::Writer::num(u),
                           csv::Writer::num(val.at(g, day, ix, iy, ic))});
                }
            }
    }
}

} // namespace h2d
