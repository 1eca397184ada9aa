#include "h2dispatch/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <nlohmann/json.hpp>

#include "h2dispatch/errors.hpp"
#include "h2dispatch/json_util.hpp"

namespace h2d {

using jsonutil::get_int;
using jsonutil::get_num;
using jsonutil::get_str;
using jsonutil::require_keys;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

// ---------------------------------------------------------------------------
// AR(1) prices

bool Ar1Params::stationary() const { return std::abs(theta) < 1.0 && sigma_c >= 0.0; }

std::string to_string(SeasonalVariant v) {
    switch (v) {
        case SeasonalVariant::raw: return "raw";
        case SeasonalVariant::monthly: return "monthly";
        case SeasonalVariant::monthly_weekday: return "monthly_weekday";
    }
    return "raw";
}

SeasonalVariant seasonal_variant_from_string(const std::string& s) {
    if (s == "raw") return SeasonalVariant::raw;
    if (s == "monthly") return SeasonalVariant::monthly;
    if (s == "monthly_weekday") return SeasonalVariant::monthly_weekday;
    throw ValidationError("seasonality variant: unknown '" + s + "'");
}

double PriceSeasonalityModel::effect(int month, int weekday) const {
    double e = 0;
    if (variant != SeasonalVariant::raw && month >= 2)
        e += month_effects.at(size_t(month - 2));
    if (variant == SeasonalVariant::monthly_weekday && weekday >= 2)
        e += weekday_effects.at(size_t(weekday - 2));
    return e;
}

Ar1FitResult fit_ar1(const std::vector<double>& series, const std::vector<CivilDate>& dates,
                     SeasonalVariant variant) {
    const size_t n = series.size();
    if (n < 30) throw ValidationError("fit_ar1: need at least 30 observations");
    if (variant != SeasonalVariant::raw && dates.size() != n)
        throw ValidationError("fit_ar1: seasonal variants need one date per observation");

    Ar1FitResult res;
    res.seasonality.variant = variant;

    // Seasonal effects by dummy regression (reference: January, Monday).
    std::vector<double> effect(n, 0.0);
    if (variant != SeasonalVariant::raw) {
        const int nw = variant == SeasonalVariant::monthly_weekday ? 6 : 0;
        const int k = 1 + 11 + nw;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(long(n), k);
        Eigen::VectorXd y = Eigen::VectorXd::Zero(long(n));
        for (size_t i = 0; i < n; ++i) {
            A(long(i), 0) = 1.0;
            int mo = dates[i].month;
            if (mo >= 2) A(long(i), mo - 1) = 1.0; // columns 1..11 = Feb..Dec
            if (nw) {
                int wd = weekday_iso(dates[i]);
                if (wd >= 2) A(long(i), 11 + wd - 1) = 1.0; // columns 12..17 = Tue..Sun
            }
            y(long(i)) = series[i];
        }
        Eigen::VectorXd beta = A.colPivHouseholderQr().solve(y);
        res.seasonality.month_effects.assign(11, 0.0);
        for (int m = 0; m < 11; ++m) res.seasonality.month_effects[size_t(m)] = beta(1 + m);
        if (nw) {
            res.seasonality.weekday_effects.assign(6, 0.0);
            for (int w = 0; w < 6; ++w) res.seasonality.weekday_effects[size_t(w)] = beta(12 + w);
        }
        for (size_t i = 0; i < n; ++i)
            effect[i] = res.seasonality.effect(dates[i].month,
                                               nw ? weekday_iso(dates[i]) : 1);
    }

    // OLS of z_t on z_{t-1}, z = series minus seasonal effect.
    std::vector<double> z(n);
    for (size_t i = 0; i < n; ++i) z[i] = series[i] - effect[i];
    const size_t np = n - 1;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 1; i < n; ++i) {
        sx += z[i - 1];
        sy += z[i];
        sxx += z[i - 1] * z[i - 1];
        sxy += z[i - 1] * z[i];
    }
    double den = double(np) * sxx - sx * sx;
    if (std::abs(den) <= 1e-12 * std::max(1.0, double(np) * sxx)) {
        // No lag variance (constant series): the lag carries no information,
        // so the fit collapses to theta = 0 around the sample mean.
        res.params.theta = 0.0;
        res.params.phi = sy / double(np);
    } else {
        res.params.theta = (double(np) * sxy - sx * sy) / den;
        res.params.phi = (sy - res.params.theta * sx) / double(np);
    }

    double ssr = 0;
    for (size_t i = 1; i < n; ++i) {
        double e = z[i] - res.params.phi - res.params.theta * z[i - 1];
        ssr += e * e;
    }
    res.params.sigma_c = np > 2 ? std::sqrt(ssr / double(np - 2)) : 0.0;

    // One-step prediction error on the raw series, with the AR term applied to
    // the raw lag and the seasonal effect added back on top.
    double ssp = 0;
    for (size_t i = 1; i < n; ++i) {
        double pred = res.params.phi + res.params.theta * series[i - 1] + effect[i];
        double e = series[i] - pred;
        ssp += e * e;
    }
    res.std_error = std::sqrt(ssp / double(np));
    res.n_obs = int(n);
    return res;
}

std::vector<double> PriceChain::stationary() const {
    const int m = n();
    std::vector<double> pi(size_t(m), 1.0 / m);
    std::vector<double> nxt(size_t(m), 0.0);
    for (int it = 0; it < 200000; ++it) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const double* r = row(i);
            double w = pi[size_t(i)];
            if (w == 0) continue;
            for (int j = 0; j < m; ++j) nxt[size_t(j)] += w * r[j];
        }
        double diff = 0;
        for (int j = 0; j < m; ++j) diff = std::max(diff, std::abs(nxt[size_t(j)] - pi[size_t(j)]));
        pi.swap(nxt);
        if (diff < 1e-14) break;
    }
    return pi;
}

double PriceChain::stationary_mean() const {
    auto pi = stationary();
    double mu = 0;
    for (int i = 0; i < n(); ++i) mu += pi[size_t(i)] * grid[size_t(i)];
    return mu;
}

double PriceChain::lag1_autocorr() const {
    auto pi = stationary();
    const int m = n();
    double mu = 0;
    for (int i = 0; i < m; ++i) mu += pi[size_t(i)] * grid[size_t(i)];
    double var = 0, cov = 0;
    for (int i = 0; i < m; ++i) {
        double gi = grid[size_t(i)] - mu;
        var += pi[size_t(i)] * gi * gi;
        const double* r = row(i);
        double e1 = 0;
        for (int j = 0; j < m; ++j) e1 += r[j] * (grid[size_t(j)] - mu);
        cov += pi[size_t(i)] * gi * e1;
    }
    return var > 0 ? cov / var : 0.0;
}

PriceChain discretize_ar1(const Ar1Params& p, const std::vector<double>& c_grid) {
    if (c_grid.empty()) throw ValidationError("discretize_ar1: empty price grid");
    PriceChain ch;
    ch.grid = c_grid;
    const int m = int(c_grid.size());
    ch.trans.assign(size_t(m) * m, 0.0);
    const double dc = m > 1 ? c_grid[1] - c_grid[0] : 1.0;
    for (int i = 0; i < m; ++i) {
        double mu = p.phi + p.theta * c_grid[size_t(i)];
        double* r = ch.trans.data() + size_t(i) * m;
        if (p.sigma_c <= 0 || m == 1) {
            long j = std::lround((mu - c_grid[0]) / dc);
            j = std::clamp(j, 0L, long(m) - 1);
            r[j] = 1.0;
            continue;
        }
        double prev = 0.0; // CDF at the lower edge of cell j
        for (int j = 0; j < m; ++j) {
            double hi = j == m - 1
                            ? 1.0
                            : normal_cdf((c_grid[size_t(j)] + dc / 2 - mu) / p.sigma_c);
            r[j] = hi - prev;
            prev = hi;
        }
        // Guard tiny negative round-off and renormalize exactly.
        double sum = 0;
        for (int j = 0; j < m; ++j) {
            if (r[j] < 0) r[j] = 0;
            sum += r[j];
        }
        for (int j = 0; j < m; ++j) r[j] /= sum;
    }
    return ch;
}

// ---------------------------------------------------------------------------
// Weekly beta production

WeeklyBetaFit fit_weekly_beta(const std::array<std::vector<double>, 52>& obs,
                              const std::vector<double>* theoretical_scale) {
    if (theoretical_scale && theoretical_scale->size() != 52)
        throw ValidationError("fit_weekly_beta: theoretical_scale must have 52 entries");
    WeeklyBetaFit fit;
    fit.betas.resize(52);
    for (int w = 0; w < 52; ++w) {
        const auto& v = obs[size_t(w)];
        if (v.size() < 10)
            throw ValidationError("fit_weekly_beta: week " + std::to_string(w + 1) +
                                  " has fewer than 10 observations");
        for (double x : v)
            if (x < 0)
                throw ValidationError("fit_weekly_beta: negative production in week " +
                                      std::to_string(w + 1));
        double mx = *std::max_element(v.begin(), v.end());
        double scale = theoretical_scale ? std::max((*theoretical_scale)[size_t(w)], mx) : mx;
        WeeklyBeta wb;
        wb.week = w + 1;
        wb.scale = scale;
        bool ok = scale > 0;
        double mean = 0, var = 0;
        if (ok) {
            for (double x : v) mean += x / scale;
            mean /= double(v.size());
            for (double x : v) {
                double d = x / scale - mean;
                var += d * d;
            }
            var /= double(v.size() - 1);
            // Rounding can leave ~1e-32 variance on constant data, and at the
            // other extreme two-point data drives the matched shapes to zero;
            // both are degenerate, not fittable.
            ok = mean > 0 && mean < 1 && var > 1e-10 &&
                 var < mean * (1 - mean) - 1e-10;
        }
        double k = ok ? mean * (1 - mean) / var - 1.0 : 0.0;
        if (ok && mean * k >= 1e-6 && (1 - mean) * k >= 1e-6) {
            wb.a = mean * k;
            wb.b = (1 - mean) * k;
        } else {
            wb.a = wb.b = 1.0;
            if (scale <= 0) wb.scale = 1.0;
            fit.fallback_weeks.push_back(w + 1);
        }
        fit.betas[size_t(w)] = wb;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Demand

double DemandModel::mu(int day) const {
    double base = day <= split_day ? seg1_intercept + seg1_slope * day
                                   : seg2_intercept + seg2_slope * day;
    return base * households_scale;
}

DemandModel fit_demand(const std::vector<double>& daily) {
    const long n = long(daily.size());
    if (n < 60)
        throw ValidationError("fit_demand: need at least 60 daily observations");

    // Prefix sums over t = 1..n for O(1) per-segment OLS.
    std::vector<double> st(size_t(n) + 1, 0), stt(size_t(n) + 1, 0), sy(size_t(n) + 1, 0),
        syy(size_t(n) + 1, 0), sty(size_t(n) + 1, 0);
    for (long t = 1; t <= n; ++t) {
        double y = daily[size_t(t - 1)];
        st[size_t(t)] = st[size_t(t - 1)] + double(t);
        stt[size_t(t)] = stt[size_t(t - 1)] + double(t) * double(t);
        sy[size_t(t)] = sy[size_t(t - 1)] + y;
        syy[size_t(t)] = syy[size_t(t - 1)] + y * y;
        sty[size_t(t)] = sty[size_t(t - 1)] + double(t) * y;
    }
    struct Seg {
        double a, b, rse;
    };
    auto fit_range = [&](long lo, long hi) -> Seg { // inclusive day range
        double cnt = double(hi - lo + 1);
        double Sx = st[size_t(hi)] - st[size_t(lo - 1)];
        double Sxx = stt[size_t(hi)] - stt[size_t(lo - 1)];
        double Sy = sy[size_t(hi)] - sy[size_t(lo - 1)];
        double Syy = syy[size_t(hi)] - syy[size_t(lo - 1)];
        double Sxy = sty[size_t(hi)] - sty[size_t(lo - 1)];
        double den = cnt * Sxx - Sx * Sx;
        double b = den != 0 ? (cnt * Sxy - Sx * Sy) / den : 0.0;
        double a = (Sy - b * Sx) / cnt;
        double ssr = Syy - a * Sy - b * Sxy;
        if (ssr < 0) ssr = 0;
        return {a, b, std::sqrt(ssr / (cnt - 2))};
    };

    DemandModel best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (long split = 30; split <= n - 30; ++split) {
        Seg s1 = fit_range(1, split);
        Seg s2 = fit_range(split + 1, n);
        double obj = s1.rse + s2.rse;
        if (obj < best_obj) {
            best_obj = obj;
            best.split_day = int(split);
            best.seg1_intercept = s1.a;
            best.seg1_slope = s1.b;
            best.seg2_intercept = s2.a;
            best.seg2_slope = s2.b;
            best.sigma_d = std::max(s1.rse, s2.rse);
        }
    }
    best.households_scale = 1.0;
    return best;
}

// ---------------------------------------------------------------------------
// Net production pmf

double NetProductionPmf::mean() const {
    double m = 0;
    for (size_t i = 0; i < support.size(); ++i) m += support[i] * probs[i];
    return m;
}

FinePmf production_fine_pmf(double a, double b, double scale, double h) {
    if (!(h > 0)) throw ValidationError("production_fine_pmf: h must be > 0");
    FinePmf f;
    f.h = h;
    if (scale <= 0) {
        f.k0 = 0;
        f.p = {1.0};
        return f;
    }
    if (!(a > 0 && b > 0)) throw ValidationError("production_fine_pmf: beta shapes must be > 0");
    long ktop = long(std::ceil(scale / h - 0.5));
    if (ktop < 0) ktop = 0;
    f.k0 = 0;
    f.p.assign(size_t(ktop) + 1, 0.0);
    double prev = 0.0;
    for (long k = 0; k <= ktop; ++k) {
        double cdf;
        if (k == ktop) {
            cdf = 1.0;
        } else {
            double x = (double(k) + 0.5) * h / scale;
            cdf = boost::math::ibeta(a, b, std::clamp(x, 0.0, 1.0));
        }
        f.p[size_t(k)] = std::max(0.0, cdf - prev);
        prev = cdf;
    }
    return f;
}

FinePmf demand_fine_pmf(double mu, double sigma, double h) {
    if (!(h > 0)) throw ValidationError("demand_fine_pmf: h must be > 0");
    if (sigma < 0) throw ValidationError("demand_fine_pmf: sigma must be >= 0");
    FinePmf f;
    f.h = h;
    if (sigma == 0) {
        f.k0 = std::max(0L, std::lround(mu / h));
        f.p = {1.0};
        return f;
    }
    long klo = std::max(0L, long(std::floor((mu - 8 * sigma) / h)));
    long khi = std::max(klo, long(std::ceil((mu + 8 * sigma) / h)));
    f.k0 = klo;
    f.p.assign(size_t(khi - klo) + 1, 0.0);
    const double z0 = normal_cdf((0.0 - mu) / sigma);
    const double zn = 1.0 - z0; // truncation mass on [0, inf)
    if (zn <= 0) {              // demand model entirely below zero: all mass at 0
        f.p.assign(1, 1.0);
        f.k0 = 0;
        return f;
    }
    double prev = z0; // CDF at the lower truncation edge
    for (long k = klo; k <= khi; ++k) {
        double cdf = k == khi ? 1.0
                              : normal_cdf(((double(k) + 0.5) * h - mu) / sigma);
        if (cdf < prev) cdf = prev;
        f.p[size_t(k - klo)] = (cdf - prev) / zn;
        prev = cdf;
    }
    return f;
}

NetProductionPmf bin_difference_pmf(int day, const FinePmf& production, const FinePmf& demand,
                                    const std::vector<double>& y_grid) {
    if (y_grid.empty()) throw ValidationError("bin_difference_pmf: empty y grid");
    if (std::abs(production.h - demand.h) > 1e-12)
        throw ValidationError("bin_difference_pmf: mismatched fine steps");
    const double h = production.h;
    const long klo = production.k0 - (demand.k0 + long(demand.p.size()) - 1);
    const long khi = production.k0 + long(production.p.size()) - 1 - demand.k0;
    std::vector<double> conv(size_t(khi - klo) + 1, 0.0);
    for (size_t iy = 0; iy < production.p.size(); ++iy) {
        double py = production.p[iy];
        if (py == 0) continue;
        long base = production.k0 + long(iy) - demand.k0;
        for (size_t id = 0; id < demand.p.size(); ++id)
            conv[size_t(base - long(id) - klo)] += py * demand.p[id];
    }

    NetProductionPmf out;
    out.day = day;
    out.support = y_grid;
    out.probs.assign(y_grid.size(), 0.0);
    const double step = y_grid.size() > 1 ? y_grid[1] - y_grid[0] : 1.0;
    const long last = long(y_grid.size()) - 1;
    for (size_t k = 0; k < conv.size(); ++k) {
        if (conv[k] == 0) continue;
        double v = double(klo + long(k)) * h;
        long i = std::lround((v - y_grid[0]) / step);
        i = std::clamp(i, 0L, last);
        out.probs[size_t(i)] += conv[k];
    }
    double sum = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6)
        throw ValidationError("bin_difference_pmf: pmf mass lost (" + std::to_string(sum) + ")");
    for (auto& p : out.probs) p /= sum;
    return out;
}

NetProductionPmf net_production_pmf(int day, const std::vector<WeeklyBeta>& betas,
                                    double w_scale, const DemandModel& demand,
                                    const std::vector<double>& y_grid, double dj) {
    if (betas.size() != 52)
        throw ValidationError("net_production_pmf: need 52 weekly beta entries");
    const WeeklyBeta& wb = betas[size_t(week_of_day(day) - 1)];
    const double h = dj / 10.0;
    FinePmf prod = production_fine_pmf(wb.a, wb.b, wb.scale * w_scale, h);
    FinePmf dem = demand_fine_pmf(demand.mu(day), demand.sigma(), h);
    return bin_difference_pmf(day, prod, dem, y_grid);
}

// ---------------------------------------------------------------------------
// Sampling

DayDraw sample_day(int day, const std::vector<WeeklyBeta>& betas, double w_scale,
                   const DemandModel& demand, const PriceChain& chain, int prev_c_index,
                   const std::vector<double>& y_grid, std::mt19937_64& rng) {
    if (betas.size() != 52)
        throw ValidationError("sample_day: need 52 weekly beta entries");
    const WeeklyBeta& wb = betas[size_t(week_of_day(day) - 1)];

    std::gamma_distribution<double> ga(wb.a, 1.0), gb(wb.b, 1.0);
    double x = ga(rng), y = gb(rng);
    double frac = x + y > 0 ? x / (x + y) : 0.0;
    double prod = wb.scale * w_scale * frac;

    double mu = demand.mu(day), sd = demand.sigma();
    double dem = mu;
    if (sd > 0) {
        std::normal_distribution<double> nd(mu, sd);
        do {
            dem = nd(rng);
        } while (dem < 0);
    } else if (dem < 0) {
        dem = 0;
    }

    DayDraw out;
    const double step = y_grid.size() > 1 ? y_grid[1] - y_grid[0] : 1.0;
    long iy = std::lround((prod - dem - y_grid[0]) / step);
    iy = std::clamp(iy, 0L, long(y_grid.size()) - 1);
    out.y_index = int(iy);
    out.y_bar = y_grid[size_t(iy)];

    std::uniform_real_distribution<double> un(0.0, 1.0);
    double u = un(rng);
    const double* r = chain.row(prev_c_index);
    double cum = 0;
    int ic = chain.n() - 1;
    for (int j = 0; j < chain.n(); ++j) {
        cum += r[j];
        if (u <= cum) {
            ic = j;
            break;
        }
    }
    out.c_index = ic;
    out.c = chain.grid[size_t(ic)];
    return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Ar1Params& p) {
    j = nlohmann::json{{"phi", p.phi}, {"theta", p.theta}, {"sigma_c", p.sigma_c}};
}

void from_json(const nlohmann::json& j, Ar1Params& p) {
    require_keys(j, {"phi", "theta", "sigma_c"}, "Ar1Params");
    p.phi = get_num(j, "phi", "Ar1Params");
    p.theta = get_num(j, "theta", "Ar1Params");
    p.sigma_c = get_num(j, "sigma_c", "Ar1Params");
    if (p.sigma_c < 0) throw ValidationError("Ar1Params: sigma_c must be >= 0");
}

void to_json(nlohmann::json& j, const PriceSeasonalityModel& m) {
    j = nlohmann::json{{"variant", to_string(m.variant)},
                       {"month_effects", m.month_effects},
                       {"weekday_effects", m.weekday_effects}};
}

void from_json(const nlohmann::json& j, PriceSeasonalityModel& m) {
    require_keys(j, {"variant", "month_effects", "weekday_effects"}, "PriceSeasonalityModel");
    m.variant = seasonal_variant_from_string(get_str(j, "variant", "PriceSeasonalityModel"));
    m.month_effects = j.value("month_effects", std::vector<double>{});
    m.weekday_effects = j.value("weekday_effects", std::vector<double>{});
    if (m.variant != SeasonalVariant::raw && m.month_effects.size() != 11)
        throw ValidationError("PriceSeasonalityModel: month_effects must have 11 entries");
    if (m.variant == SeasonalVariant::monthly_weekday && m.weekday_effects.size() != 6)
        throw ValidationError("PriceSeasonalityModel: weekday_effects must have 6 entries");
}

void to_json(nlohmann::json& j, const WeeklyBeta& w) {
    j = nlohmann::json{{"week", w.week}, {"a", w.a}, {"b", w.b}, {"scale", w.scale}};
}

void from_json(const nlohmann::json& j, WeeklyBeta& w) {
    require_keys(j, {"week", "a", "b", "scale"}, "WeeklyBeta");
    w.week = get_int(j, "week", "WeeklyBeta");
    w.a = get_num(j, "a", "WeeklyBeta");
    w.b = get_num(j, "b", "WeeklyBeta");
    w.scale = get_num(j, "scale", "WeeklyBeta");
    if (w.week < 1 || w.week > 52) throw ValidationError("WeeklyBeta: week must be 1..52");
    if (!(w.a > 0 && w.b > 0)) throw ValidationError("WeeklyBeta: shapes must be > 0");
    if (w.scale < 0) throw ValidationError("WeeklyBeta: scale must be >= 0");
}

void to_json(nlohmann::json& j, const DemandModel& d) {
    j = nlohmann::json{{"split_day", d.split_day},
                       {"seg1", {{"intercept", d.seg1_intercept}, {"slope", d.seg1_slope}}},
                       {"seg2", {{"intercept", d.seg2_intercept}, {"slope", d.seg2_slope}}},
                       {"sigma_d", d.sigma_d},
                       {"households_scale", d.households_scale}};
}

void from_json(const nlohmann::json& j, DemandModel& d) {
    require_keys(j, {"split_day", "seg1", "seg2", "sigma_d", "households_scale"}, "DemandModel");
    d.split_day = get_int(j, "split_day", "DemandModel");
    require_keys(j.at("seg1"), {"intercept", "slope"}, "DemandModel.seg1");
    require_keys(j.at("seg2"), {"intercept", "slope"}, "DemandModel.seg2");
    d.seg1_intercept = get_num(j.at("seg1"), "intercept", "DemandModel.seg1");
    d.seg1_slope = get_num(j.at("seg1"), "slope", "DemandModel.seg1");
    d.seg2_intercept = get_num(j.at("seg2"), "intercept", "DemandModel.seg2");
    d.seg2_slope = get_num(j.at("seg2"), "slope", "DemandModel.seg2");
    d.sigma_d = get_num(j, "sigma_d", "DemandModel");
    d.households_scale = get_num(j, "households_scale", "DemandModel");
    if (d.split_day < 1) throw ValidationError("DemandModel: split_day must be >= 1");
    if (d.sigma_d < 0) throw ValidationError("DemandModel: sigma_d must be >= 0");
    if (!(d.households_scale > 0))
        throw ValidationError("DemandModel: households_scale must be > 0");
}

} // namespace h2d
