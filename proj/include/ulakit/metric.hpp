#pragma once

// Distances between empirical measures and between Gaussian laws.
//
// Conventions: for p >= 1 W_p carries the 1/p root; for p in (0, 1) no root
// is taken (the cost |x - y|^p is itself a metric). W_0 is half the total
// variation distance, so histogram TV values lie in [0, 1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"
#include "ulakit/linalg.hpp"
#include "ulakit/random.hpp"
#include "ulakit/schedule.hpp"
#include "ulakit/sim.hpp"

namespace ulakit {

enum class Estimator { Sorted1D, Sliced, TVHistogram, GaussianClosedForm, ExactOULaw, DiracMoment };

inline std::string_view estimator_name(Estimator e) noexcept {
    switch (e) {
        case Estimator::Sorted1D: return "sorted1d";
        case Estimator::Sliced: return "sliced";
        case Estimator::TVHistogram: return "tv_histogram";
        case Estimator::GaussianClosedForm: return "gaussian_closed_form";
        case Estimator::ExactOULaw: return "exact_ou_law";
        case Estimator::DiracMoment: return "dirac_moment";
    }
    return "unknown";
}

inline Estimator parse_estimator(std::string_view s) {
    for (auto e : {Estimator::Sorted1D, Estimator::Sliced, Estimator::TVHistogram, Estimator::GaussianClosedForm,
                   Estimator::ExactOULaw, Estimator::DiracMoment}) {
        if (estimator_name(e) == s) return e;
    }
    throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

struct DistanceReport {
    double p = 1.0;
    Estimator estimator = Estimator::Sorted1D;
    double value = 0.0;
    std::optional<double> std_error;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    nlohmann::json meta = nlohmann::json::object();
};

inline constexpr const char* kDistanceCsvHeader = "estimator,p,value,stderr,n_a,n_b,meta";

inline std::string to_csv_row(const DistanceReport& r) {
    std::string s;
    s += estimator_name(r.estimator);
    s += ',' + format_double(r.p);
    s += ',' + format_double(r.value);
    s += ',' + (r.std_error ? format_double(*r.std_error) : std::string());
    s += ',' + std::to_string(r.n_a);
    s += ',' + std::to_string(r.n_b);
    s += ',' + csv_quote(r.meta.dump());
    return s;
}

namespace detail {

inline void require_samples(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.empty() || b.empty()) throw DomainError(std::string(what) + ": empty sample");
}

inline double cost(double x, double y, double p) {
    const double d = std::fabs(x - y);
    if (p == 1.0) return d;
    if (p == 2.0) return d * d;
    return std::pow(d, p);
}

inline double finish(double mean_cost, double p) { return p >= 1.0 ? std::pow(mean_cost, 1.0 / p) : mean_cost; }

/// Mean cost of the monotone coupling of two sorted samples of equal size.
inline double sorted_mean_cost(const Vector& a, const Vector& b, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += cost(a[i], b[i], p);
    return s / static_cast<double>(a.size());
}

/// Integral over u in (0, 1) of c(F_a^-1(u), F_b^-1(u)) for sorted samples of
/// any sizes. This is the optimal cost for convex c.
inline double quantile_mean_cost(const Vector& a, const Vector& b, double p) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    // Breakpoints i/na and j/nb are compared as i*nb vs j*na to stay exact.
    const auto ia = static_cast<std::uint64_t>(a.size());
    const auto ib = static_cast<std::uint64_t>(b.size());
    std::uint64_t i = 0, j = 0;
    double u = 0.0, s = 0.0;
    while (i < ia && j < ib) {
        const std::uint64_t ea = (i + 1) * ib;
        const std::uint64_t eb = (j + 1) * ia;
        const std::uint64_t e = std::min(ea, eb);
        const double next = static_cast<double>(e) / (na * nb);
        s += (next - u) * cost(a[i], b[j], p);
        u = next;
        if (ea == e) ++i;
        if (eb == e) ++j;
    }
    return s;
}

/// Largest number of unmatched points per side for which the p < 1 solver is exact.
inline constexpr std::size_t kNestedExactLimit = 512;

/// Exact optimal matching cost for p in (0, 1) between sorted equal-size samples.
///
/// Mass present in both samples stays in place (|x - y|^p is a metric). For
/// the remainder an optimal matching without crossing arcs exists, so an
/// interval recursion over the merged sequence finds it:
///   f(i, j) = min over k of c(z_i, z_k) + f(i+1, k-1) + f(k+1, j)
/// with z_i, z_k from opposite samples and both sub-intervals balanced.
/// Returns nullopt when the unmatched remainder exceeds kNestedExactLimit.
inline std::optional<double> nested_total_cost(const Vector& a, const Vector& b, double p) {
    std::vector<std::pair<double, int>> z;  // (position, +1 for a / -1 for b)
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i] < b[j])) {
            z.emplace_back(a[i++], 1);
        } else if (i == a.size() || b[j] < a[i]) {
            z.emplace_back(b[j++], -1);
        } else {
            ++i;
            ++j;
        }
    }
    const std::size_t m = z.size();
    if (m == 0) return 0.0;
    if (m / 2 > kNestedExactLimit) return std::nullopt;

    // bal[k] = sum of labels of z_0..z_{k-1}; [i, j] balanced iff bal[j+1] == bal[i].
    std::vector<int> bal(m + 1, 0);
    for (std::size_t k = 0; k < m; ++k) bal[k + 1] = bal[k] + z[k].second;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // f[i * (m + 1) + j] is the cost of the half-open interval [i, j).
    std::vector<double> f((m + 1) * (m + 1), kInf);
    auto at = [&](std::size_t lo, std::size_t hi) -> double& { return f[lo * (m + 1) + hi]; };
    for (std::size_t k = 0; k <= m; ++k) at(k, k) = 0.0;
    for (std::size_t len = 2; len <= m; len += 2) {
        for (std::size_t lo = 0; lo + len <= m; ++lo) {
            const std::size_t hi = lo + len;
            if (bal[hi] != bal[lo]) continue;
            double best = kInf;
            for (std::size_t k = lo + 1; k < hi; k += 2) {
                if (z[k].second == z[lo].second) continue;
                const double inner = at(lo + 1, k);
                if (inner == kInf) continue;
                const double rest = at(k + 1, hi);
                if (rest == kInf) continue;
                best = std::min(best, cost(z[lo].first, z[k].first, p) + inner + rest);
            }
            at(lo, hi) = best;
        }
    }
    return at(0, m);
}

}  // namespace detail

/// Exact empirical W_p between two one-dimensional samples.
///
/// p >= 1: monotone coupling of the quantile functions; unequal sizes are
/// handled exactly by integrating over the merged quantile breakpoints.
/// p < 1: the monotone coupling is not optimal in general, so common points
/// are cancelled and the remainder matched by the interval recursion above.
/// Past that solver's size limit the monotone cost (an upper bound) is
/// returned with meta.exact = false. Unequal sizes with p < 1 are trimmed to
/// the shorter sample, in input order, and flagged in meta.
inline DistanceReport w_p_1d(std::span<const double> a, std::span<const double> b, double p) {
    detail::require_samples(a, b, "w_p_1d");
    if (!(p > 0.0)) throw DomainError("w_p_1d: p must be positive");
    DistanceReport r;
    r.p = p;
    r.estimator = Estimator::Sorted1D;
    r.n_a = a.size();
    r.n_b = b.size();

    if (p >= 1.0) {
        Vector sa(a.begin(), a.end()), sb(b.begin(), b.end());
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        const bool equal = sa.size() == sb.size();
        const double c = equal ? detail::sorted_mean_cost(sa, sb, p) : detail::quantile_mean_cost(sa, sb, p);
        r.value = detail::finish(c, p);
        r.meta = {{"coupling", equal ? "sorted" : "quantile"}, {"exact", true}};
        return r;
    }

    const std::size_t n = std::min(a.size(), b.size());
    Vector sa(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n));
    Vector sb(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const auto total = detail::nested_total_cost(sa, sb, p);
    if (total) {
        r.value = *total / static_cast<double>(n);
        r.meta = {{"coupling", "nested"}, {"exact", true}};
    } else {
        r.value = detail::sorted_mean_cost(sa, sb, p);
        r.meta = {{"coupling", "sorted"}, {"exact", false}};
    }
    if (a.size() != b.size()) {
        r.meta["trimmed_to"] = n;
        r.meta["warning"] = "unequal sample sizes trimmed";
    }
    return r;
}

/// Maximum sample size accepted by w_p_bruteforce.
inline constexpr std::size_t kBruteForceLimit = 8;

/// Minimum over all permutation couplings, same root convention as w_p_1d.
inline double w_p_bruteforce(std::span<const double> a, std::span<const double> b, double p) {
    detail::require_samples(a, b, "w_p_bruteforce");
    if (a.size() != b.size()) throw DimensionError("w_p_bruteforce: samples must have equal size");
    if (a.size() > kBruteForceLimit) throw DomainError("w_p_bruteforce: at most 8 points");
    if (!(p > 0.0)) throw DomainError("w_p_bruteforce: p must be positive");
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += detail::cost(a[i], b[perm[i]], p);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return detail::finish(best / static_cast<double>(a.size()), p);
}

/// Flat row-major view of n x dim samples.
struct SampleView {
    std::span<const double> values;
    std::size_t dim = 1;

    SampleView(std::span<const double> v, std::size_t d) : values(v), dim(d) {}
    SampleView(const SampleBatch& b) : values(b.values), dim(b.dim) {}  // NOLINT(google-explicit-constructor)

    std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
};

inline constexpr std::size_t kDefaultProjections = 64;

/// Average of one-dimensional W_p over random unit directions.
inline DistanceReport sliced_wp(SampleView a, SampleView b, double p, std::size_t n_proj = kDefaultProjections,
                                std::uint64_t seed = 0) {
    if (a.dim != b.dim) throw DimensionError("sliced_wp: samples differ in dimension");
    if (a.dim < 2) throw DomainError("sliced_wp: needs d >= 2; use w_p_1d");
    if (!(p >= 1.0)) throw DomainError("sliced_wp: p must be >= 1");
    if (n_proj == 0) throw DomainError("sliced_wp: need at least one projection");
    detail::require_samples(a.values, b.values, "sliced_wp");
    const std::size_t d = a.dim;
    RandomStream rng(seed, 0, stream_purpose::kProjection);
    Vector u(d), pa(a.rows()), pb(b.rows()), per(n_proj);
    for (std::size_t k = 0; k < n_proj; ++k) {
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (auto& v : u) {
                v = rng.normal();
                n2 += v * v;
            }
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& v : u) v *= inv;
        for (std::size_t i = 0; i < pa.size(); ++i) pa[i] = dot(u, a.values.subspan(i * d, d));
        for (std::size_t i = 0; i < pb.size(); ++i) pb[i] = dot(u, b.values.subspan(i * d, d));
        per[k] = w_p_1d(pa, pb, p).value;
    }
    const double mean = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(n_proj);
    double ss = 0.0;
    for (double v : per) ss += (v - mean) * (v - mean);
    const double sd = n_proj > 1 ? std::sqrt(ss / static_cast<double>(n_proj - 1)) : 0.0;
    DistanceReport r;
    r.p = p;
    r.estimator = Estimator::Sliced;
    r.value = mean;
    r.std_error = sd / std::sqrt(static_cast<double>(n_proj));
    r.n_a = a.rows();
    r.n_b = b.rows();
    r.meta = {{"projections", n_proj}, {"seed", seed}};
    return r;
}

/// Cube-root rule on the smaller sample, clamped to [8, 256].
inline std::size_t default_tv_bins(std::size_t n) {
    const auto b = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9));
    return std::clamp<std::size_t>(b, 8, 256);
}

/// Half the L1 distance between histograms on the pooled bounding box (d <= 2).
/// bins_per_dim = 0 selects default_tv_bins.
inline DistanceReport tv_histogram(SampleView a, SampleView b, std::size_t bins_per_dim = 0) {
    if (a.dim != b.dim) throw DimensionError("tv_histogram: samples differ in dimension");
    if (a.dim == 0 || a.dim > 2) throw DomainError("tv_histogram: supports d = 1 or 2");
    detail::require_samples(a.values, b.values, "tv_histogram");
    const std::size_t d = a.dim;
    const std::size_t na = a.rows(), nb = b.rows();
    const std::size_t bins = bins_per_dim ? bins_per_dim : default_tv_bins(std::min(na, nb));

    double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
    for (auto vals : {a.values, b.values}) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double v = vals[i];
            if (!std::isfinite(v)) throw DomainError("tv_histogram: non-finite sample");
            lo[i % d] = std::min(lo[i % d], v);
            hi[i % d] = std::max(hi[i % d], v);
        }
    }
    const std::size_t cells = d == 1 ? bins : bins * bins;
    auto cell_of = [&](std::span<const double> x) {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < d; ++j) {
            std::size_t c = 0;
            if (hi[j] > lo[j]) {
                const double f = (x[j] - lo[j]) / (hi[j] - lo[j]);
                c = std::min(bins - 1, static_cast<std::size_t>(f * static_cast<double>(bins)));
            }
            idx = idx * bins + c;
        }
        return idx;
    };
    std::vector<std::uint64_t> ca(cells, 0), cb(cells, 0);
    for (std::size_t i = 0; i < na; ++i) ++ca[cell_of(a.values.subspan(i * d, d))];
    for (std::size_t i = 0; i < nb; ++i) ++cb[cell_of(b.values.subspan(i * d, d))];
    double s = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        s += std::fabs(static_cast<double>(ca[c]) / static_cast<double>(na) -
                       static_cast<double>(cb[c]) / static_cast<double>(nb));
    }
    DistanceReport r;
    r.p = 0.0;
    r.estimator = Estimator::TVHistogram;
    r.value = std::clamp(0.5 * s, 0.0, 1.0);
    r.n_a = na;
    r.n_b = nb;
    r.meta = {{"bins_per_dim", bins}};
    return r;
}

/// Mean of |x - point|^p over the sample: W_p^p against a point mass, with
/// stderr from the sample standard deviation.
inline DistanceReport dirac_moment(SampleView a, std::span<const double> point, double p) {
    require_dim(point.size(), a.dim, "dirac_moment point");
    if (!(p > 0.0)) throw DomainError("dirac_moment: p must be positive");
    const std::size_t n = a.rows();
    if (n == 0) throw DomainError("dirac_moment: empty sample");
    Vector c(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = distance(a.values.subspan(i * a.dim, a.dim), point);
        c[i] = p == 2.0 ? r * r : std::pow(r, p);
    }
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    DistanceReport rep;
    rep.p = p;
    rep.estimator = Estimator::DiracMoment;
    rep.value = mean;
    rep.std_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    rep.n_a = n;
    rep.n_b = 1;
    rep.meta = {{"rooted", false}};
    return rep;
}

struct GaussianLaw {
    Vector mean;
    Matrix cov;

    std::size_t dim() const noexcept { return mean.size(); }

    void check(double tol = 1e-10) const {
        if (mean.empty()) throw DimensionError("GaussianLaw: empty mean");
        if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
            throw DimensionError("GaussianLaw: covariance shape does not match mean");
        }
        for (std::size_t i = 0; i < cov.rows(); ++i) {
            if (cov(i, i) < -tol) throw DomainError("GaussianLaw: negative variance");
            for (std::size_t j = 0; j < i; ++j)
                if (std::fabs(cov(i, j) - cov(j, i)) > tol) throw DomainError("GaussianLaw: covariance not symmetric");
        }
    }

    static GaussianLaw scalar(double m, double v) { return {Vector{m}, Matrix{{v}}}; }
};

/// Closed-form W_2 between Gaussians with diagonal covariances.
inline double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
    g1.check();
    g2.check();
    require_dim(g2.dim(), g1.dim(), "w2_gaussian");
    if (!g1.cov.is_diagonal(1e-12) || !g2.cov.is_diagonal(1e-12)) {
        throw DomainError("w2_gaussian: only diagonal covariances are supported");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < g1.dim(); ++j) {
        const double dm = g1.mean[j] - g2.mean[j];
        const double ds = std::sqrt(std::max(g1.cov(j, j), 0.0)) - std::sqrt(std::max(g2.cov(j, j), 0.0));
        s += dm * dm + ds * ds;
    }
    return std::sqrt(s);
}

/// Exact law of the scalar EM chain for dY = -a Y dt + sigma dB after n steps:
///   m_k = (1 - eta_k a) m_{k-1},  v_k = (1 - eta_k a)^2 v_{k-1} + eta_k sigma^2.
/// Requires |1 - eta_k a| <= 1 for every k <= n.
inline GaussianLaw ou_em_law(double a, double sigma, const StepSchedule& sched, double x0, std::size_t n) {
    if (!(a > 0.0)) throw DomainError("ou_em_law: rate must be positive");
    if (!(sigma >= 0.0)) throw DomainError("ou_em_law: sigma must be non-negative");
    double m = x0, v = 0.0;
    const double s2 = sigma * sigma;
    for (std::size_t k = 1; k <= n; ++k) {
        const double eta = sched.eta(k);
        const double c = 1.0 - eta * a;
        if (std::fabs(c) > 1.0) {
            throw DomainError("ou_em_law: unstable step at k = " + std::to_string(k) + " (|1 - eta_k a| = " +
                              format_double(std::fabs(c)) + ")");
        }
        m *= c;
        v = c * c * v + eta * s2;
    }
    return GaussianLaw::scalar(m, v);
}

/// Exact transition law of the scalar OU process started at x0.
inline GaussianLaw ou_sde_law(double a, double sigma, double x0, double t) {
    if (!(a > 0.0)) throw DomainError("ou_sde_law: rate must be positive");
    if (!(t >= 0.0)) throw DomainError("ou_sde_law: t must be non-negative");
    const double stat = sigma * sigma / (2.0 * a);
    return GaussianLaw::scalar(x0 * std::exp(-a * t), stat * -std::expm1(-2.0 * a * t));
}

/// Stationary law N(0, sigma^2 / (2a)).
inline GaussianLaw ou_stationary_law(double a, double sigma) {
    if (!(a > 0.0)) throw DomainError("ou_stationary_law: rate must be positive");
    return GaussianLaw::scalar(0.0, sigma * sigma / (2.0 * a));
}

}  // namespace ulakit
