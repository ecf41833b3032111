#pragma once

// Numerical probes for the drift assumptions. A probe samples pairs (x, y) in
// a ball and reports the constants the sampled pairs are consistent with. It
// is a report, not a certificate: suprema over R^d cannot be checked by
// sampling.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ulakit/model.hpp"
#include "ulakit/random.hpp"

namespace ulakit {

/// Log-spaced candidate grid shared by the dissipation probe.
struct ProbeGrid {
    static constexpr std::size_t kSize = 512;
    static constexpr double kLo = 1e-6;
    static constexpr double kHi = 1e6;

    static double value(std::size_t i) noexcept {
        return kLo * std::pow(kHi / kLo, static_cast<double>(i) / static_cast<double>(kSize - 1));
    }

    /// Ratio between neighbouring candidates.
    static double resolution() noexcept { return std::pow(kHi / kLo, 1.0 / static_cast<double>(kSize - 1)); }
};

struct DissipationProbe {
    double k1_hat = 0.0;
    double k2_hat = 0.0;
    bool feasible = false;  // false if no grid pair covers the sampled pairs
    Vector worst_x;
    Vector worst_y;
    std::size_t n_pairs = 0;
};

namespace detail {

/// Uniform point in the d-ball of radius r.
inline void uniform_in_ball(RandomStream& rng, double radius, std::span<double> out) {
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (auto& v : out) {
            v = rng.normal();
            n2 += v * v;
        }
    } while (n2 == 0.0);
    const double scale =
        radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(out.size())) / std::sqrt(n2);
    for (auto& v : out) v *= scale;
}

struct PairSample {
    std::vector<Vector> xs;
    std::vector<Vector> ys;
};

inline PairSample sample_pairs(std::size_t dim, std::size_t n_pairs, double radius, std::uint64_t seed) {
    RandomStream rng(seed, 0, stream_purpose::kProbe);
    PairSample s;
    s.xs.reserve(n_pairs);
    s.ys.reserve(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        Vector x(dim), y(dim);
        uniform_in_ball(rng, radius, x);
        uniform_in_ball(rng, radius, y);
        s.xs.push_back(std::move(x));
        s.ys.push_back(std::move(y));
    }
    return s;
}

}  // namespace detail

/// Partial-dissipation probe for <b(x) - b(y), x - y> <= K1 - K2 |x - y|^2.
///
/// K1 candidates are {0} plus the log grid; K2 candidates are the log grid.
/// The report takes the smallest feasible K1, then the largest K2 that still
/// works with it. For -A x with A >= a I this gives K1 = 0, K2 ~ a.
/// Time-dependent drifts are probed at t = 0.
inline DissipationProbe probe_partial_dissipation(const ModelSpec& m, std::size_t n_pairs, double radius,
                                                  std::uint64_t seed) {
    m.check();
    if (n_pairs == 0) throw DomainError("probe_partial_dissipation: need at least one pair");
    if (!(radius > 0.0)) throw DomainError("probe_partial_dissipation: radius must be positive");

    const auto pairs = detail::sample_pairs(m.dim, n_pairs, radius, seed);
    std::vector<double> inner(n_pairs), sq(n_pairs);
    Vector bx(m.dim), by(m.dim), diff(m.dim);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        drift_into(m, 0.0, pairs.xs[i], bx);
        drift_into(m, 0.0, pairs.ys[i], by);
        double s = 0.0;
        double r2 = 0.0;
        for (std::size_t j = 0; j < m.dim; ++j) {
            const double dx = pairs.xs[i][j] - pairs.ys[i][j];
            s += (bx[j] - by[j]) * dx;
            r2 += dx * dx;
        }
        inner[i] = s;
        sq[i] = r2;
    }

    auto required_k1 = [&](double k2, std::size_t* argmax) {
        double worst = -INFINITY;
        for (std::size_t i = 0; i < n_pairs; ++i) {
            const double v = inner[i] + k2 * sq[i];
            if (v > worst) {
                worst = v;
                if (argmax) *argmax = i;
            }
        }
        return worst;
    };
    // Smallest K1 candidate >= v, or +inf when v exceeds the grid.
    auto snap_k1 = [](double v) -> double {
        if (v <= 0.0) return 0.0;
        for (std::size_t i = 0; i < ProbeGrid::kSize; ++i) {
            const double g = ProbeGrid::value(i);
            if (g >= v) return g;
        }
        return INFINITY;
    };

    DissipationProbe rep;
    rep.n_pairs = n_pairs;
    const double k1_min = snap_k1(required_k1(ProbeGrid::value(0), nullptr));
    if (!std::isfinite(k1_min)) return rep;

    // required_k1 is non-decreasing in K2, so feasibility is monotone.
    std::size_t lo = 0;
    std::size_t hi = ProbeGrid::kSize - 1;
    if (snap_k1(required_k1(ProbeGrid::value(hi), nullptr)) <= k1_min) {
        lo = hi;
    } else {
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (snap_k1(required_k1(ProbeGrid::value(mid), nullptr)) <= k1_min) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    std::size_t worst = 0;
    rep.k2_hat = ProbeGrid::value(lo);
    required_k1(rep.k2_hat, &worst);
    rep.k1_hat = k1_min;
    rep.feasible = true;
    rep.worst_x = pairs.xs[worst];
    rep.worst_y = pairs.ys[worst];
    return rep;
}

/// max over sampled pairs of |b(x) - b(y)| / (|x - y| + |x - y|^alpha).
inline double probe_holder_modulus(const ModelSpec& m, std::size_t n_pairs, double radius, double alpha,
                                   std::uint64_t seed) {
    m.check();
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("probe_holder_modulus: alpha must lie in (0, 1]");
    const auto pairs = detail::sample_pairs(m.dim, n_pairs, radius, seed);
    Vector bx(m.dim), by(m.dim);
    double best = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double r = distance(pairs.xs[i], pairs.ys[i]);
        if (r == 0.0) continue;
        drift_into(m, 0.0, pairs.xs[i], bx);
        drift_into(m, 0.0, pairs.ys[i], by);
        const double num = distance(bx, by);
        best = std::max(best, num / (r + std::pow(r, alpha)));
    }
    return best;
}

}  // namespace ulakit
