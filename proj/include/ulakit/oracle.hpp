#pragma once

// Built-in oracle suites: each compares a fast routine with an independent
// slow or analytic reference and reports the worst discrepancy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ulakit/format.hpp"
#include "ulakit/metric.hpp"
#include "ulakit/random.hpp"
#include "ulakit/regression.hpp"
#include "ulakit/schedule.hpp"

namespace ulakit {

struct OracleOutcome {
    std::string name;
    bool pass = false;
    std::size_t checked = 0;
    std::size_t failures = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
};

inline std::string describe(const OracleOutcome& o) {
    return o.name + ": " + (o.pass ? "pass" : "FAIL") + " checked=" + std::to_string(o.checked) +
           " failures=" + std::to_string(o.failures) + " max_error=" + format_double(o.max_error) +
           " tol=" + format_double(o.tolerance);
}

using Wp1dFn = std::function<double(std::span<const double>, std::span<const double>, double)>;

/// Replaceable pieces, so negative controls can inject a broken estimator.
struct OracleHooks {
    Wp1dFn w_p_1d = [](std::span<const double> a, std::span<const double> b, double p) { return ulakit::w_p_1d(a, b, p).value; };
};

namespace detail {

/// All non-decreasing sequences of length n over {lo..hi}.
inline std::vector<Vector> integer_multisets(std::size_t n, int lo, int hi) {
    std::vector<Vector> out;
    Vector cur(n, lo);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int from) {
        if (i == n) {
            out.push_back(cur);
            return;
        }
        for (int v = from; v <= hi; ++v) {
            cur[i] = v;
            rec(i + 1, v);
        }
    };
    rec(0, lo);
    return out;
}

}  // namespace detail

inline constexpr double kWpOracleTol = 1e-12;

/// w_p_1d against permutation brute force on integer multisets in {-3..3}:
/// every pair of size <= 3, plus n_random random pairs of sizes 4..6.
inline OracleOutcome oracle_wp1d(const OracleHooks& hooks = {}, std::size_t n_random = 10000,
                                 std::uint64_t seed = 1) {
    OracleOutcome o{"wp1d_vs_bruteforce", true, 0, 0, 0.0, kWpOracleTol};
    constexpr double ps[] = {0.5, 1.0, 2.0};
    auto check = [&](const Vector& a, const Vector& b) {
        for (double p : ps) {
            const double got = hooks.w_p_1d(a, b, p);
            const double want = w_p_bruteforce(a, b, p);
            const double err = std::fabs(got - want);
            ++o.checked;
            o.max_error = std::max(o.max_error, std::isfinite(err) ? err : INFINITY);
            if (!(err <= kWpOracleTol)) ++o.failures;
        }
    };
    for (std::size_t n = 1; n <= 3; ++n) {
        const auto sets = detail::integer_multisets(n, -3, 3);
        for (const auto& a : sets)
            for (const auto& b : sets) check(a, b);
    }
    RandomStream rng(seed, 0, stream_purpose::kOracle);
    for (std::size_t t = 0; t < n_random; ++t) {
        const std::size_t n = 4 + rng.next_u64() % 3;
        Vector a(n), b(n);
        for (auto& v : a) v = static_cast<double>(static_cast<int>(rng.next_u64() % 7) - 3);
        for (auto& v : b) v = static_cast<double>(static_cast<int>(rng.next_u64() % 7) - 3);
        check(a, b);
    }
    o.pass = o.failures == 0;
    return o;
}

inline constexpr double kGradientOracleTol = 1e-6;

/// bridge_loss_grad against central differences (h = 1e-6) on random
/// (data, lambda, gamma, beta) with every |beta_j| > 0.1.
/// Error is |fd - grad|_2 / max(|grad|_2, 1).
inline OracleOutcome oracle_gradient(std::size_t n_tuples = 1000, std::uint64_t seed = 2) {
    OracleOutcome o{"gradient_vs_finite_difference", true, 0, 0, 0.0, kGradientOracleTol};
    RandomStream rng(seed, 1, stream_purpose::kOracle);
    constexpr double h = 1e-6;
    for (std::size_t t = 0; t < n_tuples; ++t) {
        const std::size_t d = 1 + rng.next_u64() % 4;
        const std::size_t n = rng.next_u64() % 11;
        RegressionData data;
        for (std::size_t i = 0; i < n; ++i) {
            Vector x(d);
            for (auto& v : x) v = rng.normal();
            data.x.push_back(std::move(x));
            data.y.push_back(rng.normal());
        }
        const double lambda = 3.0 * rng.uniform();
        const double gamma = 1.05 + 0.95 * rng.uniform_pos();
        Vector beta(d);
        for (auto& v : beta) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 1e-3 + 2.0 * rng.uniform());
        const Vector g = bridge_loss_grad(data, lambda, gamma, beta);
        double diff2 = 0.0, norm2g = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            Vector up = beta, dn = beta;
            up[j] += h;
            dn[j] -= h;
            const double fd = (bridge_loss(data, lambda, gamma, up) - bridge_loss(data, lambda, gamma, dn)) / (2.0 * h);
            diff2 += (fd - g[j]) * (fd - g[j]);
            norm2g += g[j] * g[j];
        }
        const double err = std::sqrt(diff2) / std::max(std::sqrt(norm2g), 1.0);
        ++o.checked;
        o.max_error = std::max(o.max_error, err);
        if (!(err < kGradientOracleTol)) ++o.failures;
    }
    o.pass = o.failures == 0;
    return o;
}

inline constexpr double kOuLimitTol = 1e-3;

/// Exact OU chain law (a = 1, sigma = sqrt 2, eta_k = 2/k) at n = 10^6
/// against the stationary variance sigma^2 / (2a) = 1.
inline OracleOutcome oracle_ou_limit() {
    OracleOutcome o{"ou_em_law_stationary_limit", true, 1, 0, 0.0, kOuLimitTol};
    const auto law = ou_em_law(1.0, std::sqrt(2.0), StepSchedule::polynomial(2.0, 1.0), 1.0, 1000000);
    o.max_error = std::max(std::fabs(law.cov(0, 0) - 1.0), std::fabs(law.mean[0]));
    o.failures = o.max_error <= kOuLimitTol ? 0 : 1;
    o.pass = o.failures == 0;
    return o;
}

inline std::vector<OracleOutcome> run_oracles(const OracleHooks& hooks = {}) {
    return {oracle_wp1d(hooks), oracle_gradient(), oracle_ou_limit()};
}

}  // namespace ulakit
