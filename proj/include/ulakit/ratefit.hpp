#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"

namespace ulakit {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_points = 0;
    std::size_t window_lo = 0;  // index of the first point used
    std::size_t window_hi = 0;  // index of the last point used
};

inline constexpr double kDefaultDropFraction = 0.25;

/// OLS of log(value) on log(n) after dropping the first drop_fraction of the
/// points (rounded down). A constant series has slope 0 and r^2 = 1.
inline RateFit fit_rate(const std::vector<double>& ns, const std::vector<double>& values,
                        double drop_fraction = kDefaultDropFraction) {
    if (ns.size() != values.size()) throw DimensionError("fit_rate: ns and values differ in length");
    if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw DomainError("fit_rate: drop_fraction must lie in [0, 1)");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
            throw DomainError("fit_rate: values must be positive and finite (index " + std::to_string(i) + ")");
        }
        if (!(ns[i] > 0.0)) throw DomainError("fit_rate: n must be positive");
        if (i > 0 && !(ns[i] > ns[i - 1])) throw DomainError("fit_rate: n must be strictly increasing");
    }
    const auto drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(ns.size())));
    const std::size_t m = ns.size() - drop;
    if (m < 3) throw DomainError("fit_rate: fewer than 3 points after dropping");

    double sx = 0.0, sy = 0.0;
    for (std::size_t i = drop; i < ns.size(); ++i) {
        sx += std::log(ns[i]);
        sy += std::log(values[i]);
    }
    const double mx = sx / static_cast<double>(m), my = sy / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = drop; i < ns.size(); ++i) {
        const double dx = std::log(ns[i]) - mx;
        const double dy = std::log(values[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    RateFit f;
    f.slope = sxy / sxx;
    // A flat series: logs agree up to rounding.
    const double scale = std::max(1.0, std::fabs(my));
    if (syy <= 1e-24 * scale * scale * static_cast<double>(m)) {
        f.slope = 0.0;
        f.r_squared = 1.0;
    } else {
        f.r_squared = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    }
    f.intercept = my - f.slope * mx;
    f.n_points = m;
    f.window_lo = drop;
    f.window_hi = ns.size() - 1;
    return f;
}

inline constexpr const char* kRateFitCsvHeader = "slope,intercept,r2,n_points,window_lo,window_hi";

inline std::string to_csv_row(const RateFit& f) {
    return format_double(f.slope) + ',' + format_double(f.intercept) + ',' + format_double(f.r_squared) + ',' +
           std::to_string(f.n_points) + ',' + std::to_string(f.window_lo) + ',' + std::to_string(f.window_hi);
}

/// W_1 and W_0 under Hoelder/C^alpha drift: exponent -alpha/2.
struct T21_W1W0 {
    double alpha = 1.0;
};

/// W_p for p in (0, 1) via interpolation of W_0 and W_1: exponent -alpha/2.
struct T21_Wp_interp {
    double alpha = 1.0;
    double p = 0.5;
};

/// W_p, p > 1, under uniform dissipation with eta_k = theta/k:
/// exponent -min(theta K2', alpha p / 2) / p.
struct T32_Wp {
    double alpha = 1.0;
    double p = 2.0;
    double theta_k2 = 1.0;  // theta * K2'
};

using RatePrediction = std::variant<T21_W1W0, T21_Wp_interp, T32_Wp>;

inline double predict_exponent(const RatePrediction& pred) {
    return std::visit(
        [](const auto& t) -> double {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, T21_W1W0>) {
                if (!(t.alpha > 0.0 && t.alpha <= 2.0)) throw DomainError("predict_exponent: alpha must lie in (0, 2]");
                return -t.alpha / 2.0;
            } else if constexpr (std::is_same_v<T, T21_Wp_interp>) {
                if (!(t.alpha > 0.0 && t.alpha <= 2.0)) throw DomainError("predict_exponent: alpha must lie in (0, 2]");
                if (!(t.p > 0.0 && t.p < 1.0)) throw DomainError("predict_exponent: p must lie in (0, 1)");
                return -t.alpha / 2.0;
            } else {
                if (!(t.alpha > 0.0 && t.alpha <= 1.0)) throw DomainError("predict_exponent: alpha must lie in (0, 1]");
                if (!(t.p > 1.0)) throw DomainError("predict_exponent: p must exceed 1");
                if (!(t.theta_k2 > 0.0)) throw DomainError("predict_exponent: theta K2' must be positive");
                return -std::min(t.theta_k2, t.alpha * t.p / 2.0) / t.p;
            }
        },
        pred);
}

struct RateCheck {
    bool pass = false;
    double slope = 0.0;
    double predicted = 0.0;
    double tol = 0.0;
    double r_squared = 0.0;
    bool slope_ok = false;
    bool r2_ok = false;
};

inline constexpr double kMinRSquared = 0.9;

inline RateCheck check_rate(const RateFit& fit, double exponent, double tol, double min_r2 = kMinRSquared) {
    if (!(tol > 0.0)) throw DomainError("check_rate: tol must be positive");
    RateCheck c;
    c.slope = fit.slope;
    c.predicted = exponent;
    c.tol = tol;
    c.r_squared = fit.r_squared;
    c.slope_ok = std::fabs(fit.slope - exponent) <= tol;
    c.r2_ok = fit.r_squared >= min_r2;
    c.pass = c.slope_ok && c.r2_ok;
    return c;
}

inline RateCheck check_rate(const RateFit& fit, const RatePrediction& pred, double tol) {
    return check_rate(fit, predict_exponent(pred), tol);
}

inline constexpr const char* kVerdictCsvHeader = "slope,predicted,tol,r2,pass";

inline std::string to_csv_row(const RateCheck& c) {
    return format_double(c.slope) + ',' + format_double(c.predicted) + ',' + format_double(c.tol) + ',' +
           format_double(c.r_squared) + ',' + (c.pass ? "true" : "false");
}

}  // namespace ulakit
