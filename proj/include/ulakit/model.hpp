#pragma once

// Drift/diffusion pairs for
//
//     dX_t = b_t(X_t) dt + sigma_t(X_t) dB_t
//
// with the regularity metadata each model claims.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"
#include "ulakit/linalg.hpp"
#include "ulakit/regression.hpp"

namespace ulakit {

/// b(x) = -A x
struct OuDrift {
    Matrix rate;

    void operator()(double /*t*/, std::span<const double> x, std::span<double> out) const noexcept {
        rate.apply(x, out);
        for (auto& v : out) v = -v;
    }
};

/// b(x) = -x + ((alpha + 1) / 4) |x|^(alpha - 1) x, extended by 0 at x = 0.
/// Gradient flow of the density proportional to exp(-|x|^2/2 + |x|^(alpha+1)/4);
/// partially but not uniformly dissipative, and only alpha-Hoelder at the origin.
struct HolderConfiningDrift {
    double alpha = 0.5;

    void operator()(double /*t*/, std::span<const double> x, std::span<double> out) const noexcept {
        const double r = norm(x);
        double scale = 0.0;
        if (r > 0.0) {
            const double c = 0.25 * (alpha + 1.0);
            if (alpha == 1.0) {
                scale = c;
            } else if (alpha == 0.5) {
                scale = c / std::sqrt(r);
            } else {
                scale = c * std::pow(r, alpha - 1.0);
            }
        }
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i] + scale * x[i];
    }
};

/// b(beta) = -grad L(beta) for the bridge-regression objective.
struct BridgeGradientDrift {
    std::shared_ptr<const RegressionData> data;
    std::shared_ptr<const BridgeObjective> objective;

    BridgeGradientDrift(RegressionData d, double lambda, double gamma, std::size_t dim)
        : data(std::make_shared<const RegressionData>(std::move(d))),
          objective(std::make_shared<const BridgeObjective>(*data, lambda, gamma, dim)) {}

    double lambda() const noexcept { return objective->lambda(); }
    double gamma() const noexcept { return objective->gamma(); }

    void operator()(double /*t*/, std::span<const double> x, std::span<double> out) const noexcept {
        objective->gradient(x, out);
        for (auto& v : out) v = -v;
    }
};

/// User-supplied drift. The callable must be reentrant.
struct CustomDrift {
    std::function<void(double t, std::span<const double> x, std::span<double> out)> fn;
    bool time_dependent = false;

    void operator()(double t, std::span<const double> x, std::span<double> out) const { fn(t, x, out); }
};

/// sigma_t(x) = sigma, constant.
struct ConstantDiffusion {
    Matrix sigma;
};

/// sigma_t = min(exp(-(K'/p) t) t^(-2/p), 1) I; equals I at t = 0.
struct DecayingScalarDiffusion {
    double k_prime = 1.0;
    double p = 2.0;

    double scale(double t) const noexcept {
        if (t <= 0.0) return 1.0;
        const double v = std::exp(-(k_prime / p) * t) * std::pow(t, -2.0 / p);
        return v < 1.0 ? v : 1.0;
    }
};

/// User-supplied diffusion; `fn` writes the d x d matrix row-major into `out`.
struct CustomDiffusion {
    std::function<void(double t, std::span<const double> x, std::span<double> out)> fn;
};

enum class DissipationClass { Partial, Uniform, Unknown };

using Drift = std::variant<OuDrift, HolderConfiningDrift, BridgeGradientDrift, CustomDrift>;
using Diffusion = std::variant<ConstantDiffusion, DecayingScalarDiffusion, CustomDiffusion>;

struct ModelSpec {
    std::size_t dim = 1;
    Drift drift = HolderConfiningDrift{};
    Diffusion diffusion = ConstantDiffusion{Matrix::identity(1, std::sqrt(2.0))};
    double declared_alpha = 1.0;
    DissipationClass dissipation = DissipationClass::Unknown;
    std::string id = "model";

    void check() const {
        if (dim == 0) throw DimensionError("ModelSpec: dim must be >= 1");
        if (!(declared_alpha > 0.0 && declared_alpha <= 2.0)) {
            throw DomainError("ModelSpec: declared alpha must lie in (0, 2]");
        }
        std::visit(
            [this](const auto& b) {
                using T = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<T, OuDrift>) {
                    if (b.rate.rows() != dim || b.rate.cols() != dim) throw DimensionError("OU rate matrix must be d x d");
                } else if constexpr (std::is_same_v<T, HolderConfiningDrift>) {
                    if (!(b.alpha > 0.0 && b.alpha <= 1.0)) throw DomainError("Hoelder drift: alpha must lie in (0, 1]");
                } else if constexpr (std::is_same_v<T, BridgeGradientDrift>) {
                    require_dim(b.objective->dim(), dim, "bridge drift");
                } else {
                    if (!b.fn) throw DomainError("custom drift: empty callable");
                }
            },
            drift);
        std::visit(
            [this](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConstantDiffusion>) {
                    if (s.sigma.rows() != dim || s.sigma.cols() != dim) {
                        throw DimensionError("diffusion matrix must be d x d");
                    }
                } else if constexpr (std::is_same_v<T, DecayingScalarDiffusion>) {
                    if (!(s.k_prime > 0.0) || !(s.p >= 1.0)) throw DomainError("decaying diffusion: need K' > 0, p >= 1");
                } else {
                    if (!s.fn) throw DomainError("custom diffusion: empty callable");
                }
            },
            diffusion);
    }

    bool time_dependent() const noexcept {
        if (const auto* c = std::get_if<CustomDrift>(&drift); c && c->time_dependent) return true;
        return !std::holds_alternative<ConstantDiffusion>(diffusion);
    }
};

/// b_t(x) into `out`; t is ignored by time-homogeneous drifts.
inline void drift_into(const ModelSpec& m, double t, std::span<const double> x, std::span<double> out) {
    std::visit([&](const auto& b) { b(t, x, out); }, m.drift);
}

inline Vector drift_eval(const ModelSpec& m, double t, std::span<const double> x) {
    require_dim(x.size(), m.dim, "drift_eval");
    Vector out(m.dim);
    drift_into(m, t, x, out);
    return out;
}

inline Matrix diffusion_eval(const ModelSpec& m, double t, std::span<const double> x) {
    require_dim(x.size(), m.dim, "diffusion_eval");
    return std::visit(
        [&](const auto& s) -> Matrix {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConstantDiffusion>) {
                return s.sigma;
            } else if constexpr (std::is_same_v<T, DecayingScalarDiffusion>) {
                return Matrix::identity(m.dim, s.scale(t));
            } else {
                Matrix out(m.dim, m.dim);
                s.fn(t, x, out.data());
                return out;
            }
        },
        m.diffusion);
}

// Factories for the catalogue models.

inline ModelSpec make_ou(std::size_t dim, double rate, double sigma) {
    ModelSpec m;
    m.dim = dim;
    m.drift = OuDrift{Matrix::identity(dim, rate)};
    m.diffusion = ConstantDiffusion{Matrix::identity(dim, sigma)};
    m.declared_alpha = 2.0;
    m.dissipation = DissipationClass::Uniform;
    m.id = "ou(rate=" + format_double(rate) + ",sigma=" + format_double(sigma) + ")";
    return m;
}

inline ModelSpec make_holder_confining(std::size_t dim, double alpha, double sigma = std::sqrt(2.0)) {
    ModelSpec m;
    m.dim = dim;
    m.drift = HolderConfiningDrift{alpha};
    m.diffusion = ConstantDiffusion{Matrix::identity(dim, sigma)};
    m.declared_alpha = alpha;
    m.dissipation = DissipationClass::Partial;
    m.id = "holder(alpha=" + format_double(alpha) + ")";
    return m;
}

inline ModelSpec make_bridge(RegressionData data, double lambda, double gamma, std::size_t dim, Diffusion diffusion) {
    ModelSpec m;
    m.dim = dim;
    m.drift = BridgeGradientDrift(std::move(data), lambda, gamma, dim);
    m.diffusion = std::move(diffusion);
    m.declared_alpha = gamma - 1.0;
    m.dissipation = DissipationClass::Uniform;
    m.id = "bridge(lambda=" + format_double(lambda) + ",gamma=" + format_double(gamma) + ")";
    return m;
}

inline ModelSpec make_zero_drift(std::size_t dim, double sigma = 1.0) {
    ModelSpec m;
    m.dim = dim;
    m.drift = CustomDrift{[](double, std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = 0.0;
    }};
    m.diffusion = ConstantDiffusion{Matrix::identity(dim, sigma)};
    m.declared_alpha = 1.0;
    m.dissipation = DissipationClass::Unknown;
    m.id = "zero";
    return m;
}

}  // namespace ulakit
