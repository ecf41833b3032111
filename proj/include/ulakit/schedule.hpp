#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"

namespace ulakit {

/// eta_k = theta * k^(-a)
struct PolynomialSteps {
    double theta = 1.0;
    double a = 1.0;
};

/// eta_k = eta for every k. Not a decreasing schedule; used for reference
/// integrators.
struct ConstantSteps {
    double eta = 0.01;
};

/// eta_1, ..., eta_m given explicitly.
struct ExplicitSteps {
    std::vector<double> values;
};

enum class Tri { No, Yes, Unknown };

/// Which step-size requirements a schedule satisfies.
struct ScheduleReport {
    bool positive = true;
    bool non_increasing = true;
    Tri decaying = Tri::Unknown;   // eta_k -> 0
    Tri divergent = Tri::Unknown;  // sum eta_k = infinity
    std::vector<std::string> violations;

    bool valid() const { return violations.empty(); }
};

/// A step-size sequence {eta_k}_{k>=1} with memoized accumulated times
/// t_n = eta_1 + ... + eta_n.
///
/// Immutable after construction. The prefix-sum cache is guarded by a mutex,
/// so copies and concurrent readers are safe; hot loops should take a
/// precomputed vector from `etas()` / `times()` instead of calling `time_at`
/// per step.
class StepSchedule {
public:
    using Kind = std::variant<PolynomialSteps, ConstantSteps, ExplicitSteps>;

    StepSchedule() : StepSchedule(PolynomialSteps{}) {}
    StepSchedule(Kind kind) : kind_(std::move(kind)), cache_(std::make_shared<PrefixCache>()) {}

    static StepSchedule polynomial(double theta, double a) { return StepSchedule(PolynomialSteps{theta, a}); }
    static StepSchedule constant(double eta) { return StepSchedule(ConstantSteps{eta}); }
    static StepSchedule explicit_list(std::vector<double> values) {
        return StepSchedule(ExplicitSteps{std::move(values)});
    }

    const Kind& kind() const noexcept { return kind_; }

    /// Longest index for which eta is defined (SIZE_MAX for analytic kinds).
    std::size_t length() const noexcept {
        if (const auto* e = std::get_if<ExplicitSteps>(&kind_)) return e->values.size();
        return static_cast<std::size_t>(-1);
    }

    double eta(std::size_t k) const {
        if (k == 0) throw DomainError("eta: step index starts at 1");
        return std::visit(
            [k](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PolynomialSteps>) {
                    if (s.a == 1.0) return s.theta / static_cast<double>(k);
                    return s.theta * std::pow(static_cast<double>(k), -s.a);
                } else if constexpr (std::is_same_v<T, ConstantSteps>) {
                    return s.eta;
                } else {
                    if (k > s.values.size()) {
                        throw DomainError("eta: index " + std::to_string(k) + " beyond explicit schedule of length " +
                                          std::to_string(s.values.size()));
                    }
                    return s.values[k - 1];
                }
            },
            kind_);
    }

    /// t_n, with t_0 = 0. Kahan-compensated so that t_n does not drift over
    /// long runs.
    double time_at(std::size_t n) const {
        std::lock_guard lock(cache_->mutex);
        extend_locked(n);
        return cache_->sums[n];
    }

    /// eta_1..eta_n as a vector (index 0 holds eta_1).
    std::vector<double> etas(std::size_t n) const {
        std::vector<double> out(n);
        for (std::size_t k = 1; k <= n; ++k) out[k - 1] = eta(k);
        return out;
    }

    /// t_0..t_n as a vector.
    std::vector<double> times(std::size_t n) const {
        std::lock_guard lock(cache_->mutex);
        extend_locked(n);
        return {cache_->sums.begin(), cache_->sums.begin() + static_cast<std::ptrdiff_t>(n + 1)};
    }

    /// Short descriptor used in provenance records.
    std::string describe() const {
        return std::visit(
            [](const auto& s) -> std::string {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PolynomialSteps>) {
                    return "polynomial(theta=" + format_double(s.theta) + ",a=" + format_double(s.a) + ")";
                } else if constexpr (std::is_same_v<T, ConstantSteps>) {
                    return "constant(eta=" + format_double(s.eta) + ")";
                } else {
                    return "explicit(len=" + std::to_string(s.values.size()) + ")";
                }
            },
            kind_);
    }

private:
    struct PrefixCache {
        std::mutex mutex;
        std::vector<double> sums{0.0};
        double compensation = 0.0;
    };

    void extend_locked(std::size_t n) const {
        auto& c = *cache_;
        if (n < c.sums.size()) return;
        if (n > length()) {
            throw DomainError("time_at: index " + std::to_string(n) + " beyond explicit schedule");
        }
        c.sums.reserve(n + 1);
        double sum = c.sums.back();
        double comp = c.compensation;
        for (std::size_t k = c.sums.size(); k <= n; ++k) {
            const double y = eta(k) - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            c.sums.push_back(sum);
        }
        c.compensation = comp;
    }

    Kind kind_;
    std::shared_ptr<PrefixCache> cache_;
};

/// Check the step-size requirements: positive, non-increasing, eta_k -> 0,
/// and divergent partial sums.
inline ScheduleReport validate(const StepSchedule& sched) {
    ScheduleReport r;
    std::visit(
        [&r](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PolynomialSteps>) {
                r.positive = s.theta > 0.0 && std::isfinite(s.theta);
                r.non_increasing = s.a >= 0.0;
                r.decaying = s.a > 0.0 ? Tri::Yes : Tri::No;
                r.divergent = s.a <= 1.0 ? Tri::Yes : Tri::No;
            } else if constexpr (std::is_same_v<T, ConstantSteps>) {
                r.positive = s.eta > 0.0 && std::isfinite(s.eta);
                r.non_increasing = true;
                r.decaying = Tri::No;
                r.divergent = Tri::Yes;
            } else {
                r.positive = !s.values.empty();
                for (std::size_t i = 0; i < s.values.size(); ++i) {
                    if (!(s.values[i] > 0.0) || !std::isfinite(s.values[i])) r.positive = false;
                    if (i > 0 && s.values[i] > s.values[i - 1]) r.non_increasing = false;
                }
            }
        },
        sched.kind());
    if (!r.positive) r.violations.emplace_back("positivity: every step size must be > 0");
    if (!r.non_increasing) r.violations.emplace_back("monotonicity: step sizes must be non-increasing");
    if (r.decaying == Tri::No) r.violations.emplace_back("decay: step sizes must tend to 0");
    if (r.divergent == Tri::No) r.violations.emplace_back("divergence: the sum of step sizes must be infinite");
    return r;
}

}  // namespace ulakit
