#pragma once

// Samplers that stand in for the invariant measure when comparing a batch of
// chain states against "the truth".

#include <cmath>
#include <cstdint>
#include <variant>

#include "ulakit/error.hpp"
#include "ulakit/model.hpp"
#include "ulakit/random.hpp"
#include "ulakit/sim.hpp"

namespace ulakit {

/// Constant-step chains run past t_burn, then sampled every ceil(1/eta) steps
/// (at least one time unit apart).
struct FineGridEM {
    double eta = 1e-3;
    double t_burn = 20.0;
    std::size_t chains = 64;
};

/// Accept/reject for the density proportional to exp(-x^2/2 + |x|^(alpha+1)/4)
/// from a N(0, proposal_sd^2) proposal. One-dimensional only.
struct Rejection1D {
    double alpha = 0.5;
    double proposal_sd = std::sqrt(2.0);
};

/// Independent draws from N(mean, diag(var)).
struct ExactGaussian {
    Vector mean{0.0};
    Vector var{1.0};
};

/// A point mass; the batch holds the single point.
struct DiracTarget {
    Vector point;
};

struct ReferenceSpec {
    std::variant<FineGridEM, Rejection1D, ExactGaussian, DiracTarget> method = ExactGaussian{};
    std::size_t n_samples = 100000;
};

namespace detail {

inline double holder_log_target(double x, double alpha) {
    return -0.5 * x * x + 0.25 * std::pow(std::fabs(x), alpha + 1.0);
}

}  // namespace detail

/// log of max_x target(x) / proposal(x) (both unnormalized), for the
/// Rejection1D envelope. A coarse scan over [0, 50] brackets the maximum and
/// golden-section search refines it. The ratio is even in x.
inline double rejection_log_envelope(double alpha, double proposal_sd) {
    // log ratio ~ (1/(2 sd^2) - 1/2) x^2 + |x|^(alpha+1) / 4: bounded iff
    // sd > 1 for alpha < 1, and sd >= sqrt(2) for alpha = 1.
    const bool bounded = alpha < 1.0 ? proposal_sd > 1.0 : proposal_sd * proposal_sd >= 2.0;
    if (!bounded || !std::isfinite(proposal_sd)) {
        throw DomainError("reference: rejection proposal is too narrow for an envelope");
    }
    const double inv2s2 = 0.5 / (proposal_sd * proposal_sd);
    auto g = [&](double x) { return detail::holder_log_target(x, alpha) + inv2s2 * x * x; };
    constexpr double kMax = 50.0;
    constexpr int kScan = 10000;
    int best = 0;
    double best_val = g(0.0);
    for (int i = 1; i <= kScan; ++i) {
        const double v = g(kMax * i / kScan);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double lo = kMax * std::max(best - 1, 0) / kScan;
    double hi = kMax * std::min(best + 1, kScan) / kScan;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - phi * (hi - lo);
    double b = lo + phi * (hi - lo);
    double fa = g(a), fb = g(b);
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = g(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = g(a);
        }
    }
    const double refined = std::max({fa, fb, best_val});
    // Slack against rounding in the search; keeps accepted ratios <= 1.
    return refined + 1e-12 * (1.0 + std::fabs(refined));
}

inline SampleBatch reference_samples(const ReferenceSpec& spec, const ModelSpec& model, const Vector& x0,
                                     std::uint64_t seed, unsigned threads = 1) {
    if (spec.n_samples == 0) throw DomainError("reference: n_samples must be >= 1");
    SampleBatch out;
    out.provenance.seed = seed;
    out.provenance.model_id = model.id;

    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ExactGaussian>) {
                if (m.mean.size() != m.var.size() || m.mean.empty()) {
                    throw DimensionError("reference: mean and variance lengths differ");
                }
                for (double v : m.var)
                    if (!(v >= 0.0)) throw DomainError("reference: variances must be >= 0");
                const std::size_t d = m.mean.size();
                out.dim = d;
                out.values.resize(spec.n_samples * d);
                RandomStream rng(seed, 0, stream_purpose::kReference);
                for (std::size_t i = 0; i < spec.n_samples; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        out.values[i * d + j] = m.mean[j] + std::sqrt(m.var[j]) * rng.normal();
                out.provenance.generator = std::string(kGeneratorTag) + "/exact-gaussian";
            } else if constexpr (std::is_same_v<T, Rejection1D>) {
                if (!(m.alpha > 0.0 && m.alpha <= 1.0)) throw DomainError("reference: alpha must lie in (0, 1]");
                if (!(m.proposal_sd > 0.0)) throw DomainError("reference: proposal_sd must be positive");
                // The target tail is exp(-x^2/2 + ...); a narrower proposal has an unbounded ratio.
                if (m.proposal_sd < 1.0) throw ConfigError("reference: proposal_sd < 1 gives no finite envelope");
                const double log_m = rejection_log_envelope(m.alpha, m.proposal_sd);
                const double inv2s2 = 0.5 / (m.proposal_sd * m.proposal_sd);
                out.dim = 1;
                out.values.reserve(spec.n_samples);
                RandomStream rng(seed, 0, stream_purpose::kReference);
                std::size_t proposed = 0;
                while (out.values.size() < spec.n_samples) {
                    const double x = m.proposal_sd * rng.normal();
                    ++proposed;
                    const double log_ratio = detail::holder_log_target(x, m.alpha) + inv2s2 * x * x - log_m;
                    if (std::log(rng.uniform_pos()) < log_ratio) out.values.push_back(x);
                    if (proposed >= 100000 && out.values.size() * 1000 < proposed) {
                        throw ConfigError("reference: rejection acceptance rate below 1e-3");
                    }
                }
                out.provenance.generator = std::string(kGeneratorTag) + "/rejection";
            } else if constexpr (std::is_same_v<T, FineGridEM>) {
                if (!(m.eta > 0.0) || !(m.t_burn >= 0.0) || m.chains == 0) {
                    throw DomainError("reference: fine-grid EM needs eta > 0, t_burn >= 0, chains >= 1");
                }
                const auto burn = static_cast<std::size_t>(std::ceil(m.t_burn / m.eta));
                const auto spacing = static_cast<std::size_t>(std::ceil(1.0 / m.eta));
                const std::size_t chains = std::min(m.chains, spec.n_samples);
                const std::size_t per_chain = (spec.n_samples + chains - 1) / chains;
                std::vector<std::size_t> cps(per_chain);
                for (std::size_t j = 0; j < per_chain; ++j) cps[j] = std::max<std::size_t>(burn, 1) + j * spacing;
                SamplerConfig cfg;
                cfg.model = model;
                cfg.schedule = StepSchedule::constant(m.eta);
                cfg.x0 = x0;
                cfg.n_steps = cps.back();
                cfg.n_chains = chains;
                cfg.seed = derive_key(seed, stream_purpose::kReference);
                cfg.allow_invalid_schedule = true;
                cfg.threads = threads;
                const auto series = snapshot_series(cfg, cps);
                out.dim = model.dim;
                for (const auto& b : series) {
                    out.diverged = std::max(out.diverged, b.diverged);
                    for (std::size_t r = 0; r < b.rows() && out.rows() < spec.n_samples; ++r) {
                        const auto row = b.row(r);
                        out.values.insert(out.values.end(), row.begin(), row.end());
                    }
                }
                out.provenance.generator = std::string(kGeneratorTag) + "/fine-grid-em";
                out.provenance.schedule = cfg.schedule.describe();
            } else {
                if (m.point.empty()) throw DimensionError("reference: empty Dirac point");
                out.dim = m.point.size();
                out.values = m.point;
                out.provenance.generator = "dirac";
            }
        },
        spec.method);
    out.provenance.n_chains = out.rows();
    out.chain_ids = iota_ids(out.rows());
    return out;
}

}  // namespace ulakit
