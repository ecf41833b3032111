#pragma once

// Decreasing-step Euler-Maruyama chains
//
//     Y_{t_k} = Y_{t_{k-1}} + eta_k b_{t_{k-1}}(Y_{t_{k-1}}) + sigma_{t_{k-1}}(Y_{t_{k-1}}) sqrt(eta_k) zeta_k,
//
// run as batches of independent chains. Only grid points are materialized.
// Chain c draws its noise from RandomStream(seed, c), so batches are a
// deterministic function of the configuration and the thread count does not
// change any value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ulakit/error.hpp"
#include "ulakit/linalg.hpp"
#include "ulakit/model.hpp"
#include "ulakit/parallel.hpp"
#include "ulakit/random.hpp"
#include "ulakit/schedule.hpp"

namespace ulakit {

inline constexpr const char* kGeneratorTag = "mix64-counter/ziggurat128";

struct Provenance {
    std::string model_id;
    std::string schedule;
    std::uint64_t seed = 0;
    std::size_t n_chains = 0;
    std::string generator = kGeneratorTag;
};

struct DivergenceEvent {
    std::uint64_t chain = 0;
    std::size_t step = 0;

    friend bool operator==(const DivergenceEvent&, const DivergenceEvent&) = default;
};

/// Realizations of Y_{t_n} for the chains that are still finite at step n.
/// Rows are stored row-major, one chain per row, in chain order.
struct SampleBatch {
    std::size_t dim = 1;
    std::size_t step = 0;
    double time = 0.0;
    Vector values;
    std::vector<std::uint64_t> chain_ids;
    std::size_t diverged = 0;
    std::vector<DivergenceEvent> divergences;
    Provenance provenance;

    std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }

    std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>(values).subspan(i * dim, dim);
    }

    Vector column(std::size_t j) const {
        Vector out(rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i * dim + j];
        return out;
    }
};

struct SamplerConfig {
    ModelSpec model;
    StepSchedule schedule;
    Vector x0;
    std::size_t n_steps = 1;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
    /// Run even if the schedule fails `validate` (reference integrators).
    bool allow_invalid_schedule = false;
    unsigned threads = 1;
};

/// One EM step: y + eta b_t(y) + sqrt(eta) sigma_t(y) noise.
inline Vector ula_step(std::span<const double> y, const ModelSpec& m, double t_prev, double eta,
                       std::span<const double> noise) {
    require_dim(y.size(), m.dim, "ula_step state");
    require_dim(noise.size(), m.dim, "ula_step noise");
    if (!(eta > 0.0)) throw DomainError("ula_step: step size must be positive");
    const Vector b = drift_eval(m, t_prev, y);
    const Vector sz = diffusion_eval(m, t_prev, y).apply(noise);
    const double se = std::sqrt(eta);
    Vector out(m.dim);
    for (std::size_t i = 0; i < m.dim; ++i) {
        out[i] = y[i] + eta * b[i] + se * sz[i];
        if (!std::isfinite(out[i])) throw DivergenceError("ula_step: non-finite state");
    }
    return out;
}

namespace detail {

/// How the noise term of step k is formed.
struct NoisePlan {
    enum class Mode { Scalar, Matrix, Custom };
    Mode mode = Mode::Scalar;
    std::vector<double> scale;     // Scalar: sigma(t_{k-1}), index k-1
    std::vector<double> sqrt_eta;  // all modes
    Matrix sigma;                  // Matrix
    const CustomDiffusion* custom = nullptr;
};

struct RunPlan {
    std::vector<double> etas;   // eta_1..eta_n
    std::vector<double> times;  // t_0..t_n
    NoisePlan noise;
    std::vector<std::size_t> checkpoints;
};

inline std::vector<double> sqrt_all(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double e) { return std::sqrt(e); });
    return out;
}

inline NoisePlan make_noise_plan(const ModelSpec& m, const std::vector<double>& etas,
                                 const std::vector<double>& times) {
    NoisePlan plan;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConstantDiffusion>) {
                const double s0 = s.sigma(0, 0);
                bool scalar = s.sigma.is_diagonal();
                for (std::size_t i = 1; scalar && i < m.dim; ++i) scalar = s.sigma(i, i) == s0;
                if (scalar) {
                    plan.mode = NoisePlan::Mode::Scalar;
                    plan.scale.assign(etas.size(), s0);
                } else {
                    plan.mode = NoisePlan::Mode::Matrix;
                    plan.sigma = s.sigma;
                }
            } else if constexpr (std::is_same_v<T, DecayingScalarDiffusion>) {
                plan.mode = NoisePlan::Mode::Scalar;
                plan.scale.resize(etas.size());
                for (std::size_t k = 0; k < etas.size(); ++k) plan.scale[k] = s.scale(times[k]);
            } else {
                plan.mode = NoisePlan::Mode::Custom;
                plan.custom = &s;
            }
        },
        m.diffusion);
    plan.sqrt_eta = sqrt_all(etas);
    return plan;
}

/// Per-run output buffers; slot (checkpoint j, row r) is written only by the
/// worker that owns row r.
struct ChainOutputs {
    std::size_t dim = 1;
    std::size_t rows = 0;
    std::vector<Vector> values;                   // per checkpoint, rows x dim
    std::vector<std::vector<unsigned char>> alive;  // per checkpoint, rows
    std::vector<std::size_t> diverged_at;         // per row, 0 = never

    ChainOutputs(std::size_t n_checkpoints, std::size_t n_rows, std::size_t d)
        : dim(d),
          rows(n_rows),
          values(n_checkpoints, Vector(n_rows * d, 0.0)),
          alive(n_checkpoints, std::vector<unsigned char>(n_rows, 0)),
          diverged_at(n_rows, 0) {}
};

template <class DriftT>
void simulate_rows(const DriftT& drift, const RunPlan& plan, std::span<const double> x0, std::uint64_t seed,
                   std::span<const std::uint64_t> chain_ids, std::size_t row_begin, std::size_t row_end,
                   ChainOutputs& out) {
    const std::size_t d = x0.size();
    const std::size_t n_max = plan.checkpoints.back();
    Vector y(d), b(d), z(d), sz(d);
    Matrix custom_sigma;
    if (plan.noise.mode == NoisePlan::Mode::Custom) custom_sigma = Matrix(d, d);

    for (std::size_t r = row_begin; r < row_end; ++r) {
        std::copy(x0.begin(), x0.end(), y.begin());
        RandomStream rng(seed, chain_ids[r], stream_purpose::kChainNoise);
        std::size_t next_cp = 0;
        for (std::size_t k = 1; k <= n_max; ++k) {
            const double t = plan.times[k - 1];
            const double eta = plan.etas[k - 1];
            drift(t, y, b);
            for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();
            bool finite = true;
            switch (plan.noise.mode) {
                case NoisePlan::Mode::Scalar: {
                    // Same operation order as ula_step, so results match bitwise.
                    const double s = plan.noise.scale[k - 1];
                    const double se = plan.noise.sqrt_eta[k - 1];
                    for (std::size_t i = 0; i < d; ++i) {
                        y[i] = y[i] + eta * b[i] + se * (s * z[i]);
                        finite = finite && std::isfinite(y[i]);
                    }
                    break;
                }
                case NoisePlan::Mode::Matrix: {
                    plan.noise.sigma.apply(z, sz);
                    const double se = plan.noise.sqrt_eta[k - 1];
                    for (std::size_t i = 0; i < d; ++i) {
                        y[i] = y[i] + eta * b[i] + se * sz[i];
                        finite = finite && std::isfinite(y[i]);
                    }
                    break;
                }
                case NoisePlan::Mode::Custom: {
                    plan.noise.custom->fn(t, y, custom_sigma.data());
                    custom_sigma.apply(z, sz);
                    const double se = plan.noise.sqrt_eta[k - 1];
                    for (std::size_t i = 0; i < d; ++i) {
                        y[i] = y[i] + eta * b[i] + se * sz[i];
                        finite = finite && std::isfinite(y[i]);
                    }
                    break;
                }
            }
            if (!finite) {
                out.diverged_at[r] = k;
                break;
            }
            if (k == plan.checkpoints[next_cp]) {
                std::copy(y.begin(), y.end(), out.values[next_cp].begin() + static_cast<std::ptrdiff_t>(r * d));
                out.alive[next_cp][r] = 1;
                ++next_cp;
            }
        }
    }
}

template <class DriftVariant>
ChainOutputs simulate(const DriftVariant& drift, const RunPlan& plan, std::span<const double> x0, std::uint64_t seed,
                      std::span<const std::uint64_t> chain_ids, unsigned threads) {
    ChainOutputs out(plan.checkpoints.size(), chain_ids.size(), x0.size());
    std::visit(
        [&](const auto& b) {
            parallel_for(chain_ids.size(), threads, [&](std::size_t begin, std::size_t end) {
                simulate_rows(b, plan, x0, seed, chain_ids, begin, end, out);
            });
        },
        drift);
    return out;
}

inline void check_checkpoints(const std::vector<std::size_t>& checkpoints, std::size_t n_steps) {
    if (checkpoints.empty()) throw DomainError("checkpoints: need at least one");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] == 0) throw DomainError("checkpoints: step indices start at 1");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
            throw DomainError("checkpoints: must be strictly increasing");
        }
    }
    if (checkpoints.back() > n_steps) throw DomainError("checkpoints: last checkpoint exceeds n_steps");
}

inline std::vector<SampleBatch> collect(const ChainOutputs& out, const RunPlan& plan,
                                        std::span<const std::uint64_t> chain_ids, const Provenance& prov) {
    std::vector<SampleBatch> batches;
    batches.reserve(plan.checkpoints.size());
    for (std::size_t j = 0; j < plan.checkpoints.size(); ++j) {
        SampleBatch b;
        b.dim = out.dim;
        b.step = plan.checkpoints[j];
        b.time = plan.times[b.step];
        b.provenance = prov;
        for (std::size_t r = 0; r < out.rows; ++r) {
            if (out.alive[j][r]) {
                b.chain_ids.push_back(chain_ids[r]);
                const auto first = out.values[j].begin() + static_cast<std::ptrdiff_t>(r * out.dim);
                b.values.insert(b.values.end(), first, first + static_cast<std::ptrdiff_t>(out.dim));
            } else if (out.diverged_at[r] != 0 && out.diverged_at[r] <= b.step) {
                ++b.diverged;
                b.divergences.push_back({chain_ids[r], out.diverged_at[r]});
            }
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

inline void check_config(const SamplerConfig& cfg) {
    cfg.model.check();
    require_dim(cfg.x0.size(), cfg.model.dim, "initial point");
    if (cfg.n_chains == 0) throw DomainError("sampler: n_chains must be >= 1");
    if (cfg.n_steps == 0) throw DomainError("sampler: n_steps must be >= 1");
    if (!cfg.allow_invalid_schedule) {
        const auto rep = validate(cfg.schedule);
        if (!rep.valid()) {
            std::string msg = "schedule violates the step-size assumptions:";
            for (const auto& v : rep.violations) msg += " [" + v + "]";
            throw ConfigError(msg);
        }
    }
    if (cfg.n_steps > cfg.schedule.length()) throw DomainError("sampler: n_steps exceeds explicit schedule length");
}

}  // namespace detail

/// Batches at each checkpoint from a single pass over the chains.
/// Checkpoints must be strictly increasing and at most `cfg.n_steps`.
inline std::vector<SampleBatch> snapshot_series(const SamplerConfig& cfg, const std::vector<std::size_t>& checkpoints,
                                                std::span<const std::uint64_t> chain_ids) {
    detail::check_config(cfg);
    detail::check_checkpoints(checkpoints, cfg.n_steps);
    detail::RunPlan plan;
    const std::size_t n_max = checkpoints.back();
    plan.etas = cfg.schedule.etas(n_max);
    plan.times = cfg.schedule.times(n_max);
    plan.noise = detail::make_noise_plan(cfg.model, plan.etas, plan.times);
    plan.checkpoints = checkpoints;

    const auto out = detail::simulate(cfg.model.drift, plan, cfg.x0, cfg.seed, chain_ids, cfg.threads);
    const Provenance prov{cfg.model.id, cfg.schedule.describe(), cfg.seed, chain_ids.size()};
    return detail::collect(out, plan, chain_ids, prov);
}

inline std::vector<std::uint64_t> iota_ids(std::size_t n) {
    std::vector<std::uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
    return ids;
}

inline std::vector<SampleBatch> snapshot_series(const SamplerConfig& cfg, const std::vector<std::size_t>& checkpoints) {
    const auto ids = iota_ids(cfg.n_chains);
    return snapshot_series(cfg, checkpoints, ids);
}

/// Chains with the given stream indices; row r uses stream chain_ids[r].
inline SampleBatch run_chains(const SamplerConfig& cfg, std::span<const std::uint64_t> chain_ids) {
    return snapshot_series(cfg, {cfg.n_steps}, chain_ids).front();
}

inline SampleBatch run_batch(const SamplerConfig& cfg) { return snapshot_series(cfg, {cfg.n_steps}).front(); }

/// sigma_k = min(k^(-K' theta / p) (theta ln k)^(-2/p), 1), with sigma_1 = sigma_2 = 1.
inline double decaying_noise_scale(std::size_t k, double k_prime, double theta, double p) {
    if (k <= 2) return 1.0;
    const double kk = static_cast<double>(k);
    const double v = std::pow(kk, -k_prime * theta / p) * std::pow(theta * std::log(kk), -2.0 / p);
    return std::min(v, 1.0);
}

struct NoisyGdConfig {
    RegressionData data;
    double lambda = 0.0;
    double gamma = 2.0;
    StepSchedule schedule;
    std::function<double(std::size_t)> noise_scale;  // sigma_k, k >= 1
    Vector beta0;
    std::size_t n_steps = 1;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Gradient descent with decreasing Gaussian noise,
/// beta_k = beta_{k-1} - eta_k grad L(beta_{k-1}) + sqrt(eta_k) sigma_k zeta_k,
/// snapshotted at each checkpoint.
inline std::vector<SampleBatch> run_noisy_gd_series(const NoisyGdConfig& cfg,
                                                    const std::vector<std::size_t>& checkpoints) {
    const std::size_t d = cfg.beta0.size();
    if (d == 0) throw DimensionError("noisy GD: empty initial point");
    if (!cfg.noise_scale) throw DomainError("noisy GD: missing noise schedule");
    if (cfg.n_chains == 0 || cfg.n_steps == 0) throw DomainError("noisy GD: need n_chains, n_steps >= 1");
    detail::check_checkpoints(checkpoints, cfg.n_steps);
    const auto rep = validate(cfg.schedule);
    if (!rep.valid()) throw ConfigError("noisy GD: schedule violates the step-size assumptions");

    const BridgeGradientDrift drift(cfg.data, cfg.lambda, cfg.gamma, d);
    detail::RunPlan plan;
    const std::size_t n_max = checkpoints.back();
    plan.etas = cfg.schedule.etas(n_max);
    plan.times = cfg.schedule.times(n_max);
    plan.noise.mode = detail::NoisePlan::Mode::Scalar;
    plan.noise.scale.resize(n_max);
    for (std::size_t k = 1; k <= n_max; ++k) {
        const double s = cfg.noise_scale(k);
        if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("noisy GD: noise scale must be finite and >= 0");
        plan.noise.scale[k - 1] = s;
    }
    plan.noise.sqrt_eta = detail::sqrt_all(plan.etas);
    plan.checkpoints = checkpoints;

    const auto ids = iota_ids(cfg.n_chains);
    const Drift variant = drift;
    const auto out = detail::simulate(variant, plan, cfg.beta0, cfg.seed, ids, cfg.threads);
    const Provenance prov{"noisy-gd(lambda=" + format_double(cfg.lambda) + ",gamma=" + format_double(cfg.gamma) + ")",
                          cfg.schedule.describe(), cfg.seed, cfg.n_chains};
    return detail::collect(out, plan, ids, prov);
}

inline SampleBatch run_noisy_gd(const NoisyGdConfig& cfg) { return run_noisy_gd_series(cfg, {cfg.n_steps}).front(); }

}  // namespace ulakit
