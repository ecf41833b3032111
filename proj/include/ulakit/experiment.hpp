#pragma once

// Experiment configs and the pipelines behind the CLI commands.
//
// Exit codes: 0 pass, 2 config error, 3 divergence budget exceeded,
// 4 rate check failed, 5 oracle failed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ulakit/batch_io.hpp"
#include "ulakit/config.hpp"
#include "ulakit/error.hpp"
#include "ulakit/format.hpp"
#include "ulakit/metric.hpp"
#include "ulakit/model.hpp"
#include "ulakit/oracle.hpp"
#include "ulakit/probe.hpp"
#include "ulakit/ratefit.hpp"
#include "ulakit/reference.hpp"
#include "ulakit/regression.hpp"
#include "ulakit/schedule.hpp"
#include "ulakit/sim.hpp"

namespace ulakit {

namespace exit_code {
inline constexpr int kPass = 0;
inline constexpr int kConfig = 2;
inline constexpr int kDivergence = 3;
inline constexpr int kRateFail = 4;
inline constexpr int kOracleFail = 5;
}  // namespace exit_code

/// Raised when more chains diverge than the experiment allows.
class DivergenceBudgetError : public Error {
public:
    using Error::Error;
};

struct DistanceSpec {
    Estimator estimator = Estimator::Sorted1D;
    double p = 1.0;
    std::size_t projections = kDefaultProjections;
    std::size_t bins = 0;  // 0 = default rule
};

struct RateSpec {
    enum class Theorem { W1W0, WpInterp, Uniform };
    Theorem theorem = Theorem::W1W0;
    double alpha = 1.0;
    double p = 1.0;  // p of the fitted distance series (and of the theorem)
    std::optional<double> theta_k2;  // nullopt = derive from the resolved schedule and noise
    bool power = false;  // fit W_p^p rather than W_p
    Estimator estimator = Estimator::Sorted1D;
    double tol = 0.1;
    double drop_fraction = kDefaultDropFraction;
    double min_r2 = kMinRSquared;
};

enum class SamplerKind { Ula, NoisyGd };

enum class ReferenceKind { None, Samples, Minimizer };

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::filesystem::path output_dir;
    std::filesystem::path base_dir;

    SamplerKind sampler = SamplerKind::Ula;
    std::string drift_kind;
    ModelSpec model;
    double ou_rate = 1.0;
    double ou_sigma = 0.0;  // > 0 only for isotropic constant diffusion
    double holder_alpha = 0.5;
    RegressionData data;
    double lambda = 0.0;
    double gamma = 2.0;

    StepSchedule schedule;
    bool theta_auto = false;
    double theta_margin = 1.001;
    double schedule_a = 1.0;

    // noisy GD noise: sigma_k from k_prime, theta, noise_p
    std::optional<double> k_prime;  // nullopt = half the probed K2
    double noise_p = 2.0;

    std::size_t probe_pairs = 10000;
    double probe_radius = 10.0;

    Vector x0;
    std::size_t n_chains = 1;
    std::vector<std::size_t> checkpoints;
    std::string batch_format = "csv";
    double divergence_budget = 1e-3;

    ReferenceKind reference_kind = ReferenceKind::None;
    ReferenceSpec reference;
    double minimizer_tol = 1e-12;

    std::vector<DistanceSpec> distances;
    std::optional<RateSpec> rate;
};

namespace detail {

inline std::vector<std::size_t> parse_checkpoints(ConfigReader& top) {
    const Json& raw = top.raw("checkpoints");
    std::vector<std::size_t> out;
    if (raw.is_array()) {
        for (double v : top.numbers("checkpoints")) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("checkpoints: entries must be integers >= 1");
            out.push_back(static_cast<std::size_t>(v));
        }
    } else {
        ConfigReader g = top.table("checkpoints");
        const auto lo = g.unsigned_int("lo");
        const auto hi = g.unsigned_int("hi");
        const double factor = g.number("factor", 2.0);
        g.finish();
        if (lo < 1 || hi < lo) throw ConfigError("checkpoints: need 1 <= lo <= hi");
        if (!(factor > 1.0)) throw ConfigError("checkpoints: factor must exceed 1");
        double v = static_cast<double>(lo);
        while (v <= static_cast<double>(hi) * (1.0 + 1e-12)) {
            const auto n = static_cast<std::size_t>(std::llround(v));
            if (out.empty() || n > out.back()) out.push_back(n);
            v *= factor;
        }
    }
    if (out.empty()) throw ConfigError("checkpoints: empty list");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1]) throw ConfigError("checkpoints: must be strictly increasing");
    return out;
}

inline void parse_schedule(ConfigReader& top, ExperimentConfig& cfg) {
    ConfigReader s = top.table("schedule");
    const std::string kind = s.string("kind");
    if (kind == "polynomial") {
        cfg.schedule_a = s.number("a", 1.0);
        const Json& theta = s.raw("theta");
        if (theta.is_string()) {
            if (theta.get<std::string>() != "auto") throw ConfigError("schedule.theta: expected a number or \"auto\"");
            cfg.theta_auto = true;
            cfg.theta_margin = s.number("theta_margin", 1.001);
            if (!(cfg.theta_margin > 1.0)) throw ConfigError("schedule.theta_margin must exceed 1");
            cfg.schedule = StepSchedule::polynomial(1.0, cfg.schedule_a);  // placeholder until resolved
        } else {
            const double t = s.number("theta");
            if (!(t > 0.0)) throw ConfigError("schedule.theta must be positive");
            cfg.schedule = StepSchedule::polynomial(t, cfg.schedule_a);
        }
        if (!(cfg.schedule_a > 0.0)) throw ConfigError("schedule.a must be positive");
    } else if (kind == "constant") {
        const double eta = s.number("eta");
        if (!(eta > 0.0)) throw ConfigError("schedule.eta must be positive");
        cfg.schedule = StepSchedule::constant(eta);
    } else if (kind == "explicit") {
        cfg.schedule = StepSchedule::explicit_list(s.numbers("values"));
    } else {
        throw ConfigError("schedule.kind: expected polynomial, constant or explicit");
    }
    s.finish();
}

inline Diffusion parse_diffusion(ConfigReader& d, std::size_t dim, double& iso_sigma) {
    const std::string kind = d.string("kind");
    if (kind == "constant") {
        const double scale = d.number("scale");
        iso_sigma = scale;
        return ConstantDiffusion{Matrix::identity(dim, scale)};
    }
    if (kind == "decaying") {
        const double kp = d.number("k_prime");
        const double p = d.number("p", 2.0);
        iso_sigma = 0.0;
        return DecayingScalarDiffusion{kp, p};
    }
    throw ConfigError(d.where() + ".kind: expected constant or decaying");
}

inline void parse_model(ConfigReader& top, ExperimentConfig& cfg) {
    ConfigReader m = top.table("model");
    cfg.drift_kind = m.string("drift");
    const auto dim = static_cast<std::size_t>(m.unsigned_int("dim", 1));
    if (dim == 0) throw ConfigError("model.dim must be >= 1");

    Diffusion diffusion = ConstantDiffusion{Matrix::identity(dim, std::sqrt(2.0))};
    double iso_sigma = std::sqrt(2.0);
    if (m.has("diffusion")) {
        if (cfg.sampler == SamplerKind::NoisyGd) {
            throw ConfigError("model.diffusion: noisy_gd takes its noise from the [noise] table");
        }
        ConfigReader d = m.table("diffusion");
        diffusion = parse_diffusion(d, dim, iso_sigma);
        d.finish();
    }

    if (cfg.drift_kind == "ou") {
        cfg.ou_rate = m.number("rate", 1.0);
        if (!(cfg.ou_rate > 0.0)) throw ConfigError("model.rate must be positive");
        cfg.model = make_ou(dim, cfg.ou_rate, iso_sigma > 0.0 ? iso_sigma : 1.0);
    } else if (cfg.drift_kind == "holder") {
        cfg.holder_alpha = m.number("alpha");
        if (!(cfg.holder_alpha > 0.0 && cfg.holder_alpha <= 1.0)) throw ConfigError("model.alpha must lie in (0, 1]");
        cfg.model = make_holder_confining(dim, cfg.holder_alpha);
    } else if (cfg.drift_kind == "bridge") {
        const std::filesystem::path file = m.string("data");
        const auto resolved = file.is_absolute() ? file : cfg.base_dir / file;
        cfg.data = read_regression_csv(resolved.string());
        cfg.lambda = m.number("lambda");
        cfg.gamma = m.number("gamma");
        try {
            detail::check_bridge_params(cfg.lambda, cfg.gamma);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
        if (cfg.data.size() > 0) require_dim(cfg.data.dim(), dim, "model.data");
        cfg.model = make_bridge(cfg.data, cfg.lambda, cfg.gamma, dim, diffusion);
    } else if (cfg.drift_kind == "zero") {
        cfg.model = make_zero_drift(dim);
    } else {
        throw ConfigError("model.drift: expected ou, holder, bridge or zero");
    }
    cfg.model.diffusion = diffusion;
    cfg.ou_sigma = iso_sigma;
    if (m.has("declared_alpha")) cfg.model.declared_alpha = m.number("declared_alpha");
    m.finish();
    try {
        cfg.model.check();
    } catch (const Error& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

inline void parse_reference(ConfigReader& top, ExperimentConfig& cfg) {
    if (!top.has("reference")) return;
    ConfigReader r = top.table("reference");
    const std::string method = r.string("method");
    if (method == "minimizer") {
        cfg.reference_kind = ReferenceKind::Minimizer;
        cfg.minimizer_tol = r.number("tol", 1e-12);
        if (cfg.drift_kind != "bridge") throw ConfigError("reference.method = minimizer needs a bridge model");
        r.finish();
        return;
    }
    cfg.reference_kind = ReferenceKind::Samples;
    cfg.reference.n_samples = static_cast<std::size_t>(r.unsigned_int("n_samples", 100000));
    if (method == "exact_gaussian") {
        ExactGaussian g;
        g.mean = r.has("mean") ? r.numbers("mean") : Vector(cfg.model.dim, 0.0);
        g.var = r.has("var") ? r.numbers("var") : Vector(cfg.model.dim, 1.0);
        if (g.mean.size() != cfg.model.dim || g.var.size() != cfg.model.dim) {
            throw ConfigError("reference: mean and var must have model.dim entries");
        }
        cfg.reference.method = g;
    } else if (method == "rejection") {
        if (cfg.drift_kind != "holder" || cfg.model.dim != 1) {
            throw ConfigError("reference.method = rejection needs a one-dimensional holder model");
        }
        cfg.reference.method = Rejection1D{cfg.holder_alpha, r.number("proposal_sd", std::sqrt(2.0))};
    } else if (method == "fine_grid_em") {
        FineGridEM f;
        f.eta = r.number("eta", f.eta);
        f.t_burn = r.number("t_burn", f.t_burn);
        f.chains = static_cast<std::size_t>(r.unsigned_int("chains", f.chains));
        cfg.reference.method = f;
    } else {
        throw ConfigError("reference.method: expected exact_gaussian, rejection, fine_grid_em or minimizer");
    }
    r.finish();
}

inline void parse_distances(ConfigReader& top, ExperimentConfig& cfg) {
    if (!top.has("distances")) return;
    const Json& arr = top.raw("distances");
    if (!arr.is_array()) throw ConfigError("distances: expected an array of tables");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        ConfigReader d(arr[i], "distances[" + std::to_string(i) + "]");
        DistanceSpec s;
        s.estimator = parse_estimator(d.string("estimator"));
        s.p = d.number("p", s.estimator == Estimator::TVHistogram ? 0.0 : 1.0);
        s.projections = static_cast<std::size_t>(d.unsigned_int("projections", kDefaultProjections));
        s.bins = static_cast<std::size_t>(d.unsigned_int("bins", 0));
        d.finish();
        if (s.estimator == Estimator::TVHistogram && s.p != 0.0) throw ConfigError(d.where() + ": tv_histogram has p = 0");
        if (s.estimator != Estimator::TVHistogram && !(s.p > 0.0)) throw ConfigError(d.where() + ": p must be positive");
        cfg.distances.push_back(s);
    }
}

inline void parse_rate(ConfigReader& top, ExperimentConfig& cfg) {
    if (!top.has("rate")) return;
    ConfigReader r = top.table("rate");
    RateSpec s;
    const std::string th = r.string("theorem");
    if (th == "T21_W1W0") {
        s.theorem = RateSpec::Theorem::W1W0;
    } else if (th == "T21_Wp_interp") {
        s.theorem = RateSpec::Theorem::WpInterp;
    } else if (th == "T32_Wp") {
        s.theorem = RateSpec::Theorem::Uniform;
    } else {
        throw ConfigError("rate.theorem: expected T21_W1W0, T21_Wp_interp or T32_Wp");
    }
    s.alpha = r.number("alpha", cfg.model.declared_alpha);
    s.p = r.number("p", 1.0);
    if (r.has("theta_k2")) {
        const Json& v = r.raw("theta_k2");
        if (v.is_string()) {
            if (v.get<std::string>() != "auto") throw ConfigError("rate.theta_k2: expected a number or \"auto\"");
        } else {
            s.theta_k2 = r.number("theta_k2");
        }
    } else if (s.theorem == RateSpec::Theorem::Uniform && cfg.sampler != SamplerKind::NoisyGd) {
        throw ConfigError("rate.theta_k2 is required for T32_Wp outside noisy_gd");
    }
    s.power = r.boolean("power", false);
    s.estimator = parse_estimator(r.string("estimator"));
    s.tol = r.number("tol");
    s.drop_fraction = r.number("drop_fraction", kDefaultDropFraction);
    s.min_r2 = r.number("min_r2", kMinRSquared);
    r.finish();
    if (!(s.tol > 0.0)) throw ConfigError("rate.tol must be positive");
    const bool found = std::any_of(cfg.distances.begin(), cfg.distances.end(), [&](const DistanceSpec& d) {
        return d.estimator == s.estimator && d.p == s.p;
    });
    if (!found) throw ConfigError("rate: no distance entry with the requested estimator and p");
    cfg.rate = s;
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const Json& root, const std::filesystem::path& base_dir = ".") {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    ConfigReader top(root, "");
    cfg.name = top.string("name", "experiment");
    cfg.seed = top.unsigned_int("seed", 0);
    cfg.threads = static_cast<unsigned>(top.unsigned_int("threads", 0));
    cfg.output_dir = top.string("output_dir", "out/" + cfg.name);
    const std::string sampler = top.string("sampler", "ula");
    if (sampler == "ula") {
        cfg.sampler = SamplerKind::Ula;
    } else if (sampler == "noisy_gd") {
        cfg.sampler = SamplerKind::NoisyGd;
    } else {
        throw ConfigError("sampler: expected ula or noisy_gd");
    }
    detail::parse_model(top, cfg);
    if (cfg.sampler == SamplerKind::NoisyGd && cfg.drift_kind != "bridge") {
        throw ConfigError("sampler = noisy_gd needs a bridge model");
    }
    detail::parse_schedule(top, cfg);
    if (cfg.theta_auto && cfg.sampler != SamplerKind::NoisyGd) {
        throw ConfigError("schedule.theta = \"auto\" is only defined for noisy_gd");
    }
    if (top.has("noise")) {
        if (cfg.sampler != SamplerKind::NoisyGd) throw ConfigError("noise: only used by noisy_gd");
        ConfigReader n = top.table("noise");
        const Json& kp = n.raw("k_prime");
        if (kp.is_string()) {
            if (kp.get<std::string>() != "auto") throw ConfigError("noise.k_prime: expected a number or \"auto\"");
        } else {
            cfg.k_prime = n.number("k_prime");
            if (!(*cfg.k_prime > 0.0)) throw ConfigError("noise.k_prime must be positive");
        }
        cfg.noise_p = n.number("p", 2.0);
        if (!(cfg.noise_p >= 1.0)) throw ConfigError("noise.p must be >= 1");
        n.finish();
    } else if (cfg.sampler == SamplerKind::NoisyGd) {
        throw ConfigError("sampler = noisy_gd needs a [noise] table");
    }
    if (top.has("probe")) {
        ConfigReader p = top.table("probe");
        cfg.probe_pairs = static_cast<std::size_t>(p.unsigned_int("n_pairs", cfg.probe_pairs));
        cfg.probe_radius = p.number("radius", cfg.probe_radius);
        p.finish();
        if (cfg.probe_pairs == 0 || !(cfg.probe_radius > 0.0)) throw ConfigError("probe: need n_pairs >= 1, radius > 0");
    }
    cfg.x0 = top.has("x0") ? top.numbers("x0") : Vector(cfg.model.dim, 0.0);
    if (cfg.x0.size() != cfg.model.dim) throw ConfigError("x0: expected model.dim entries");
    cfg.n_chains = static_cast<std::size_t>(top.unsigned_int("n_chains", 1));
    if (cfg.n_chains == 0) throw ConfigError("n_chains must be >= 1");
    cfg.checkpoints = detail::parse_checkpoints(top);
    if (cfg.checkpoints.back() > cfg.schedule.length()) throw ConfigError("checkpoints exceed the explicit schedule");
    cfg.batch_format = top.string("batch_format", "csv");
    if (cfg.batch_format != "csv" && cfg.batch_format != "binary") throw ConfigError("batch_format: csv or binary");
    cfg.divergence_budget = top.number("divergence_budget", 1e-3);
    if (!(cfg.divergence_budget >= 0.0 && cfg.divergence_budget <= 1.0)) {
        throw ConfigError("divergence_budget must lie in [0, 1]");
    }
    detail::parse_reference(top, cfg);
    detail::parse_distances(top, cfg);
    detail::parse_rate(top, cfg);
    top.finish();
    return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return parse_experiment(load_config(path), path.parent_path().empty() ? "." : path.parent_path());
}

/// Constants fixed before sampling: the probe report and anything "auto".
struct Resolved {
    std::optional<DissipationProbe> probe;
    double k_prime = 0.0;
    double theta = 0.0;
};

/// Fills in auto parameters. For noisy GD, K' defaults to half the probed K2
/// and theta = margin (gamma - 1) p / (2 K').
inline Resolved resolve(ExperimentConfig& cfg) {
    Resolved res;
    const bool need_probe = cfg.sampler == SamplerKind::NoisyGd && !cfg.k_prime;
    if (need_probe) {
        res.probe = probe_partial_dissipation(cfg.model, cfg.probe_pairs, cfg.probe_radius, cfg.seed);
        if (!res.probe->feasible || !(res.probe->k2_hat > 0.0)) {
            throw ConfigError("noise.k_prime = auto: the dissipation probe found no positive K2");
        }
        cfg.k_prime = res.probe->k2_hat / 2.0;
    }
    if (cfg.k_prime) res.k_prime = *cfg.k_prime;
    if (cfg.theta_auto) {
        res.theta = cfg.theta_margin * (cfg.gamma - 1.0) * cfg.noise_p / (2.0 * res.k_prime);
        cfg.schedule = StepSchedule::polynomial(res.theta, cfg.schedule_a);
        cfg.theta_auto = false;
    } else if (const auto* poly = std::get_if<PolynomialSteps>(&cfg.schedule.kind())) {
        res.theta = poly->theta;
    }
    if (cfg.rate && cfg.rate->theorem == RateSpec::Theorem::Uniform && !cfg.rate->theta_k2) {
        cfg.rate->theta_k2 = res.theta * res.k_prime;
    }
    return res;
}

inline RatePrediction make_prediction(const RateSpec& r) {
    switch (r.theorem) {
        case RateSpec::Theorem::W1W0: return T21_W1W0{r.alpha};
        case RateSpec::Theorem::WpInterp: return T21_Wp_interp{r.alpha, r.p};
        case RateSpec::Theorem::Uniform: return T32_Wp{r.alpha, r.p, r.theta_k2.value_or(0.0)};
    }
    return T21_W1W0{r.alpha};
}

/// Predicted slope of the fitted series (times p when fitting W_p^p).
inline double predicted_slope(const RateSpec& r) {
    const double e = predict_exponent(make_prediction(r));
    return r.power ? e * r.p : e;
}

/// Chain snapshots at every checkpoint.
inline std::vector<SampleBatch> run_samples(const ExperimentConfig& cfg, const Resolved& res) {
    if (cfg.sampler == SamplerKind::NoisyGd) {
        NoisyGdConfig g;
        g.data = cfg.data;
        g.lambda = cfg.lambda;
        g.gamma = cfg.gamma;
        g.schedule = cfg.schedule;
        const double kp = res.k_prime, th = res.theta, p = cfg.noise_p;
        g.noise_scale = [kp, th, p](std::size_t k) { return decaying_noise_scale(k, kp, th, p); };
        g.beta0 = cfg.x0;
        g.n_steps = cfg.checkpoints.back();
        g.n_chains = cfg.n_chains;
        g.seed = cfg.seed;
        g.threads = cfg.threads;
        return run_noisy_gd_series(g, cfg.checkpoints);
    }
    SamplerConfig s;
    s.model = cfg.model;
    s.schedule = cfg.schedule;
    s.x0 = cfg.x0;
    s.n_steps = cfg.checkpoints.back();
    s.n_chains = cfg.n_chains;
    s.seed = cfg.seed;
    s.threads = cfg.threads;
    return snapshot_series(s, cfg.checkpoints);
}

/// Throws DivergenceBudgetError when a checkpoint lost too many chains.
inline void check_divergence_budget(const ExperimentConfig& cfg, const std::vector<SampleBatch>& batches) {
    for (const auto& b : batches) {
        if (static_cast<double>(b.diverged) > cfg.divergence_budget * static_cast<double>(cfg.n_chains)) {
            throw DivergenceBudgetError(std::to_string(b.diverged) + " of " + std::to_string(cfg.n_chains) +
                                        " chains diverged by step " + std::to_string(b.step) + " (budget " +
                                        format_double(cfg.divergence_budget) + ")");
        }
    }
}

struct RateRow {
    std::size_t n = 0;
    double t_n = 0.0;
    DistanceReport report;
};

inline constexpr const char* kRatesCsvHeader = "n,t_n,estimator,p,value,stderr";

inline std::string to_csv_row(const RateRow& r) {
    return std::to_string(r.n) + ',' + format_double(r.t_n) + ',' + std::string(estimator_name(r.report.estimator)) +
           ',' + format_double(r.report.p) + ',' + format_double(r.report.value) + ',' +
           (r.report.std_error ? format_double(*r.report.std_error) : std::string());
}

struct RateOutcome {
    std::vector<RateRow> rows;
    std::optional<RateFit> fit;
    std::optional<RateCheck> check;
    Resolved resolved;
    std::size_t max_diverged = 0;
};

namespace detail {

inline bool needs_samples(const ExperimentConfig& cfg) {
    return std::any_of(cfg.distances.begin(), cfg.distances.end(),
                       [](const DistanceSpec& d) { return d.estimator != Estimator::ExactOULaw; });
}

inline GaussianLaw empirical_gaussian(const SampleBatch& b) {
    const std::size_t n = b.rows();
    if (n == 0) throw DomainError("gaussian_closed_form: empty batch");
    GaussianLaw g{Vector(b.dim, 0.0), Matrix(b.dim, b.dim)};
    for (std::size_t j = 0; j < b.dim; ++j) {
        const Vector c = b.column(j);
        const double m = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : c) ss += (v - m) * (v - m);
        g.mean[j] = m;
        g.cov(j, j) = ss / static_cast<double>(n);
    }
    return g;
}

inline DistanceReport exact_ou_distance(const ExperimentConfig& cfg, const DistanceSpec& d, std::size_t n) {
    if (cfg.drift_kind != "ou" || !(cfg.ou_sigma > 0.0)) {
        throw ConfigError("exact_ou_law needs an ou model with constant isotropic diffusion");
    }
    if (d.p != 2.0) throw ConfigError("exact_ou_law reports W_2; set p = 2");
    GaussianLaw chain{Vector(cfg.model.dim), Matrix(cfg.model.dim, cfg.model.dim)};
    for (std::size_t j = 0; j < cfg.model.dim; ++j) {
        const auto law = ou_em_law(cfg.ou_rate, cfg.ou_sigma, cfg.schedule, cfg.x0[j], n);
        chain.mean[j] = law.mean[0];
        chain.cov(j, j) = law.cov(0, 0);
    }
    const auto st = ou_stationary_law(cfg.ou_rate, cfg.ou_sigma);
    GaussianLaw target{Vector(cfg.model.dim, 0.0), Matrix::identity(cfg.model.dim, st.cov(0, 0))};
    DistanceReport r;
    r.p = 2.0;
    r.estimator = Estimator::ExactOULaw;
    r.value = w2_gaussian(chain, target);
    r.meta = {{"target", "stationary"}};
    return r;
}

}  // namespace detail

/// Reference batch or point that the sampled laws are compared with.
struct ReferenceData {
    std::optional<SampleBatch> samples;
    std::optional<Vector> point;
    std::optional<GaussianLaw> law;
};

inline ReferenceData build_reference(const ExperimentConfig& cfg) {
    ReferenceData ref;
    if (cfg.reference_kind == ReferenceKind::Minimizer) {
        if (cfg.gamma == 2.0) {
            ref.point = ridge_closed_form(cfg.data, cfg.lambda, cfg.model.dim);
        } else {
            ref.point = bridge_minimizer_gd(cfg.data, cfg.lambda, cfg.gamma, Vector(cfg.model.dim, 0.0),
                                            cfg.minimizer_tol)
                            .beta;
        }
    } else if (cfg.reference_kind == ReferenceKind::Samples) {
        ref.samples = reference_samples(cfg.reference, cfg.model, cfg.x0, cfg.seed, cfg.threads);
        if (const auto* g = std::get_if<ExactGaussian>(&cfg.reference.method)) {
            ref.law = GaussianLaw{g->mean, Matrix::diagonal(g->var)};
        }
    }
    return ref;
}

inline DistanceReport compute_distance(const ExperimentConfig& cfg, const DistanceSpec& d, const SampleBatch& batch,
                                       const ReferenceData& ref) {
    auto need_samples = [&]() -> const SampleBatch& {
        if (!ref.samples) throw ConfigError(std::string(estimator_name(d.estimator)) + " needs reference samples");
        return *ref.samples;
    };
    switch (d.estimator) {
        case Estimator::Sorted1D: {
            if (batch.dim != 1) throw ConfigError("sorted1d needs d = 1; use sliced");
            return w_p_1d(batch.values, need_samples().values, d.p);
        }
        case Estimator::Sliced: return sliced_wp(batch, need_samples(), d.p, d.projections, cfg.seed);
        case Estimator::TVHistogram: return tv_histogram(batch, need_samples(), d.bins);
        case Estimator::GaussianClosedForm: {
            const GaussianLaw target = ref.law ? *ref.law : detail::empirical_gaussian(need_samples());
            if (d.p != 2.0) throw ConfigError("gaussian_closed_form reports W_2; set p = 2");
            DistanceReport r;
            r.p = 2.0;
            r.estimator = Estimator::GaussianClosedForm;
            r.value = w2_gaussian(detail::empirical_gaussian(batch), target);
            r.n_a = batch.rows();
            r.n_b = ref.samples ? ref.samples->rows() : 0;
            r.meta = {{"fit", "diagonal moments"}};
            return r;
        }
        case Estimator::DiracMoment: {
            if (!ref.point) throw ConfigError("dirac_moment needs reference.method = minimizer");
            return dirac_moment(batch, *ref.point, d.p);
        }
        case Estimator::ExactOULaw: return detail::exact_ou_distance(cfg, d, batch.step);
    }
    throw ConfigError("unsupported estimator");
}

/// Full rate pipeline: snapshots, reference, distances, fit, check.
/// `cfg` must already be resolved.
inline RateOutcome run_rate(const ExperimentConfig& cfg, const Resolved& res) {
    if (cfg.distances.empty()) throw ConfigError("rate: no distances requested");
    RateOutcome out;
    out.resolved = res;
    const auto times = cfg.schedule.times(cfg.checkpoints.back());

    std::vector<SampleBatch> batches;
    ReferenceData ref;
    if (detail::needs_samples(cfg)) {
        batches = run_samples(cfg, res);
        check_divergence_budget(cfg, batches);
        for (const auto& b : batches) out.max_diverged = std::max(out.max_diverged, b.diverged);
        ref = build_reference(cfg);
        if (ref.samples) {
            // Sorting once here makes every per-checkpoint 1-D sort cheaper.
            if (ref.samples->dim == 1) std::sort(ref.samples->values.begin(), ref.samples->values.end());
        }
    }
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
        const std::size_t n = cfg.checkpoints[i];
        for (const auto& d : cfg.distances) {
            RateRow row;
            row.n = n;
            row.t_n = times[n];
            row.report = d.estimator == Estimator::ExactOULaw ? detail::exact_ou_distance(cfg, d, n)
                                                               : compute_distance(cfg, d, batches[i], ref);
            out.rows.push_back(std::move(row));
        }
    }
    if (cfg.rate) {
        std::vector<double> ns, vals;
        for (const auto& r : out.rows) {
            if (r.report.estimator == cfg.rate->estimator && r.report.p == cfg.rate->p) {
                ns.push_back(static_cast<double>(r.n));
                vals.push_back(r.report.value);
            }
        }
        out.fit = fit_rate(ns, vals, cfg.rate->drop_fraction);
        out.check = check_rate(*out.fit, predicted_slope(*cfg.rate), cfg.rate->tol, cfg.rate->min_r2);
    }
    return out;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << body;
    if (!os) throw ConfigError("write failed for " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace detail

/// Overrides a command line may apply on top of the config file.
struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::filesystem::path> out;
};

inline void apply(const CommandOptions& o, ExperimentConfig& cfg) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (o.out) cfg.output_dir = *o.out;
}

/// Maps library exceptions to exit codes and prints the message.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const DivergenceBudgetError& e) {
        err << "divergence: " << e.what() << '\n';
        return exit_code::kDivergence;
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << '\n';
        return exit_code::kDivergence;
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::kConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::kConfig;
    }
}

inline int cmd_sample(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
                      std::ostream& err) {
    return guarded(err, [&] {
        auto cfg = load_experiment(config);
        apply(opts, cfg);
        const auto res = resolve(cfg);
        const auto batches = run_samples(cfg, res);
        detail::ensure_dir(cfg.output_dir);
        const std::string ext = cfg.batch_format == "binary" ? ".ulab" : ".csv";
        std::string manifest = "checkpoint,t_n,file,diverged_count\n";
        for (const auto& b : batches) {
            const std::string file = "batch_n" + std::to_string(b.step) + ext;
            save_batch(cfg.output_dir / file, b);
            manifest += std::to_string(b.step) + ',' + format_double(b.time) + ',' + file + ',' +
                        std::to_string(b.diverged) + '\n';
        }
        detail::write_text(cfg.output_dir / "manifest.csv", manifest);
        out << "sample " << cfg.name << ": " << batches.size() << " checkpoints written to "
            << cfg.output_dir.string() << '\n';
        check_divergence_budget(cfg, batches);
        return exit_code::kPass;
    });
}

inline int cmd_rate(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
                    std::ostream& err) {
    return guarded(err, [&] {
        auto cfg = load_experiment(config);
        apply(opts, cfg);
        const auto res = resolve(cfg);
        const auto outcome = run_rate(cfg, res);
        detail::ensure_dir(cfg.output_dir);
        std::string rates = std::string(kRatesCsvHeader) + '\n';
        for (const auto& r : outcome.rows) rates += to_csv_row(r) + '\n';
        detail::write_text(cfg.output_dir / "rates.csv", rates);
        if (!outcome.check) {
            out << "rate " << cfg.name << ": " << outcome.rows.size() << " distances written (no rate block)\n";
            return exit_code::kPass;
        }
        detail::write_text(cfg.output_dir / "verdict.csv",
                           std::string(kVerdictCsvHeader) + '\n' + to_csv_row(*outcome.check) + '\n');
        detail::write_text(cfg.output_dir / "fit.csv",
                           std::string(kRateFitCsvHeader) + '\n' + to_csv_row(*outcome.fit) + '\n');
        const auto& c = *outcome.check;
        out << "rate " << cfg.name << ": slope=" << format_double(c.slope) << " predicted=" << format_double(c.predicted)
            << " tol=" << format_double(c.tol) << " r2=" << format_double(c.r_squared) << " -> "
            << (c.pass ? "PASS" : "FAIL") << '\n';
        return c.pass ? exit_code::kPass : exit_code::kRateFail;
    });
}

inline int cmd_check(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
                     std::ostream& err) {
    return guarded(err, [&] {
        auto cfg = load_experiment(config);
        apply(opts, cfg);
        out << "model " << cfg.model.id << " (dim " << cfg.model.dim << ")\n";
        const auto probe = probe_partial_dissipation(cfg.model, cfg.probe_pairs, cfg.probe_radius, cfg.seed);
        out << "dissipation probe: feasible=" << (probe.feasible ? "yes" : "no")
            << " K1_hat=" << format_double(probe.k1_hat) << " K2_hat=" << format_double(probe.k2_hat)
            << " pairs=" << probe.n_pairs << " radius=" << format_double(cfg.probe_radius) << '\n';
        const double alpha = std::min(cfg.model.declared_alpha, 1.0);
        const double k1 = probe_holder_modulus(cfg.model, cfg.probe_pairs, cfg.probe_radius, alpha, cfg.seed);
        out << "hoelder modulus probe (alpha=" << format_double(alpha) << "): K1_hat=" << format_double(k1) << '\n';
        if (cfg.theta_auto) {
            const auto res = resolve(cfg);
            out << "resolved: K'=" << format_double(res.k_prime) << " theta=" << format_double(res.theta) << '\n';
        }
        const auto rep = validate(cfg.schedule);
        out << "schedule " << cfg.schedule.describe() << ": " << (rep.valid() ? "valid" : "INVALID") << '\n';
        for (const auto& v : rep.violations) out << "  " << v << '\n';
        return exit_code::kPass;
    });
}

inline int cmd_oracle(std::ostream& out, const OracleHooks& hooks = {}) {
    bool all = true;
    for (const auto& o : run_oracles(hooks)) {
        out << describe(o) << '\n';
        all = all && o.pass;
    }
    out << "oracle: " << (all ? "PASS" : "FAIL") << '\n';
    return all ? exit_code::kPass : exit_code::kOracleFail;
}

}  // namespace ulakit
