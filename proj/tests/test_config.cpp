#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "ulakit/config.hpp"
#include "ulakit/experiment.hpp"

using namespace ulakit;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = ULAKIT_CONFIG_DIR;

ExperimentConfig parse(const std::string& text) { return parse_experiment(parse_config(text), kConfigs); }

const char* kMinimalOu = R"(
name = "mini"
seed = 3
n_chains = 10
x0 = [1.0]
checkpoints = [4, 8]
model = { drift = "ou", dim = 1, rate = 1.0, diffusion = { kind = "constant", scale = 1.4142135623730951 } }
schedule = { kind = "polynomial", theta = 1.0, a = 1.0 }
)";

}  // namespace

TEST(TomlSubset, Scalars) {
    const auto j = parse_config(R"(
a = 1
b = -2.5
c = "text \"quoted\"\n"
d = true
e = 1e3
f = [1, 2.0, -3]
g = inf
h = 18446744073709551615
# comment
i = 'literal\n'
)");
    EXPECT_EQ(j["a"], 1);
    EXPECT_EQ(j["b"], -2.5);
    EXPECT_EQ(j["c"], "text \"quoted\"\n");
    EXPECT_EQ(j["d"], true);
    EXPECT_EQ(j["e"], 1000.0);
    EXPECT_EQ(j["f"].size(), 3u);
    EXPECT_TRUE(std::isinf(j["g"].get<double>()));
    EXPECT_EQ(j["h"].get<std::uint64_t>(), 18446744073709551615ull);
    EXPECT_EQ(j["i"], "literal\\n");
}

TEST(TomlSubset, TablesAndDottedKeys) {
    const auto j = parse_config(R"(
top = 1
[model]
drift = "ou"
diffusion.kind = "constant"
[model.extra]
x = { y = 2, z = [ { w = 1 } ] }
)");
    EXPECT_EQ(j["model"]["drift"], "ou");
    EXPECT_EQ(j["model"]["diffusion"]["kind"], "constant");
    EXPECT_EQ(j["model"]["extra"]["x"]["y"], 2);
    EXPECT_EQ(j["model"]["extra"]["x"]["z"][0]["w"], 1);
}

TEST(TomlSubset, Errors) {
    EXPECT_THROW(parse_config("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("a = \n"), ConfigError);
    EXPECT_THROW(parse_config("a = [1, 2\n"), ConfigError);
    EXPECT_THROW(parse_config("a = \"open\n"), ConfigError);
    EXPECT_THROW(parse_config("[t\n"), ConfigError);
    EXPECT_THROW(parse_config("a = 1 b = 2\n"), ConfigError);
}

TEST(ConfigReader, UnknownKeyIsNamed) {
    const auto j = parse_config("known = 1\ntypo = 2\n");
    ConfigReader r(j, "");
    EXPECT_EQ(r.number("known"), 1.0);
    try {
        r.finish();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("typo"), std::string::npos);
    }
}

TEST(Experiment, MinimalOu) {
    const auto cfg = parse(kMinimalOu);
    EXPECT_EQ(cfg.name, "mini");
    EXPECT_EQ(cfg.seed, 3u);
    EXPECT_EQ(cfg.checkpoints, (std::vector<std::size_t>{4, 8}));
    EXPECT_EQ(cfg.output_dir, fs::path("out/mini"));
    EXPECT_DOUBLE_EQ(cfg.ou_sigma, std::sqrt(2.0));
}

TEST(Experiment, UnknownKeysAreErrors) {
    EXPECT_THROW(parse(std::string(kMinimalOu) + "colour = 1\n"), ConfigError);
    std::string nested = kMinimalOu;
    nested.replace(nested.find("rate = 1.0"), 10, "rat = 1.0");
    EXPECT_THROW(parse(nested), ConfigError);
}

TEST(Experiment, GeometricCheckpoints) {
    std::string text = kMinimalOu;
    text.replace(text.find("[4, 8]"), 6, "{ lo = 64, hi = 65536, factor = 2 }");
    const auto cfg = parse(text);
    ASSERT_EQ(cfg.checkpoints.size(), 11u);
    EXPECT_EQ(cfg.checkpoints.front(), 64u);
    EXPECT_EQ(cfg.checkpoints.back(), 65536u);
}

TEST(Experiment, CheckpointsMustIncrease) {
    std::string text = kMinimalOu;
    text.replace(text.find("[4, 8]"), 6, "[8, 4]");
    EXPECT_THROW(parse(text), ConfigError);
}

TEST(Experiment, RateNeedsMatchingDistance) {
    EXPECT_THROW(parse(std::string(kMinimalOu) +
                       "rate = { theorem = \"T21_W1W0\", alpha = 2.0, estimator = \"sorted1d\", p = 1.0, tol = 0.1 }\n"),
                 ConfigError);
}

TEST(Experiment, BundledConfigsLoad) {
    for (const char* name : {"ou_exact.cfg", "holder_alpha05.cfg", "bridge_ridge.cfg", "bridge_gamma15.cfg"}) {
        EXPECT_NO_THROW(load_experiment(kConfigs / name)) << name;
    }
}

TEST(Experiment, BundledConfigsMatchCriteria) {
    const auto ou = load_experiment(kConfigs / "ou_exact.cfg");
    EXPECT_EQ(ou.drift_kind, "ou");
    EXPECT_EQ(ou.x0, Vector{1.0});
    EXPECT_EQ(ou.schedule.eta(1), 2.0);
    ASSERT_TRUE(ou.rate);
    EXPECT_EQ(predicted_slope(*ou.rate), -1.0);

    const auto h = load_experiment(kConfigs / "holder_alpha05.cfg");
    EXPECT_EQ(h.n_chains, 100000u);
    EXPECT_EQ(h.reference.n_samples, 1000000u);
    EXPECT_EQ(h.schedule.eta(1), 4.0);
    EXPECT_EQ(h.checkpoints.front(), 128u);
    EXPECT_EQ(h.checkpoints.back(), 16384u);
    EXPECT_EQ(predicted_slope(*h.rate), -0.25);

    for (const auto& [file, gamma] : {std::pair{"bridge_ridge.cfg", 2.0}, std::pair{"bridge_gamma15.cfg", 1.5}}) {
        auto cfg = load_experiment(kConfigs / file);
        EXPECT_EQ(cfg.gamma, gamma);
        EXPECT_EQ(cfg.n_chains, 10000u);
        EXPECT_EQ(cfg.data.size(), 20u);
        const auto res = resolve(cfg);
        ASSERT_TRUE(res.probe);
        EXPECT_EQ(res.k_prime, res.probe->k2_hat / 2.0);
        EXPECT_GT(res.theta, (gamma - 1.0) * 2.0 / (2.0 * res.k_prime));
        EXPECT_NEAR(predicted_slope(*cfg.rate), -(gamma - 1.0), 1e-12);
    }
}

TEST(Experiment, NoisyGdRejectsDiffusion) {
    const std::string text = R"(
sampler = "noisy_gd"
x0 = [0.0, 0.0, 0.0]
checkpoints = [4, 8]
model = { drift = "bridge", dim = 3, data = "bridge_data.csv", lambda = 1.0, gamma = 2.0, diffusion = { kind = "constant", scale = 1.0 } }
schedule = { kind = "polynomial", theta = 0.1 }
noise = { k_prime = 1.0 }
)";
    EXPECT_THROW(parse(text), ConfigError);
}

TEST(Experiment, CommandOverrides) {
    auto cfg = parse(kMinimalOu);
    CommandOptions o;
    o.seed = 99;
    o.threads = 2;
    o.out = "/tmp/x";
    apply(o, cfg);
    EXPECT_EQ(cfg.seed, 99u);
    EXPECT_EQ(cfg.threads, 2u);
    EXPECT_EQ(cfg.output_dir, fs::path("/tmp/x"));
}
