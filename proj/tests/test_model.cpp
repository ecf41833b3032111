#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ulakit/model.hpp"
#include "ulakit/probe.hpp"
#include "ulakit/random.hpp"
#include "ulakit/regression.hpp"

using namespace ulakit;

namespace {

RegressionData one_point(double x, double y) {
    RegressionData d;
    d.x.push_back({x});
    d.y.push_back(y);
    return d;
}

ModelSpec constant_drift(std::size_t dim, double c) {
    ModelSpec m = make_zero_drift(dim);
    m.drift = CustomDrift{[c](double, std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = c;
    }};
    return m;
}

}  // namespace

TEST(Drift, HolderVanishesAtOrigin) {
    const auto m = make_holder_confining(3, 0.5);
    const Vector zero(3, 0.0);
    EXPECT_EQ(drift_eval(m, 0.0, zero), zero);
}

TEST(Drift, OuIsLinear) {
    const auto m = make_ou(2, 1.0, 1.0);
    EXPECT_EQ(drift_eval(m, 0.0, Vector{2.0, 0.0}), (Vector{-2.0, 0.0}));
}

TEST(Drift, HolderHandValue) {
    const auto m = make_holder_confining(1, 0.5);
    EXPECT_DOUBLE_EQ(drift_eval(m, 0.0, Vector{4.0})[0], -3.25);
}

TEST(Drift, HolderGenericAlphaMatchesFormula) {
    const auto m = make_holder_confining(2, 0.3);
    const Vector x{1.5, -0.7};
    const double r = std::hypot(1.5, -0.7);
    const auto b = drift_eval(m, 0.0, x);
    for (std::size_t i = 0; i < 2; ++i)
        EXPECT_NEAR(b[i], -x[i] + (1.3 / 4.0) * std::pow(r, -0.7) * x[i], 1e-15);
}

TEST(Drift, DimensionMismatch) {
    const auto m = make_ou(2, 1.0, 1.0);
    EXPECT_THROW(drift_eval(m, 0.0, Vector{1.0}), DimensionError);
    EXPECT_THROW(diffusion_eval(m, 0.0, Vector{1.0, 2.0, 3.0}), DimensionError);
}

TEST(Drift, HolderIsOdd) {
    for (double alpha : {0.25, 0.5, 1.0}) {
        const auto m = make_holder_confining(3, alpha);
        RandomStream rng(17, 0);
        for (int i = 0; i < 2000; ++i) {
            Vector x(3);
            for (auto& v : x) v = 5.0 * rng.normal();
            Vector nx = x;
            for (auto& v : nx) v = -v;
            const auto b = drift_eval(m, 0.0, x);
            const auto nb = drift_eval(m, 0.0, nx);
            for (std::size_t j = 0; j < 3; ++j) ASSERT_EQ(nb[j], -b[j]);
        }
    }
}

TEST(Diffusion, ConstantIgnoresArguments) {
    const auto m = make_ou(1, 1.0, std::sqrt(2.0));
    const auto s = diffusion_eval(m, 123.0, Vector{-7.0});
    EXPECT_DOUBLE_EQ(s(0, 0), 1.4142135623730951);
}

TEST(Diffusion, DecayingClampsAtSmallTime) {
    const auto m = make_bridge(one_point(1.0, 1.0), 0.0, 2.0, 1, DecayingScalarDiffusion{1.0, 2.0});
    EXPECT_EQ(diffusion_eval(m, 0.1, Vector{0.0})(0, 0), 1.0);
    EXPECT_EQ(diffusion_eval(m, 0.0, Vector{0.0})(0, 0), 1.0);
}

TEST(Diffusion, DecayingHandValue) {
    const auto m = make_bridge(one_point(1.0, 1.0), 0.0, 2.0, 1, DecayingScalarDiffusion{1.0, 2.0});
    EXPECT_NEAR(diffusion_eval(m, 10.0, Vector{0.0})(0, 0), std::exp(-5.0) / 10.0, 1e-18);
    EXPECT_NEAR(std::exp(-5.0) / 10.0, 6.7379e-4, 1e-8);
}

TEST(Diffusion, DecayingNonIncreasingAndClamped) {
    for (double p : {1.0, 2.0, 3.5}) {
        const DecayingScalarDiffusion s{0.7, p};
        double prev = s.scale(0.0);
        EXPECT_EQ(prev, 1.0);
        for (double t = 0.01; t < 200.0; t *= 1.05) {
            const double v = s.scale(t);
            EXPECT_LE(v, 1.0);
            EXPECT_LE(v, prev);
            prev = v;
        }
    }
}

TEST(BridgeLoss, EmptyObjective) {
    EXPECT_EQ(bridge_loss(RegressionData{}, 0.0, 1.5, Vector{0.3, -2.0}), 0.0);
}

TEST(BridgeLoss, SinglePoint) { EXPECT_EQ(bridge_loss(one_point(1.0, 1.0), 0.0, 2.0, Vector{0.0}), 1.0); }

TEST(BridgeLoss, SinglePointWithPenalty) {
    EXPECT_DOUBLE_EQ(bridge_loss(one_point(1.0, 1.0), 2.0, 2.0, Vector{0.5}), 0.75);
}

TEST(BridgeGrad, SinglePoint) { EXPECT_EQ(bridge_loss_grad(one_point(1.0, 1.0), 0.0, 2.0, Vector{0.0}), (Vector{-2.0})); }

TEST(BridgeGrad, PenaltyOnly) { EXPECT_EQ(bridge_loss_grad(RegressionData{}, 2.0, 2.0, Vector{1.0}), (Vector{4.0})); }

TEST(BridgeGrad, PenaltyVanishesAtZero) {
    EXPECT_EQ(bridge_loss_grad(RegressionData{}, 1.0, 1.5, Vector{0.0}), (Vector{0.0}));
}

TEST(BridgeGrad, MatchesFiniteDifferences) {
    const auto data = make_synthetic_regression(15, 3, 5);
    RandomStream rng(9, 0);
    constexpr double h = 1e-6;
    for (double gamma : {1.1, 1.5, 2.0}) {
        for (int trial = 0; trial < 200; ++trial) {
            Vector beta(3);
            for (auto& v : beta) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 1e-3 + 2.0 * rng.uniform());
            const double lambda = 2.0 * rng.uniform();
            const auto g = bridge_loss_grad(data, lambda, gamma, beta);
            double diff2 = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                Vector up = beta, dn = beta;
                up[j] += h;
                dn[j] -= h;
                const double fd = (bridge_loss(data, lambda, gamma, up) - bridge_loss(data, lambda, gamma, dn)) / (2 * h);
                diff2 += (fd - g[j]) * (fd - g[j]);
            }
            ASSERT_LT(std::sqrt(diff2) / std::max(norm(g), 1.0), 1e-6) << "gamma=" << gamma;
        }
    }
}

TEST(BridgeGrad, ObjectiveMatchesFreeFunction) {
    const auto data = make_synthetic_regression(12, 4, 3);
    const BridgeObjective obj(data, 0.7, 1.3, 4);
    RandomStream rng(2, 0);
    for (int i = 0; i < 100; ++i) {
        Vector beta(4);
        for (auto& v : beta) v = rng.normal();
        Vector g(4);
        obj.gradient(beta, g);
        const auto ref = bridge_loss_grad(data, 0.7, 1.3, beta);
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g[j], ref[j], 1e-12 * std::max(1.0, std::fabs(ref[j])));
    }
}

TEST(BridgeConvexity, GradientMonotone) {
    const auto data = make_synthetic_regression(10, 3, 11);
    RandomStream rng(4, 0);
    for (double gamma : {1.1, 1.5, 2.0}) {
        for (int i = 0; i < 1000; ++i) {
            Vector b1(3), b2(3);
            for (auto& v : b1) v = 3.0 * rng.normal();
            for (auto& v : b2) v = 3.0 * rng.normal();
            const auto g1 = bridge_loss_grad(data, 1.0, gamma, b1);
            const auto g2 = bridge_loss_grad(data, 1.0, gamma, b2);
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += (g1[j] - g2[j]) * (b1[j] - b2[j]);
            EXPECT_GE(s, -1e-12);
        }
    }
}

TEST(BridgeConvexity, QuadraticPenaltyExact) {
    // N = 0, gamma = 2: <grad L(b1) - grad L(b2), b1 - b2> = 2 lambda |b1 - b2|^2.
    RandomStream rng(6, 0);
    for (int i = 0; i < 100; ++i) {
        Vector b1(2), b2(2);
        for (auto& v : b1) v = rng.normal();
        for (auto& v : b2) v = rng.normal();
        const auto g1 = bridge_loss_grad(RegressionData{}, 1.5, 2.0, b1);
        const auto g2 = bridge_loss_grad(RegressionData{}, 1.5, 2.0, b2);
        double s = 0.0;
        for (std::size_t j = 0; j < 2; ++j) s += (g1[j] - g2[j]) * (b1[j] - b2[j]);
        EXPECT_NEAR(s, 2.0 * 1.5 * norm2(Vector{b1[0] - b2[0], b1[1] - b2[1]}), 1e-12);
    }
}

TEST(Minimizer, RidgeClosedFormHasZeroGradient) {
    const auto data = make_synthetic_regression(20, 3, 7);
    const auto beta = ridge_closed_form(data, 1.0, 3);
    EXPECT_LT(norm(bridge_loss_grad(data, 1.0, 2.0, beta)), 1e-12);
}

TEST(Minimizer, GradientDescentReachesTolerance) {
    const auto data = make_synthetic_regression(20, 3, 7);
    const auto res = bridge_minimizer_gd(data, 1.0, 1.5, Vector(3, 0.0), 1e-12);
    EXPECT_LE(res.grad_norm, 1e-12);
    const auto ridge = bridge_minimizer_gd(data, 1.0, 2.0, Vector(3, 0.0), 1e-12);
    const auto exact = ridge_closed_form(data, 1.0, 3);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(ridge.beta[j], exact[j], 1e-12);
}

TEST(Dataset, BundledCsvMatchesGenerator) {
    const auto bundled = read_regression_csv(std::string(ULAKIT_CONFIG_DIR) + "/bridge_data.csv");
    const auto fresh = make_synthetic_regression(20, 3, 7);
    ASSERT_EQ(bundled.size(), fresh.size());
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        EXPECT_EQ(bundled.y[i], fresh.y[i]);
        EXPECT_EQ(bundled.x[i], fresh.x[i]);
    }
}

TEST(Dataset, CsvRoundTrip) {
    const auto data = make_synthetic_regression(5, 2, 1);
    std::stringstream ss;
    write_regression_csv(ss, data);
    const auto back = read_regression_csv(ss);
    EXPECT_EQ(back.x, data.x);
    EXPECT_EQ(back.y, data.y);
}

TEST(Probe, OuIdentity) {
    const auto m = make_ou(2, 1.0, 1.0);
    const auto r = probe_partial_dissipation(m, 5000, 10.0, 1);
    ASSERT_TRUE(r.feasible);
    EXPECT_GE(r.k2_hat, 1.0 / ProbeGrid::resolution());
    EXPECT_LE(r.k2_hat, 1.0);
    EXPECT_EQ(r.k1_hat, 0.0);
}

TEST(Probe, HolderHasPositiveDissipation) {
    const auto m = make_holder_confining(1, 0.5);
    const auto r = probe_partial_dissipation(m, 10000, 10.0, 3);
    ASSERT_TRUE(r.feasible);
    EXPECT_TRUE(std::isfinite(r.k1_hat));
    EXPECT_GT(r.k2_hat, 0.0);
}

TEST(Probe, ZeroDriftAtGridFloor) {
    const auto r = probe_partial_dissipation(make_zero_drift(2), 2000, 5.0, 2);
    EXPECT_EQ(r.k2_hat, ProbeGrid::value(0));
    // K1 must absorb K2 * |x - y|^2 <= floor * (2 * radius)^2.
    EXPECT_GT(r.k1_hat, 0.0);
    EXPECT_LE(r.k1_hat, ProbeGrid::value(0) * 100.0 * ProbeGrid::resolution());
}

TEST(Probe, ReportIsDeterministic) {
    const auto m = make_holder_confining(2, 0.5);
    const auto a = probe_partial_dissipation(m, 3000, 10.0, 5);
    const auto b = probe_partial_dissipation(m, 3000, 10.0, 5);
    EXPECT_EQ(a.k1_hat, b.k1_hat);
    EXPECT_EQ(a.k2_hat, b.k2_hat);
    EXPECT_EQ(a.worst_x, b.worst_x);
}

TEST(Probe, HolderReportCoversItsOwnSample) {
    const auto m = make_holder_confining(1, 0.5);
    const auto r = probe_partial_dissipation(m, 10000, 100.0, 4);
    ASSERT_TRUE(r.feasible);
    const auto pairs = detail::sample_pairs(1, 10000, 100.0, 4);
    for (std::size_t i = 0; i < pairs.xs.size(); ++i) {
        const double dx = pairs.xs[i][0] - pairs.ys[i][0];
        const double db = drift_eval(m, 0.0, pairs.xs[i])[0] - drift_eval(m, 0.0, pairs.ys[i])[0];
        ASSERT_LE(db * dx, r.k1_hat - r.k2_hat * dx * dx + 1e-9) << i;
    }
}

TEST(Probe, HolderReportRarelyViolatedOnFreshPairs) {
    // Not a certificate: fresh pairs may violate it, but only rarely.
    const auto m = make_holder_confining(1, 0.5);
    const auto r = probe_partial_dissipation(m, 10000, 100.0, 4);
    const auto fresh = detail::sample_pairs(1, 100000, 100.0, 99);
    int bad = 0;
    for (std::size_t i = 0; i < fresh.xs.size(); ++i) {
        const double dx = fresh.xs[i][0] - fresh.ys[i][0];
        const double db = drift_eval(m, 0.0, fresh.xs[i])[0] - drift_eval(m, 0.0, fresh.ys[i])[0];
        if (db * dx > r.k1_hat - r.k2_hat * dx * dx + 1e-9) ++bad;
    }
    EXPECT_LT(bad, 100);
}

TEST(HolderModulus, OuBoundedByOne) {
    EXPECT_LE(probe_holder_modulus(make_ou(2, 1.0, 1.0), 5000, 10.0, 0.5, 1), 1.0 + 1e-12);
}

TEST(HolderModulus, ConstantDriftIsZero) {
    EXPECT_EQ(probe_holder_modulus(constant_drift(2, 3.0), 1000, 10.0, 0.5, 1), 0.0);
}

TEST(HolderModulus, HolderFiniteAndStable) {
    const auto m = make_holder_confining(1, 0.5);
    const double k1 = probe_holder_modulus(m, 20000, 1.0, 0.5, 1);
    const double k10 = probe_holder_modulus(m, 20000, 10.0, 0.5, 1);
    const double k100 = probe_holder_modulus(m, 20000, 100.0, 0.5, 1);
    for (double k : {k1, k10, k100}) {
        EXPECT_TRUE(std::isfinite(k));
        EXPECT_GT(k, 0.0);
        EXPECT_LE(k, 2.0);
    }
}

TEST(ModelSpecCheck, RejectsBadParameters) {
    EXPECT_THROW(make_holder_confining(1, 1.5).check(), DomainError);
    auto m = make_ou(2, 1.0, 1.0);
    m.diffusion = ConstantDiffusion{Matrix::identity(3)};
    EXPECT_THROW(m.check(), DimensionError);
    EXPECT_THROW(make_bridge(RegressionData{}, 1.0, 2.5, 1, DecayingScalarDiffusion{}), Error);
}
