#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ulakit/metric.hpp"
#include "ulakit/oracle.hpp"
#include "ulakit/random.hpp"

using namespace ulakit;

namespace {

Vector normals(std::size_t n, std::uint64_t seed, double shift = 0.0, double scale = 1.0) {
    RandomStream r(seed, 0);
    Vector v(n);
    for (auto& x : v) x = shift + scale * r.normal();
    return v;
}

Vector uniforms(std::size_t n, RandomStream& r, double lo, double hi) {
    Vector v(n);
    for (auto& x : v) x = lo + (hi - lo) * r.uniform();
    return v;
}

}  // namespace

TEST(Wp1d, IdenticalSamplesAreZero) {
    const Vector a = {3.0, -1.0, 2.0, 2.0};
    EXPECT_EQ(w_p_1d(a, a, 2.0).value, 0.0);
    EXPECT_EQ(w_p_1d(a, Vector{2.0, 3.0, 2.0, -1.0}, 0.5).value, 0.0);
}

TEST(Wp1d, SinglePoint) { EXPECT_EQ(w_p_1d(Vector{0.0}, Vector{3.0}, 1.0).value, 3.0); }

TEST(Wp1d, TwoPointQuadratic) { EXPECT_DOUBLE_EQ(w_p_1d(Vector{0.0, 1.0}, Vector{1.0, 2.0}, 2.0).value, 1.0); }

TEST(Wp1d, SubUnitPowerUsesNonMonotoneCoupling) {
    // Sorted pairing costs 1; leaving the shared point fixed costs 2^0.5 / 2.
    const auto r = w_p_1d(Vector{0.0, 1.0}, Vector{1.0, 2.0}, 0.5);
    EXPECT_NEAR(r.value, std::sqrt(2.0) / 2.0, 1e-15);
    EXPECT_NEAR(r.value, w_p_bruteforce(Vector{0.0, 1.0}, Vector{1.0, 2.0}, 0.5), 1e-15);
}

TEST(Wp1d, Errors) {
    EXPECT_THROW(w_p_1d(Vector{}, Vector{1.0}, 1.0), DomainError);
    EXPECT_THROW(w_p_1d(Vector{1.0}, Vector{1.0}, 0.0), DomainError);
}

TEST(Wp1d, UnequalSizesUseQuantileCoupling) {
    // Uniform{0,1} vs Uniform{0,0.5,1}: quantile functions differ on
    // [1/3,1/2) by 0.5 and on [1/2,2/3) by 0.5, so W_1 = 1/6.
    const auto r = w_p_1d(Vector{0.0, 1.0}, Vector{0.0, 0.5, 1.0}, 1.0);
    EXPECT_NEAR(r.value, 1.0 / 6.0, 1e-15);
    EXPECT_EQ(r.meta["coupling"], "quantile");
    // Replicating a sample leaves its empirical law unchanged.
    const Vector a = normals(37, 1), b = normals(53, 2, 0.4);
    Vector a2;
    for (int k = 0; k < 53; ++k) a2.insert(a2.end(), a.begin(), a.end());
    Vector b2;
    for (int k = 0; k < 37; ++k) b2.insert(b2.end(), b.begin(), b.end());
    for (double p : {1.0, 2.0, 3.0}) EXPECT_NEAR(w_p_1d(a, b, p).value, w_p_1d(a2, b2, p).value, 1e-12);
}

TEST(Wp1d, UnequalSizesBelowOneAreTrimmed) {
    const auto r = w_p_1d(Vector{0.0, 1.0, 5.0}, Vector{1.0, 2.0}, 0.5);
    EXPECT_EQ(r.meta["trimmed_to"], 2);
    EXPECT_NEAR(r.value, std::sqrt(2.0) / 2.0, 1e-15);
}

TEST(Wp1d, LargeSubUnitFallsBackToUpperBound) {
    const Vector a = normals(2000, 3), b = normals(2000, 4, 0.1);
    const auto r = w_p_1d(a, b, 0.5);
    EXPECT_EQ(r.meta["exact"], false);
    Vector sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double s = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) s += std::sqrt(std::fabs(sa[i] - sb[i]));
    EXPECT_NEAR(r.value, s / 2000.0, 1e-12);
}

TEST(Bruteforce, Examples) {
    const Vector a = {1.0, 4.0, -2.0};
    EXPECT_EQ(w_p_bruteforce(a, a, 1.5), 0.0);
    EXPECT_DOUBLE_EQ(w_p_bruteforce(Vector{0.0, 1.0}, Vector{1.0, 2.0}, 2.0), 1.0);
    EXPECT_EQ(w_p_bruteforce(Vector{0.0, 10.0}, Vector{0.0, 10.0}, 1.0), 0.0);
    EXPECT_THROW(w_p_bruteforce(Vector(9, 0.0), Vector(9, 0.0), 1.0), DomainError);
}

TEST(Wp1dOracle, MatchesBruteForceOnIntegerMultisets) {
    const auto o = oracle_wp1d();
    EXPECT_TRUE(o.pass) << describe(o);
    EXPECT_EQ(o.failures, 0u);
}

TEST(Wp1dOracle, MatchesBruteForceOnRealSamples) {
    RandomStream r(31, 0);
    for (int t = 0; t < 3000; ++t) {
        const std::size_t n = 1 + r.next_u64() % 8;
        const Vector a = uniforms(n, r, -2.0, 2.0), b = uniforms(n, r, -2.0, 2.0);
        for (double p : {0.3, 0.5, 0.9, 1.0, 1.5, 2.0})
            ASSERT_NEAR(w_p_1d(a, b, p).value, w_p_bruteforce(a, b, p), 1e-12) << "n=" << n << " p=" << p;
    }
}

TEST(Wp1dOracle, NegativeControlIsCaught) {
    OracleHooks broken;
    broken.w_p_1d = [](std::span<const double> a, std::span<const double> b, double p) {
        Vector sa(a.begin(), a.end()), sb(b.begin(), b.end());
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end(), std::greater<>());
        double s = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i) s += std::pow(std::fabs(sa[i] - sb[i]), p);
        s /= static_cast<double>(sa.size());
        return p >= 1.0 ? std::pow(s, 1.0 / p) : s;
    };
    const auto o = oracle_wp1d(broken, 100);
    EXPECT_FALSE(o.pass);
    EXPECT_GT(o.failures, 0u);
}

TEST(MetricProperty, Symmetry) {
    RandomStream r(41, 0);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + r.next_u64() % 40;
        const std::size_t m = 1 + r.next_u64() % 40;
        const Vector a = uniforms(n, r, -3.0, 3.0), b = uniforms(m, r, -1.0, 4.0);
        for (double p : {1.0, 2.0, 3.5}) EXPECT_EQ(w_p_1d(a, b, p).value, w_p_1d(b, a, p).value);
        const Vector bn(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(std::min(n, m)));
        const Vector an(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(std::min(n, m)));
        EXPECT_EQ(w_p_1d(an, bn, 0.5).value, w_p_1d(bn, an, 0.5).value);
        EXPECT_EQ(tv_histogram(SampleView(a, 1), SampleView(b, 1), 16).value,
                  tv_histogram(SampleView(b, 1), SampleView(a, 1), 16).value);
    }
    const Vector a2 = uniforms(60, r, -1.0, 1.0), b2 = uniforms(60, r, 0.0, 2.0);
    EXPECT_EQ(sliced_wp(SampleView(a2, 2), SampleView(b2, 2), 2.0, 32, 5).value,
              sliced_wp(SampleView(b2, 2), SampleView(a2, 2), 2.0, 32, 5).value);
    EXPECT_EQ(tv_histogram(SampleView(a2, 2), SampleView(b2, 2), 8).value,
              tv_histogram(SampleView(b2, 2), SampleView(a2, 2), 8).value);
}

TEST(MetricProperty, TriangleInequality) {
    RandomStream r(43, 0);
    for (int t = 0; t < 2000; ++t) {
        const Vector a = uniforms(16, r, -2.0, 2.0), b = uniforms(16, r, -1.0, 3.0), c = uniforms(16, r, -3.0, 1.0);
        for (double p : {1.0, 1.5, 2.0, 4.0})
            EXPECT_LE(w_p_1d(a, b, p).value, w_p_1d(a, c, p).value + w_p_1d(c, b, p).value + 1e-9);
        for (double p : {0.3, 0.5, 0.8})
            EXPECT_LE(w_p_1d(a, b, p).value, w_p_1d(a, c, p).value + w_p_1d(c, b, p).value + 1e-9);
    }
}

TEST(Sliced, IdenticalIsZero) {
    const Vector a = normals(300, 5);
    const auto r = sliced_wp(SampleView(a, 3), SampleView(a, 3), 2.0, 16, 1);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(*r.std_error, 0.0);
}

TEST(Sliced, PointMassesAreReproducible) {
    const Vector a = {0.0, 0.0}, b = {3.0, 4.0};
    const auto r1 = sliced_wp(SampleView(a, 2), SampleView(b, 2), 1.0, 64, 9);
    const auto r2 = sliced_wp(SampleView(a, 2), SampleView(b, 2), 1.0, 64, 9);
    EXPECT_EQ(r1.value, r2.value);
    EXPECT_GT(r1.value, 0.0);
    EXPECT_LE(r1.value, 5.0);
    // E|<u, v>| over the circle is 2|v|/pi.
    const auto many = sliced_wp(SampleView(a, 2), SampleView(b, 2), 1.0, 20000, 9);
    EXPECT_NEAR(many.value, 10.0 / M_PI, 5.0 * *many.std_error);
}

TEST(Sliced, GaussianMeanShift) {
    const std::size_t n = 100000;
    Vector a(2 * n), b(2 * n);
    RandomStream r(51, 0);
    for (std::size_t i = 0; i < n; ++i) {
        a[2 * i] = r.normal();
        a[2 * i + 1] = r.normal();
        b[2 * i] = 1.0 + r.normal();
        b[2 * i + 1] = r.normal();
    }
    const auto rep = sliced_wp(SampleView(a, 2), SampleView(b, 2), 2.0);
    EXPECT_GE(rep.value, 0.5);
    EXPECT_LE(rep.value, 0.8);
    EXPECT_EQ(rep.meta["projections"], 64);
}

TEST(Sliced, Errors) {
    const Vector a = {1.0, 2.0};
    EXPECT_THROW(sliced_wp(SampleView(a, 1), SampleView(a, 1), 2.0), DomainError);
    EXPECT_THROW(sliced_wp(SampleView(a, 2), SampleView(a, 2), 0.5), DomainError);
}

TEST(TvHistogram, IdenticalIsZero) {
    const Vector a = normals(1000, 6);
    EXPECT_EQ(tv_histogram(SampleView(a, 1), SampleView(a, 1)).value, 0.0);
}

TEST(TvHistogram, DisjointSupportsIsOne) {
    RandomStream r(7, 0);
    const Vector a = uniforms(500, r, 0.0, 1.0), b = uniforms(700, r, 10.0, 11.0);
    const auto rep = tv_histogram(SampleView(a, 1), SampleView(b, 1));
    EXPECT_DOUBLE_EQ(rep.value, 1.0);
    EXPECT_EQ(rep.p, 0.0);
}

TEST(TvHistogram, IndependentGaussianBatchesAreClose) {
    const Vector a = normals(100000, 8), b = normals(100000, 9);
    const auto rep = tv_histogram(SampleView(a, 1), SampleView(b, 1), 64);
    EXPECT_LT(rep.value, 0.02);
    EXPECT_GE(rep.value, 0.0);
}

TEST(TvHistogram, DefaultBins) {
    EXPECT_EQ(default_tv_bins(1), 8u);
    EXPECT_EQ(default_tv_bins(1000), 10u);
    EXPECT_EQ(default_tv_bins(100000), 47u);
    EXPECT_EQ(default_tv_bins(1u << 30), 256u);
}

TEST(DiracMoment, MeanSquaredDistance) {
    const Vector a = {0.0, 0.0, 3.0, 4.0};
    const auto r = dirac_moment(SampleView(a, 2), Vector{0.0, 0.0}, 2.0);
    EXPECT_DOUBLE_EQ(r.value, 12.5);
    EXPECT_DOUBLE_EQ(*r.std_error, 12.5);
}

TEST(W2Gaussian, Examples) {
    const auto g = GaussianLaw{Vector{1.0, 2.0}, Matrix::diagonal(Vector{0.5, 2.0})};
    EXPECT_EQ(w2_gaussian(g, g), 0.0);
    for (std::size_t d : {1, 3, 5}) {
        const GaussianLaw g1{Vector(d, 0.0), Matrix::identity(d)};
        const GaussianLaw g4{Vector(d, 0.0), Matrix::identity(d, 4.0)};
        EXPECT_NEAR(w2_gaussian(g1, g4), std::sqrt(static_cast<double>(d)), 1e-15);
    }
    const GaussianLaw m1{Vector{0.0, 0.0}, Matrix::diagonal(Vector{1.0, 3.0})};
    const GaussianLaw m2{Vector{3.0, 4.0}, Matrix::diagonal(Vector{1.0, 3.0})};
    EXPECT_DOUBLE_EQ(w2_gaussian(m1, m2), 5.0);
}

TEST(W2Gaussian, AgreesWithSortedCoupling) {
    const Vector a = normals(1000000, 10), b = normals(1000000, 11, 0.0, 2.0);
    EXPECT_NEAR(w_p_1d(a, b, 2.0).value, w2_gaussian(GaussianLaw::scalar(0, 1), GaussianLaw::scalar(0, 4)), 0.01);
}

TEST(W2Gaussian, RejectsNonDiagonal) {
    const GaussianLaw g{Vector{0.0, 0.0}, Matrix{{1.0, 0.5}, {0.5, 1.0}}};
    EXPECT_THROW(w2_gaussian(g, g), DomainError);
}

TEST(OuLaw, InitialLaw) {
    const auto g = ou_em_law(1.0, std::sqrt(2.0), StepSchedule::polynomial(2.0, 1.0), 1.7, 0);
    EXPECT_EQ(g.mean[0], 1.7);
    EXPECT_EQ(g.cov(0, 0), 0.0);
}

TEST(OuLaw, OneStep) {
    const auto g = ou_em_law(1.0, std::sqrt(2.0), StepSchedule::constant(0.5), 1.0, 1);
    EXPECT_DOUBLE_EQ(g.mean[0], 0.5);
    EXPECT_DOUBLE_EQ(g.cov(0, 0), 1.0);
}

TEST(OuLaw, StationaryLimit) {
    const auto o = oracle_ou_limit();
    EXPECT_TRUE(o.pass) << describe(o);
}

TEST(OuLaw, UnstableStepNamesIndex) {
    try {
        ou_em_law(1.0, 1.0, StepSchedule::polynomial(5.0, 1.0), 1.0, 10);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("k = 1"), std::string::npos) << e.what();
    }
}

TEST(OuLaw, VarianceConvergesForDivergentSchedules) {
    for (const auto& s : {StepSchedule::polynomial(1.0, 0.5), StepSchedule::polynomial(0.5, 0.7),
                          StepSchedule::polynomial(2.0, 1.0), StepSchedule::polynomial(1.5, 0.9)}) {
        ASSERT_TRUE(validate(s).valid());
        const auto g = ou_em_law(1.0, std::sqrt(2.0), s, 3.0, 1000000);
        EXPECT_NEAR(g.cov(0, 0), 1.0, 1e-3) << s.describe();
    }
}

TEST(OuSdeLaw, Examples) {
    const auto g0 = ou_sde_law(1.0, std::sqrt(2.0), 1.0, 0.0);
    EXPECT_EQ(g0.mean[0], 1.0);
    EXPECT_EQ(g0.cov(0, 0), 0.0);
    const auto inf = ou_sde_law(2.0, 3.0, 1.0, 1e6);
    EXPECT_EQ(inf.mean[0], 0.0);
    EXPECT_DOUBLE_EQ(inf.cov(0, 0), 9.0 / 4.0);
    const auto half = ou_sde_law(1.0, std::sqrt(2.0), 1.0, std::log(2.0));
    EXPECT_NEAR(half.mean[0], 0.5, 1e-15);
    EXPECT_NEAR(half.cov(0, 0), 0.75, 1e-15);
}

TEST(OuSdeLaw, DistanceToStationaryIsAnalyticAndDecreasing) {
    const auto stat = ou_stationary_law(1.0, std::sqrt(2.0));
    double prev = INFINITY;
    for (double t = 0.0; t < 20.0; t += 0.05) {
        const double d = w2_gaussian(ou_sde_law(1.0, std::sqrt(2.0), 1.0, t), stat);
        const double m = std::exp(-t);
        const double s = std::sqrt(1.0 - std::exp(-2.0 * t));
        EXPECT_NEAR(d, std::sqrt(m * m + (s - 1.0) * (s - 1.0)), 1e-14);
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(DistanceReportCsv, RowFormat) {
    DistanceReport r;
    r.p = 2.0;
    r.estimator = Estimator::Sliced;
    r.value = 0.25;
    r.std_error = 0.5;
    r.n_a = 10;
    r.n_b = 12;
    r.meta = {{"projections", 64}};
    EXPECT_EQ(std::string(kDistanceCsvHeader), "estimator,p,value,stderr,n_a,n_b,meta");
    EXPECT_EQ(to_csv_row(r),
              "sliced,2.0000000000000000e+00,2.5000000000000000e-01,5.0000000000000000e-01,10,12,\"{\"\"projections\"\":64}\"");
    r.std_error.reset();
    EXPECT_NE(to_csv_row(r).find("e-01,,10"), std::string::npos);
}

TEST(Estimators, NamesRoundTrip) {
    for (auto e : {Estimator::Sorted1D, Estimator::Sliced, Estimator::TVHistogram, Estimator::GaussianClosedForm,
                   Estimator::ExactOULaw, Estimator::DiracMoment})
        EXPECT_EQ(parse_estimator(estimator_name(e)), e);
    EXPECT_THROW(parse_estimator("nope"), ConfigError);
}
