#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "zmc/errors.hpp"
#include "zmc/intensity.hpp"

using namespace zmc;

namespace {

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double var_of(const std::vector<double>& x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / x.size();
}

double acf_at(const std::vector<double>& x, std::size_t k) {
    const double m = mean_of(x);
    double c0 = 0.0, ck = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        c0 += (x[t] - m) * (x[t] - m);
        if (t + k < x.size()) ck += (x[t] - m) * (x[t + k] - m);
    }
    return ck / c0;
}

}  // namespace

TEST(Ear1Innovation, ZeroRhoIsPureExponential) {
    IntensitySpec spec{IntensityFamily::EAR1, 0.0, 1.0, 1.0};
    RandomSource rng(11);
    std::vector<double> draws(100000);
    for (auto& d : draws) d = ear1_innovation_sample(spec, rng);
    const double se = std::sqrt(var_of(draws) / draws.size());
    EXPECT_NEAR(mean_of(draws), 1.0, 3.0 * se);
}

TEST(Ear1Innovation, UnitRhoRejected) {
    IntensitySpec spec{IntensityFamily::EAR1, 1.0, 1.0, 1.0};
    RandomSource rng(1);
    EXPECT_THROW(ear1_innovation_sample(spec, rng), InvalidSpec);
}

TEST(Ear1Innovation, CdfMatchesAtomPlusExponential) {
    const double rho = 0.5, beta = 2.0;
    IntensitySpec spec{IntensityFamily::EAR1, rho, beta, 1.0};
    RandomSource rng(12);
    const std::size_t n = 100000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = ear1_innovation_sample(spec, rng);
    std::sort(draws.begin(), draws.end());
    const auto cdf = [&](double x) { return x < 0.0 ? 0.0 : rho + (1.0 - rho) * (1.0 - std::exp(-beta * x)); };
    const double zeros = static_cast<double>(std::count(draws.begin(), draws.end(), 0.0)) / n;
    EXPECT_NEAR(zeros, 0.5, 4.0 * std::sqrt(0.25 / n));
    // Kolmogorov-Smirnov distance over the continuous part.
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (draws[i] == 0.0) continue;
        const double f = cdf(draws[i]);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
    }
    EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST(Ear1Innovation, WrongFamilyRejected) {
    IntensitySpec spec{IntensityFamily::GAR1, 0.5, 1.0, 2.0};
    RandomSource rng(1);
    EXPECT_THROW(ear1_innovation_sample(spec, rng), InvalidSpec);
}

TEST(Gar1Innovation, MeanMatchesStationarity) {
    IntensitySpec spec{IntensityFamily::GAR1, 0.5, 1.0, 2.0};
    RandomSource rng(13);
    std::vector<double> draws(100000);
    for (auto& d : draws) d = gar1_innovation_sample(spec, rng);
    const double se = std::sqrt(var_of(draws) / draws.size());
    EXPECT_NEAR(mean_of(draws), (1.0 - 0.5) * 2.0 / 1.0, 3.0 * se);
}

TEST(Gar1Innovation, EmptySumGivesZeroMass) {
    // P(N = 0) = rho^p; those draws are exactly zero.
    IntensitySpec spec{IntensityFamily::GAR1, 0.5, 1.0, 2.0};
    RandomSource rng(14);
    const std::size_t n = 100000;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < n; ++i) zeros += gar1_innovation_sample(spec, rng) == 0.0 ? 1 : 0;
    const double p0 = std::pow(0.5, 2.0);
    EXPECT_NEAR(static_cast<double>(zeros) / n, p0, 4.0 * std::sqrt(p0 * (1 - p0) / n));
}

TEST(Gar1Innovation, ZeroRhoAndWrongFamilyRejected) {
    RandomSource rng(1);
    EXPECT_THROW(gar1_innovation_sample({IntensityFamily::GAR1, 0.0, 1.0, 2.0}, rng), InvalidSpec);
    EXPECT_THROW(gar1_innovation_sample({IntensityFamily::EAR1, 0.5, 1.0, 1.0}, rng), InvalidSpec);
}

TEST(SimulateIntensity, Gar1MarginalMoments) {
    IntensitySpec spec{IntensityFamily::GAR1, 0.8, 2.0, 3.0};
    RandomSource rng(15);
    const auto path = simulate_intensity(spec, 100000, rng);
    // Long-run standard error of the mean for an AR(1) with coefficient rho.
    const double se = std::sqrt(0.75 / 100000.0 * (1.0 + 0.8) / (1.0 - 0.8));
    EXPECT_NEAR(mean_of(path.values), 1.5, 4.0 * se);
    EXPECT_NEAR(var_of(path.values), 0.75, 0.075);
}

TEST(SimulateIntensity, Gar1AcfAndMoments) {
    IntensitySpec spec{IntensityFamily::GAR1, 0.8, 2.0, 4.0};
    RandomSource rng(16);
    const auto path = simulate_intensity(spec, 100000, rng);
    const double se = std::sqrt(1.0 / 100000.0 * 9.0);
    EXPECT_NEAR(mean_of(path.values), 2.0, 4.0 * se);
    EXPECT_NEAR(var_of(path.values), 1.0, 0.1);
    for (std::size_t k = 1; k <= 5; ++k) EXPECT_NEAR(acf_at(path.values, k), std::pow(0.8, k), 0.03) << "lag " << k;
}

TEST(SimulateIntensity, Ear1IndependentWhenRhoZero) {
    IntensitySpec spec{IntensityFamily::EAR1, 0.0, 0.5, 1.0};
    RandomSource rng(17);
    const auto path = simulate_intensity(spec, 100000, rng);
    EXPECT_NEAR(acf_at(path.values, 1), 0.0, 0.01);
}

TEST(SimulateIntensity, Ear1MarginalAndAcf) {
    IntensitySpec spec{IntensityFamily::EAR1, 0.6, 0.5, 1.0};
    RandomSource rng(18);
    const auto path = simulate_intensity(spec, 100000, rng);
    const double se = std::sqrt(4.0 / 100000.0 * 1.6 / 0.4);
    EXPECT_NEAR(mean_of(path.values), 2.0, 4.0 * se);
    EXPECT_NEAR(var_of(path.values), 4.0, 0.4);
    for (std::size_t k = 1; k <= 5; ++k) EXPECT_NEAR(acf_at(path.values, k), std::pow(0.6, k), 0.03);
}

TEST(SimulateIntensity, StrictlyPositive) {
    for (const auto& spec : {IntensitySpec{IntensityFamily::GAR1, 0.95, 0.5, 0.3},
                             IntensitySpec{IntensityFamily::EAR1, 0.9, 3.0, 1.0},
                             IntensitySpec{IntensityFamily::GAR1, 0.0, 2.0, 0.5}}) {
        RandomSource rng(19);
        const auto path = simulate_intensity(spec, 20000, rng);
        EXPECT_TRUE(std::all_of(path.values.begin(), path.values.end(), [](double v) { return v > 0.0; }));
    }
}

TEST(SimulateIntensity, Reproducible) {
    IntensitySpec spec{IntensityFamily::GAR1, 0.7, 1.5, 2.5};
    RandomSource a(99), b(99);
    EXPECT_EQ(simulate_intensity(spec, 500, a).values, simulate_intensity(spec, 500, b).values);
}

TEST(IntensitySpecValidation, RejectsBadValues) {
    EXPECT_THROW((IntensitySpec{IntensityFamily::GAR1, -0.1, 1.0, 1.0}.validate()), InvalidSpec);
    EXPECT_THROW((IntensitySpec{IntensityFamily::GAR1, 0.5, 0.0, 1.0}.validate()), InvalidSpec);
    EXPECT_THROW((IntensitySpec{IntensityFamily::GAR1, 0.5, 1.0, -2.0}.validate()), InvalidSpec);
    EXPECT_THROW((IntensitySpec{IntensityFamily::EAR1, 0.5, 1.0, 2.0}.validate()), InvalidSpec);
    RandomSource rng(1);
    EXPECT_THROW(simulate_intensity({IntensityFamily::GAR1, 0.5, 1.0, 1.0}, 0, rng), InvalidSpec);
}

TEST(IntensityMoments, Examples) {
    const auto g = intensity_moments({IntensityFamily::GAR1, 0.5, 2.0, 4.0});
    EXPECT_DOUBLE_EQ(g.mean, 2.0);
    EXPECT_DOUBLE_EQ(g.variance, 1.0);
    const auto e = intensity_moments({IntensityFamily::EAR1, 0.5, 0.5, 1.0});
    EXPECT_DOUBLE_EQ(e.mean, 2.0);
    EXPECT_DOUBLE_EQ(e.variance, 4.0);
    const auto s = intensity_moments({IntensityFamily::GAR1, 0.7492, 2.1275, 9.9184});
    EXPECT_NEAR(s.mean, 4.6620, 5e-5);
    EXPECT_NEAR(s.variance, 2.1913, 5e-5);
}

TEST(IntensityAcf, Powers) {
    EXPECT_DOUBLE_EQ(intensity_acf({IntensityFamily::GAR1, 0.8, 1.0, 1.0}, 0), 1.0);
    EXPECT_NEAR(intensity_acf({IntensityFamily::GAR1, 0.8, 1.0, 1.0}, 3), 0.512, 1e-15);
    EXPECT_NEAR(intensity_acf({IntensityFamily::GAR1, 0.95, 1.0, 1.0}, 10), 0.5987, 5e-5);
}

TEST(RandomSource, DerivedStreamsDifferAndRepeat) {
    auto a = RandomSource::derived(5, 0);
    auto b = RandomSource::derived(5, 1);
    auto c = RandomSource::derived(5, 0);
    const auto x = a.next_u64();
    EXPECT_NE(x, b.next_u64());
    EXPECT_EQ(x, c.next_u64());
}
