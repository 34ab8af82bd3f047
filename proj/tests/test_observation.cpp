#include <gtest/gtest.h>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "zmc/errors.hpp"
#include "zmc/observation.hpp"

using namespace zmc;

namespace {

// Independent pmf built from Boost distributions.
double oracle_pmf(CountFamily family, long k, double lambda, double omega, double a, int c) {
    double base0, basek;
    if (family == CountFamily::ZMP) {
        boost::math::poisson_distribution<double> d(lambda);
        base0 = boost::math::pdf(d, 0.0);
        basek = boost::math::pdf(d, static_cast<double>(k));
    } else {
        const double r = c == 1 ? 1.0 / a : lambda / a;
        const double success = 1.0 / (1.0 + a * (c == 1 ? lambda : 1.0));
        boost::math::negative_binomial_distribution<double> d(r, success);
        base0 = boost::math::pdf(d, 0.0);
        basek = boost::math::pdf(d, static_cast<double>(k));
    }
    return k == 0 ? omega + (1.0 - omega) * base0 : (1.0 - omega) * basek;
}

struct Brute {
    double total, mean, var, m4;
};

Brute brute_moments(CountFamily family, double lambda, double omega, double a, int c, long kmax) {
    Brute b{0, 0, 0, 0};
    std::vector<double> p(kmax + 1);
    for (long k = 0; k <= kmax; ++k) {
        p[k] = oracle_pmf(family, k, lambda, omega, a, c);
        b.total += p[k];
        b.mean += k * p[k];
    }
    for (long k = 0; k <= kmax; ++k) {
        const double d = k - b.mean;
        b.var += d * d * p[k];
        b.m4 += d * d * d * d * p[k];
    }
    return b;
}

Params make(double omega, double a, int c) {
    Params q;
    q.omega = omega;
    q.a = a;
    q.c = c;
    return q;
}

double rel(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); }

}  // namespace

TEST(BaselineZeroProb, Examples) {
    EXPECT_NEAR(baseline_zero_prob(CountFamily::ZMP, 1.0, 0.0, 1), 0.367879, 5e-7);
    EXPECT_NEAR(baseline_zero_prob(CountFamily::ZMNB, 2.0, 1.0, 1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(baseline_zero_prob(CountFamily::ZMNB, 2.0, 0.5, 0), 0.197531, 5e-7);
    EXPECT_THROW(baseline_zero_prob(CountFamily::ZMNB, 2.0, 0.0, 1), InvalidSpec);
}

TEST(FeasibleOmega, Examples) {
    EXPECT_NEAR(feasible_omega_interval(CountFamily::ZMP, 1.0, 0, 1).lower, -0.58198, 5e-6);
    EXPECT_DOUBLE_EQ(feasible_omega_interval(CountFamily::ZMP, 1.0, 0, 1).upper, 1.0);
    const double far = feasible_omega_interval(CountFamily::ZMP, 60.0, 0, 1).lower;
    EXPECT_LT(far, 0.0);
    EXPECT_GT(far, -1e-20);
    EXPECT_NEAR(feasible_omega_interval(CountFamily::ZMNB, 2.0, 1.0, 1).lower, -0.5, 1e-15);
}

TEST(ZmPmf, Examples) {
    EXPECT_NEAR(zm_pmf(CountFamily::ZMP, 0, 1.0, make(0.0, 0.0, 1)), 0.367879, 5e-7);
    EXPECT_DOUBLE_EQ(zm_pmf(CountFamily::ZMP, 0, 3.7, make(1.0, 0.0, 1)), 1.0);
    EXPECT_DOUBLE_EQ(zm_pmf(CountFamily::ZMP, 4, 3.7, make(1.0, 0.0, 1)), 0.0);
}

TEST(ZmPmf, InfeasibleOmegaNamesBound) {
    try {
        zm_pmf(CountFamily::ZMP, 0, 1.0, make(-0.7, 0.0, 1));
        FAIL() << "expected InfeasibleOmega";
    } catch (const InfeasibleOmega& e) {
        EXPECT_NEAR(e.bound(), -0.58198, 5e-6);
        EXPECT_NE(std::string(e.what()).find("lower bound"), std::string::npos);
    }
    EXPECT_THROW(zm_pmf(CountFamily::ZMP, 0, 1.0, make(1.2, 0.0, 1)), InfeasibleOmega);
}

TEST(ZmPmf, MatchesOracleAndNormalizes) {
    for (const double lambda : {0.5, 2.0, 6.0})
        for (const double omega : {-0.005, 0.2, 0.6})
            for (const double a : {0.5, 1.5})
                for (const int c : {0, 1})
                    for (const auto family : {CountFamily::ZMP, CountFamily::ZMNB}) {
                        const double aa = family == CountFamily::ZMP ? 0.0 : a;
                        const auto q = make(omega, aa, c);
                        // -0.005 is infeasible for the Poisson law at lambda = 6.
                        if (omega < feasible_omega_interval(family, lambda, aa, c).lower) continue;
                        const auto m = conditional_moments(family, lambda, q);
                        const long kmax = static_cast<long>(10.0 * (m.mean + 10.0 * std::sqrt(m.variance)));
                        double total = 0.0;
                        for (long k = 0; k <= kmax; ++k) {
                            const double p = zm_pmf(family, k, lambda, q);
                            const double o = oracle_pmf(family, k, lambda, omega, aa, c);
                            EXPECT_LE(std::abs(p - o), 1e-12 + 1e-9 * o) << k;
                            total += p;
                        }
                        EXPECT_NEAR(total, 1.0, 1e-10);
                    }
}

TEST(ZmPmf, TableMatchesPointwise) {
    const auto q = make(0.1, 0.7, 0);
    const auto table = zm_pmf_table(CountFamily::ZMNB, 3.0, q, 40);
    for (std::size_t k = 0; k <= 40; ++k)
        EXPECT_NEAR(table[k], zm_pmf(CountFamily::ZMNB, static_cast<long>(k), 3.0, q), 1e-14);
}

TEST(Moments, MatchBruteForceOnGrid) {
    for (const double lambda : {0.5, 2.0, 6.0})
        for (const double omega : {-0.005, 0.2, 0.6})
            for (const double a : {0.5, 1.5})
                for (const int c : {0, 1}) {
                    const auto q = make(omega, a, c);
                    const auto b = brute_moments(CountFamily::ZMNB, lambda, omega, a, c, 3000);
                    const auto m = conditional_moments(CountFamily::ZMNB, lambda, q);
                    EXPECT_LT(rel(m.mean, b.mean), 1e-8);
                    EXPECT_LT(rel(m.variance, b.var), 1e-8);
                    EXPECT_LT(rel(zmnb_fourth_central_moment(lambda, q), b.m4), 1e-8);
                    EXPECT_LT(rel(quadratic_innovation_variance(lambda, q), b.m4 - b.var * b.var), 1e-8);

                    const auto p = make(omega, 0.0, c);
                    const auto bp = brute_moments(CountFamily::ZMP, lambda, omega, 0.0, c, 500);
                    EXPECT_LT(rel(conditional_moments(CountFamily::ZMP, lambda, p).variance, bp.var), 1e-8);
                    EXPECT_LT(rel(zmnb_fourth_central_moment(lambda, p), bp.m4), 1e-8);
                }
}

TEST(Moments, Examples) {
    const auto p1 = conditional_moments(CountFamily::ZMP, 3.0, make(0.0, 0.0, 1));
    EXPECT_DOUBLE_EQ(p1.mean, 3.0);
    EXPECT_DOUBLE_EQ(p1.variance, 3.0);
    const auto p2 = conditional_moments(CountFamily::ZMP, 2.0, make(0.5, 0.0, 1));
    EXPECT_DOUBLE_EQ(p2.mean, 1.0);
    EXPECT_DOUBLE_EQ(p2.variance, 2.0);
    const auto nb = conditional_moments(CountFamily::ZMNB, 2.0, make(0.2, 0.5, 1));
    EXPECT_NEAR(nb.mean, 1.6, 1e-15);
    EXPECT_NEAR(nb.variance, 3.84, 1e-14);
    EXPECT_NEAR(zmnb_fourth_central_moment(1.0, make(0.0, 0.0, 1)), 4.0, 1e-14);
}

TEST(Moments, NamedFourthMomentCases) {
    const auto b1 = brute_moments(CountFamily::ZMNB, 2.0, 0.2, 0.5, 1, 3000);
    EXPECT_LT(rel(zmnb_fourth_central_moment(2.0, make(0.2, 0.5, 1)), b1.m4), 1e-8);
    const auto b0 = brute_moments(CountFamily::ZMNB, 1.0, 0.0, 0.5, 0, 3000);
    EXPECT_LT(rel(zmnb_fourth_central_moment(1.0, make(0.0, 0.5, 0)), b0.m4), 1e-8);
}

TEST(ZmnbLimit, ApproachesZmp) {
    for (const int c : {0, 1}) {
        const auto nb = make(0.2, 1e-8, c);
        const auto po = make(0.2, 0.0, c);
        for (long k = 0; k <= 20; ++k)
            EXPECT_NEAR(zm_pmf(CountFamily::ZMNB, k, 2.5, nb), zm_pmf(CountFamily::ZMP, k, 2.5, po), 1e-6);
        const auto tiny = make(0.2, 1e-6, c);
        EXPECT_NEAR(conditional_moments(CountFamily::ZMNB, 2.5, tiny).variance,
                    conditional_moments(CountFamily::ZMP, 2.5, po).variance, 1e-5);
        EXPECT_NEAR(zmnb_fourth_central_moment(2.5, tiny), zmnb_fourth_central_moment(2.5, po), 2e-4);
        Params g = tiny;
        g.rho = 0.6;
        g.beta = 2.0;
        g.p = 3.0;
        Params gp = g;
        gp.a = 0.0;
        const auto s_nb = ModelSpec::make(CountFamily::ZMNB, IntensityFamily::GAR1, g);
        const auto s_p = ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, gp);
        EXPECT_NEAR(marginal_count_moments(s_nb).variance, marginal_count_moments(s_p).variance, 1e-5);
        EXPECT_NEAR(count_acf(s_nb, 1), count_acf(s_p, 1), 1e-5);
    }
}

TEST(ZmSample, AllZerosWhenOmegaOne) {
    RandomSource rng(3);
    IntensityPath path{std::vector<double>(1000, 2.0)};
    const auto s = zm_sample(CountFamily::ZMP, path, make(1.0, 0.0, 1), rng);
    EXPECT_TRUE(std::all_of(s.counts.begin(), s.counts.end(), [](auto y) { return y == 0; }));
}

TEST(ZmSample, PoissonMean) {
    RandomSource rng(4);
    IntensityPath path{std::vector<double>(100000, 2.0)};
    const auto s = zm_sample(CountFamily::ZMP, path, make(0.0, 0.0, 1), rng);
    const double mean = std::accumulate(s.counts.begin(), s.counts.end(), 0.0) / s.size();
    EXPECT_NEAR(mean, 2.0, 3.0 * std::sqrt(2.0 / s.size()));
}

TEST(ZmSample, DeflatedZeroFrequency) {
    RandomSource rng(5);
    IntensityPath path{std::vector<double>(100000, 1.0)};
    const auto s = zm_sample(CountFamily::ZMP, path, make(-0.1, 0.0, 1), rng);
    const double zeros = std::count(s.counts.begin(), s.counts.end(), 0) / static_cast<double>(s.size());
    const double expect = -0.1 + 1.1 * std::exp(-1.0);
    EXPECT_NEAR(zeros, expect, 4.0 * std::sqrt(expect * (1 - expect) / s.size()));
}

TEST(ZmSample, MatchesPmfFrequencies) {
    RandomSource rng(6);
    const auto q = make(0.15, 0.8, 1);
    IntensityPath path{std::vector<double>(200000, 3.0)};
    const auto s = zm_sample(CountFamily::ZMNB, path, q, rng);
    for (long k = 0; k <= 6; ++k) {
        const double p = zm_pmf(CountFamily::ZMNB, k, 3.0, q);
        const double f = std::count(s.counts.begin(), s.counts.end(), k) / static_cast<double>(s.size());
        EXPECT_NEAR(f, p, 4.0 * std::sqrt(p * (1 - p) / s.size())) << k;
    }
}

TEST(ZmSample, InfeasibleReportsIndex) {
    RandomSource rng(7);
    IntensityPath path{{5.0, 5.0, 0.2, 5.0}};
    try {
        zm_sample(CountFamily::ZMP, path, make(-0.3, 0.0, 1), rng);
        FAIL();
    } catch (const InfeasibleOmega& e) {
        EXPECT_EQ(e.index(), 0u);
    }
    try {
        zm_sample(CountFamily::ZMP, IntensityPath{{0.2, 0.5, 8.0}}, make(-0.01, 0.0, 1), rng);
        FAIL();
    } catch (const InfeasibleOmega& e) {
        EXPECT_EQ(e.index(), 2u);
        EXPECT_DOUBLE_EQ(e.lambda(), 8.0);
    }
}

TEST(MarginalMoments, Examples) {
    Params q = make(0.2, 0.0, 1);
    q.beta = 2.0;
    q.p = 4.0;
    q.rho = 0.8;
    const auto spec = ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, q);
    const auto m = marginal_count_moments(spec);
    EXPECT_NEAR(m.mean, 1.6, 1e-15);
    EXPECT_NEAR(m.variance, 3.04, 1e-14);
    EXPECT_NEAR(count_acf(spec, 1), 0.64 / 3.8, 1e-15);

    Params z = q;
    z.omega = 0.0;
    EXPECT_NEAR(marginal_count_moments(ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, z)).variance, 3.0,
                1e-14);
    Params nb = z;
    nb.a = 1.0;
    nb.c = 0;
    EXPECT_NEAR(marginal_count_moments(ModelSpec::make(CountFamily::ZMNB, IntensityFamily::GAR1, nb)).variance,
                2.0 * 2.0 + 1.0, 1e-14);
}

TEST(MarginalMoments, MonteCarloAgreement) {
    Params q = make(0.2, 0.0, 1);
    q.beta = 2.0;
    q.p = 4.0;
    q.rho = 0.8;
    const auto spec = ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, q);
    RandomSource rng(8);
    const std::size_t n = 1000000;
    const auto path = simulate_intensity(spec.intensity, n, rng);
    const auto s = zm_sample(spec.family, path, q, rng);
    std::vector<double> y(s.counts.begin(), s.counts.end());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double c0 = 0.0;
    for (double v : y) c0 += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 1.6, 0.02);
    EXPECT_NEAR(c0 / n, 3.04, 0.1);
    for (std::size_t k = 1; k <= 5; ++k) {
        double ck = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) ck += (y[t] - mean) * (y[t + k] - mean);
        EXPECT_NEAR(ck / c0, count_acf(spec, k), 0.02) << k;
    }
    // Conditional uncorrelatedness of Y_t - (1-omega) lambda_t across t.
    double cov = 0.0, var = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double e0 = y[t] - 0.8 * path[t];
        const double e1 = y[t + 1] - 0.8 * path[t + 1];
        cov += e0 * e1;
        var += e0 * e0;
    }
    EXPECT_NEAR(cov / var, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(CountAcf, BoundedByIntensityAcf) {
    for (const double omega : {-0.05, 0.0, 0.3, 0.8})
        for (const double a : {0.0, 0.4})
            for (const int c : {0, 1}) {
                Params q = make(omega, a, c);
                q.rho = 0.7;
                q.beta = 1.5;
                q.p = 2.0;
                const auto fam = a > 0 ? CountFamily::ZMNB : CountFamily::ZMP;
                const auto spec = ModelSpec::make(fam, IntensityFamily::GAR1, q);
                for (std::size_t k = 1; k <= 10; ++k) EXPECT_LE(count_acf(spec, k), std::pow(0.7, k));
                EXPECT_LT(count_acf(spec, 200), 1e-30);
            }
}

TEST(ModelSpecValidation, Invariants) {
    Params q = make(0.2, 0.5, 1);
    EXPECT_THROW(ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, q), InvalidSpec);
    q.a = 0.0;
    EXPECT_THROW(ModelSpec::make(CountFamily::ZMNB, IntensityFamily::GAR1, q), InvalidSpec);
    auto spec = ModelSpec::make(CountFamily::ZMP, IntensityFamily::GAR1, q);
    spec.intensity.rho = 0.3;
    EXPECT_THROW(spec.validate(), InvalidSpec);
}
