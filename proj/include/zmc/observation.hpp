#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zmc/intensity.hpp"
#include "zmc/random.hpp"

namespace zmc {

enum class CountFamily { ZMP, ZMNB };

std::string_view to_string(CountFamily family);
CountFamily parse_count_family(std::string_view name);

/// Full parameter vector. `a` and `c` only matter for ZMNB; `c` is chosen by
/// the user and never estimated.
struct Params {
    double omega = 0.0;
    double rho = 0.0;
    double beta = 1.0;
    double p = 1.0;
    double a = 0.0;
    int c = 1;

    double mu() const { return p / beta; }
    double sigma2() const { return p / (beta * beta); }
};

struct ModelSpec {
    CountFamily family = CountFamily::ZMP;
    IntensitySpec intensity;
    Params params;

    /// Builds a spec whose intensity block is taken from `params`.
    static ModelSpec make(CountFamily family, IntensityFamily intensity_family, const Params& params);

    /// Checks intensity invariants, agreement between `intensity` and
    /// `params`, the a/family pairing and omega <= 1. Throws InvalidSpec.
    void validate() const;
};

struct CountSeries {
    std::vector<std::int64_t> counts;
    std::vector<std::string> timestamps;  // empty or one per count

    std::size_t size() const { return counts.size(); }
    bool empty() const { return counts.empty(); }
};

/// P(Y = 0 | lambda) under the unmodified Poisson / negative binomial law.
double baseline_zero_prob(CountFamily family, double lambda, double a, int c);

struct OmegaInterval {
    double lower;
    double upper;
};

/// [-P0/(1-P0), 1].
OmegaInterval feasible_omega_interval(CountFamily family, double lambda, double a, int c);

/// Throws InfeasibleOmega when omega is outside the interval at this lambda.
void check_omega_feasible(CountFamily family, double lambda, const Params& params, std::size_t index = 0);

double zm_pmf(CountFamily family, std::int64_t k, double lambda, const Params& params);

/// zm_pmf for k = 0..kmax in one pass.
std::vector<double> zm_pmf_table(CountFamily family, double lambda, const Params& params, std::size_t kmax);

/// Exact inverse-CDF draws, one per intensity value.
CountSeries zm_sample(CountFamily family, const IntensityPath& lambda_path, const Params& params,
                      RandomSource& rng);

struct MomentPair {
    double mean;
    double variance;
};

MomentPair conditional_moments(CountFamily family, double lambda, const Params& params);

/// E[(Y - (1-omega) lambda)^4 | lambda]. a = 0 gives the Poisson case.
double zmnb_fourth_central_moment(double lambda, const Params& params);

/// Var((Y - (1-omega)lambda)^2 | lambda): fourth central moment minus the
/// squared conditional variance.
double quadratic_innovation_variance(double lambda, const Params& params);

MomentPair marginal_count_moments(const ModelSpec& spec);

double count_acf(const ModelSpec& spec, std::size_t k);

}  // namespace zmc
