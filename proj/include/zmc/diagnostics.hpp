#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zmc/observation.hpp"
#include "zmc/random.hpp"

namespace zmc {

/// (y_t - (1-omega) lambda_t) / sqrt(Var(Y_t | lambda_t)) with filtered
/// intensities in place of lambda_t. Throws EstimationError on a
/// non-positive variance.
std::vector<double> pearson_residuals(std::span<const std::int64_t> counts, std::span<const double> filtered,
                                      const Params& params, CountFamily family);

struct LjungBox {
    double statistic;
    double p_value;
    std::size_t lags;
};

/// Q = n(n+2) sum_{k<=h} r_k^2/(n-k), chi-square with h degrees of freedom.
LjungBox ljung_box(std::span<const double> series, std::size_t max_lag);
LjungBox ljung_box(std::span<const std::int64_t> counts, std::size_t max_lag);

struct AcfPacf {
    std::vector<double> acf;   ///< lags 0..max_lag
    std::vector<double> pacf;  ///< lags 1..max_lag
};

/// Biased-denominator sample ACF and Durbin-Levinson PACF.
AcfPacf sample_acf_pacf(std::span<const double> series, std::size_t max_lag);

struct ProbTable {
    std::vector<double> fitted;     ///< P(Y = k), k = 0..kmax
    std::vector<double> empirical;  ///< relative frequencies, k = 0..kmax
    double tail_mass = 0.0;         ///< fitted mass beyond kmax
    double mc_error = 0.0;          ///< largest per-cell Monte-Carlo standard error, 0 for closed form
};

struct MarginalOptions {
    std::size_t draws = 1'000'000;
    bool force_monte_carlo = false;
};

/// Stationary marginal P(Y = k). ZMP with gamma (or exponential) intensities
/// has a closed form; other models average the conditional pmf over
/// intensity draws from the stationary law.
ProbTable fitted_marginal_probs(const ModelSpec& spec, std::size_t kmax, RandomSource& rng,
                                const MarginalOptions& options = {});

/// Closed-form marginal; only valid for ZMP.
std::vector<double> zip_gamma_marginal(const Params& params, std::size_t kmax);

std::vector<double> empirical_probs(std::span<const std::int64_t> counts, std::size_t kmax);

}  // namespace zmc
