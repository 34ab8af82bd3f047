#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "zmc/random.hpp"

namespace zmc {

/// Stationary first-order autoregressive intensity laws
///   lambda_t = rho * lambda_{t-1} + eta_t,
/// with gamma (GAR1) or exponential (EAR1) marginals.
enum class IntensityFamily { GAR1, EAR1 };

std::string_view to_string(IntensityFamily family);
IntensityFamily parse_intensity_family(std::string_view name);

struct IntensitySpec {
    IntensityFamily family = IntensityFamily::GAR1;
    double rho = 0.0;    ///< autoregressive coefficient, 0 <= rho < 1
    double beta = 1.0;   ///< marginal rate
    double p = 1.0;     ///< marginal gamma shape; fixed to 1 for EAR1

    /// Throws InvalidSpec when an invariant is violated.
    void validate() const;
};

struct IntensityPath {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Innovation of the EAR(1) sequence: 0 with probability rho, otherwise Exp(beta).
double ear1_innovation_sample(const IntensitySpec& spec, RandomSource& rng);

/// Innovation of the GAR(1) sequence as the compound sum
/// sum_{i<=N} rho^{U_i} E_i with N ~ Poisson(p * log(1/rho)).
/// Requires 0 < rho < 1; rho = 0 is the iid gamma case handled by
/// simulate_intensity directly.
double gar1_innovation_sample(const IntensitySpec& spec, RandomSource& rng);

/// Stationary path of length n; lambda_0 is drawn from the marginal law and
/// not included in the result.
IntensityPath simulate_intensity(const IntensitySpec& spec, std::size_t n, RandomSource& rng);

struct IntensityMoments {
    double mean;
    double variance;
};

IntensityMoments intensity_moments(const IntensitySpec& spec);

/// rho^k.
double intensity_acf(const IntensitySpec& spec, std::size_t k);

}  // namespace zmc
