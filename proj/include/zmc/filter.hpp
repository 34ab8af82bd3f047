#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zmc/observation.hpp"

namespace zmc {

/// Filter-facing parameterization: the intensity enters only through its
/// marginal mean and variance, so the estimator can move (mu, sigma2) freely.
struct FilterParams {
    CountFamily family = CountFamily::ZMP;
    double omega = 0.0;
    double rho = 0.0;
    double mu = 1.0;
    double sigma2 = 1.0;
    double a = 0.0;
    int c = 1;

    static FilterParams from(const ModelSpec& spec);
};

inline constexpr double kDefaultLambdaClamp = 1e-6;

struct FilterState {
    double lambda_filtered;  ///< lambda_{t|t}
    double error_var;        ///< C_{t|t}
};

struct FilterStep {
    double prediction;      ///< lambda_{t|t-1}
    double pred_var;        ///< C_{t|t-1}
    double gain;            ///< K_t
    double innovation;      ///< h_t = y_t - (1-omega) lambda_{t|t-1}
    double innovation_var;  ///< J_t = (1-omega)^2 C_{t|t-1} + (1-omega) vbar
    bool clamped = false;   ///< lambda_{t|t} was raised to the positivity floor
};

struct FilterPrior {
    double prediction;
    double pred_var;
};

/// Expected conditional variance factor E[V(lambda)]/(1-omega) under the
/// stationary intensity law.
double vbar(const FilterParams& params);
double vbar(const ModelSpec& spec);

/// Step-1 prior from a starting intensity lambda0 (with zero error variance).
FilterPrior gkf_init(const FilterParams& params, double lambda0);
FilterPrior gkf_init(const ModelSpec& spec, double lambda0);

struct StepOutput {
    FilterState state;
    FilterStep step;
};

StepOutput gkf_step(const FilterState& prev, std::int64_t y, const FilterParams& params,
                    double clamp = kDefaultLambdaClamp);
StepOutput gkf_step(const FilterState& prev, std::int64_t y, const ModelSpec& spec,
                    double clamp = kDefaultLambdaClamp);

struct FilterPass {
    FilterState initial;  ///< (lambda0, 0)
    std::vector<FilterState> states;
    std::vector<FilterStep> steps;
    std::size_t clamped = 0;

    std::size_t size() const { return states.size(); }
    /// lambda_{t-1|t-1} for step t (0-based), the initial state for t = 0.
    const FilterState& previous(std::size_t t) const { return t == 0 ? initial : states[t - 1]; }
};

/// Forward pass. lambda0 defaults to mu.
FilterPass gkf_filter(std::span<const std::int64_t> counts, const FilterParams& params,
                      std::optional<double> lambda0 = std::nullopt, double clamp = kDefaultLambdaClamp);
FilterPass gkf_filter(const CountSeries& series, const ModelSpec& spec,
                      std::optional<double> lambda0 = std::nullopt, double clamp = kDefaultLambdaClamp);

}  // namespace zmc
