#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zmc/filter.hpp"
#include "zmc/observation.hpp"
#include "zmc/random.hpp"

namespace zmc {

struct SampleMoments {
    double ybar = 0.0;
    double s2 = 0.0;  ///< 1/n denominator
    double r1 = 0.0;
    std::array<double, 3> factorial{};  ///< means of Y, Y(Y-1), Y(Y-1)(Y-2)
    double zero_fraction = 0.0;

    static SampleMoments from(std::span<const std::int64_t> counts);
};

/// Inverts (ybar, s2, r1) under ZMP with exponential intensities.
/// Throws InfeasibleInit when the inversion leaves the parameter space.
Params moment_init_ear1(const SampleMoments& moments);

/// Inverts the first three factorial moments and r1 under ZMP with gamma
/// intensities. Throws InfeasibleInit on failure.
Params moment_init_gar1_factorial(const SampleMoments& moments);

struct GridAxis {
    double lo;
    double hi;
    int steps;

    std::vector<double> points() const;
};

struct GridConfig {
    GridAxis rho{0.05, 0.95, 10};
    GridAxis omega{-0.4, 0.9, 14};
    GridAxis beta{0.25, 5.0, 10};
    GridAxis p{0.25, 5.0, 10};
    GridAxis a{0.05, 2.0, 8};
};

/// Model description without parameter values.
struct ModelStructure {
    CountFamily family = CountFamily::ZMP;
    IntensityFamily intensity = IntensityFamily::GAR1;
    int c = 1;  ///< ZMNB form index, ignored for ZMP
};

/// Relative squared mismatch between sample (ybar, s2, r1) and the
/// model-implied marginal mean, variance and lag-1 ACF.
double moment_mismatch(const SampleMoments& moments, const ModelStructure& model, const Params& params);

/// Grid point minimizing moment_mismatch. Points whose omega is infeasible
/// at lambda = mu are skipped; throws InfeasibleInit if none remain.
Params grid_search_init(std::span<const std::int64_t> counts, const ModelStructure& model,
                        const GridConfig& grid);

struct FitConfig {
    double tol = 1e-6;           ///< relative parameter change
    double ef_tol = 1e-6;        ///< max |EF| / n
    int max_iter = 500;
    double jacobian_step = 1e-5;  ///< relative central-difference step
    int max_halvings = 20;
    /// Largest Newton move: absolute for omega and rho, relative to the
    /// current value for mu, sigma2 and a.
    double max_step = 0.2;
    double lambda_clamp = kDefaultLambdaClamp;
    double a_max = 10.0;
    double rho_max = 0.999;
    double omega_max = 0.999;
    double omega_margin = 1e-6;
    double floor = 1e-4;  ///< lower bound for mu, sigma2 and a
    /// Starting rho values tried, with the other initial values kept, when
    /// the first solve does not converge.
    std::vector<double> restart_rho{0.5, 0.3, 0.7, 0.9};
    GridConfig grid;
};

struct EFSystem {
    std::array<double, 3> components{};  ///< g*(omega), g*(mu), g*(rho)
    Eigen::Matrix3d jacobian = Eigen::Matrix3d::Zero();
    double zero_mass = 0.0;  ///< sum of (1{y=0} - pi_t) / mean pi(1-pi)
};

/// Optimal linear EFs in h_t with filtered values held fixed.
/// `filtered_prev[t]` and `error_var_prev[t]` are lambda_{t-1|t-1} and
/// C_{t-1|t-1}; an empty error-variance span means zeros.
EFSystem ef_components(std::span<const std::int64_t> counts, std::span<const double> filtered_prev,
                       const FilterParams& params, std::span<const double> error_var_prev = {});

/// Latent one-step residuals lambda_t - rho lambda_{t-1} - (1-rho) mu for a
/// path whose first element is the starting value.
std::vector<double> latent_innovations(std::span<const double> path, double rho, double mu);

/// sigma2 from a path whose first element is the starting value. Passing the
/// filter error variances (same alignment) adds the C_t - rho^2 C_{t-1}
/// correction for filtering noise.
double estimate_sigma2(std::span<const double> path, double rho, double mu,
                       std::span<const double> error_var = {});

/// Zero probability implied by the filter's Gamma(m, C) predictive law for
/// the intensity.
double predictive_zero_prob(const FilterParams& params, double prediction, double pred_var);

struct QuadraticEFResult {
    double a;
    bool boundary;  ///< data favour a = 0 (no extra dispersion)
};

/// Value of the quadratic EF for dispersion `a` over a fixed filter pass.
double quadratic_ef(std::span<const std::int64_t> counts, const FilterPass& pass, const FilterParams& params,
                    double a);

/// Root of quadratic_ef on (0, a_max]. Throws EstimationError when the EF
/// stays negative up to a_max.
QuadraticEFResult solve_quadratic_ef(std::span<const std::int64_t> counts, const FilterPass& pass,
                                     const FilterParams& params, double a_max = 10.0);

struct FitResult {
    Params params_hat;
    std::optional<Params> se;
    int iterations = 0;
    bool converged = false;
    double ef_norm = 0.0;  ///< max |EF| / n at the final iterate
    int projections = 0;   ///< iterates clipped to the feasible box
    std::string init_source;
    Params init;
    int starts = 1;  ///< solves attempted by fit_model
    std::vector<Params> trace;
    FilterPass filtered;
    std::vector<double> residuals;
};

/// Joint root of (g*(mu), g*(rho), zero-mass EF, sigma2 fixed point[, a EF])
/// with the filter re-run at every evaluation.
FitResult solve_ef_block(std::span<const std::int64_t> counts, const ModelStructure& model, const Params& init,
                         const FitConfig& config = {});

struct InitResult {
    Params params;
    std::string source;  ///< "ear1-moments", "factorial-moments" or "grid"
};

/// Moment initializer for the model, falling back to grid search.
InitResult initialize(std::span<const std::int64_t> counts, const ModelStructure& model,
                      const FitConfig& config = {});

/// initialize + solve_ef_block, restarting from the grid initializer and
/// from config.restart_rho until a solve converges. Returns the first
/// converged result, otherwise the attempt with the smallest EF norm.
FitResult fit_model(std::span<const std::int64_t> counts, const ModelStructure& model,
                    const FitConfig& config = {});

/// Sample standard deviations (n - 1 denominator) of each parameter.
Params empirical_standard_errors(std::span<const Params> estimates);

struct BootstrapResult {
    Params se;
    std::size_t completed = 0;
    std::size_t failed = 0;
};

/// Parametric bootstrap: replicate i simulates n points from `spec_hat` with
/// RandomSource::derived(seed, i) and refits. Non-converged or failed fits are
/// excluded; more than half failing throws EstimationError.
BootstrapResult bootstrap_se(const ModelSpec& spec_hat, std::size_t n, std::size_t reps, std::uint64_t seed,
                             const FitConfig& config = {}, unsigned jobs = 1);

}  // namespace zmc
