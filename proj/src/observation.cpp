#include "zmc/observation.hpp"

#include <cmath>
#include <sstream>

#include "zmc/errors.hpp"

namespace zmc {

namespace {

struct NbShape {
    double r;  // size
    double d;  // a * lambda^c
};

NbShape nb_shape(double lambda, double a, int c) {
    const double d = c == 1 ? a * lambda : a;
    const double r = c == 1 ? 1.0 / a : lambda / a;
    return {r, d};
}

void check_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw InvalidSpec("intensity must be positive and finite");
}

void check_family_a(CountFamily family, double a, int c) {
    if (family == CountFamily::ZMNB) {
        if (!(a > 0.0)) throw InvalidSpec("ZMNB requires a > 0 (use ZMP for a = 0)");
        if (c != 0 && c != 1) throw InvalidSpec("ZMNB form index c must be 0 or 1");
    }
}

// log of the unmodified pmf at k.
double log_baseline_pmf(CountFamily family, std::int64_t k, double lambda, double a, int c) {
    const double kd = static_cast<double>(k);
    if (family == CountFamily::ZMP) return kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0);
    const auto [r, d] = nb_shape(lambda, a, c);
    // log Gamma(k+r) - log Gamma(r) summed directly for moderate k: lgamma of a
    // huge r loses the digits that matter when a is tiny.
    double lg_ratio = 0.0;
    if (k <= 2000) {
        for (std::int64_t j = 0; j < k; ++j) lg_ratio += std::log(r + static_cast<double>(j));
    } else {
        lg_ratio = std::lgamma(kd + r) - std::lgamma(r);
    }
    return lg_ratio - std::lgamma(kd + 1.0) - r * std::log1p(d) + kd * (std::log(d) - std::log1p(d));
}

}  // namespace

std::string_view to_string(CountFamily family) { return family == CountFamily::ZMP ? "ZMP" : "ZMNB"; }

CountFamily parse_count_family(std::string_view name) {
    if (name == "ZMP" || name == "zmp") return CountFamily::ZMP;
    if (name == "ZMNB" || name == "zmnb") return CountFamily::ZMNB;
    throw InvalidSpec("unknown count family '" + std::string(name) + "'");
}

ModelSpec ModelSpec::make(CountFamily family, IntensityFamily intensity_family, const Params& params) {
    ModelSpec spec;
    spec.family = family;
    spec.params = params;
    spec.intensity = {intensity_family, params.rho, params.beta, params.p};
    spec.validate();
    return spec;
}

void ModelSpec::validate() const {
    intensity.validate();
    if (intensity.rho != params.rho || intensity.beta != params.beta || intensity.p != params.p)
        throw InvalidSpec("intensity block disagrees with params (rho, beta, p)");
    if (!(params.omega <= 1.0) || !std::isfinite(params.omega)) throw InvalidSpec("omega must be <= 1");
    if (family == CountFamily::ZMP && params.a != 0.0) throw InvalidSpec("ZMP requires a = 0");
    check_family_a(family, params.a, params.c);
}

double baseline_zero_prob(CountFamily family, double lambda, double a, int c) {
    check_lambda(lambda);
    if (family == CountFamily::ZMP) return std::exp(-lambda);
    check_family_a(family, a, c);
    const auto [r, d] = nb_shape(lambda, a, c);
    return std::exp(-r * std::log1p(d));
}

OmegaInterval feasible_omega_interval(CountFamily family, double lambda, double a, int c) {
    const double p0 = baseline_zero_prob(family, lambda, a, c);
    // -p0/(1-p0) = -1/expm1(-log p0) keeps precision when p0 is close to 1.
    const double lower = p0 < 0.5 ? -p0 / (1.0 - p0) : -1.0 / std::expm1(-std::log(p0));
    return {lower, 1.0};
}

void check_omega_feasible(CountFamily family, double lambda, const Params& params, std::size_t index) {
    const auto interval = feasible_omega_interval(family, lambda, params.a, params.c);
    if (params.omega < interval.lower || params.omega > interval.upper) {
        std::ostringstream msg;
        msg.precision(6);
        if (params.omega < interval.lower)
            msg << "omega " << params.omega << " below lower bound " << interval.lower;
        else
            msg << "omega " << params.omega << " above upper bound 1";
        msg << " at t=" << index << " (lambda=" << lambda << ")";
        throw InfeasibleOmega(msg.str(), index, lambda,
                              params.omega < interval.lower ? interval.lower : interval.upper);
    }
}

double zm_pmf(CountFamily family, std::int64_t k, double lambda, const Params& params) {
    check_lambda(lambda);
    check_family_a(family, params.a, params.c);
    check_omega_feasible(family, lambda, params);
    if (k < 0) return 0.0;
    const double w = params.omega;
    if (k == 0) return w + (1.0 - w) * baseline_zero_prob(family, lambda, params.a, params.c);
    if (w == 1.0) return 0.0;
    return (1.0 - w) * std::exp(log_baseline_pmf(family, k, lambda, params.a, params.c));
}

std::vector<double> zm_pmf_table(CountFamily family, double lambda, const Params& params, std::size_t kmax) {
    check_lambda(lambda);
    check_family_a(family, params.a, params.c);
    check_omega_feasible(family, lambda, params);
    std::vector<double> out(kmax + 1);
    const double w = params.omega;
    double r = 0.0, q = 0.0;
    if (family == CountFamily::ZMNB) {
        const auto s = nb_shape(lambda, params.a, params.c);
        r = s.r;
        q = s.d / (1.0 + s.d);
    }
    double log_base = log_baseline_pmf(family, 0, lambda, params.a, params.c);
    out[0] = w + (1.0 - w) * std::exp(log_base);
    for (std::size_t k = 1; k <= kmax; ++k) {
        const double kd = static_cast<double>(k);
        log_base += family == CountFamily::ZMP ? std::log(lambda / kd) : std::log((kd - 1.0 + r) / kd * q);
        out[k] = (1.0 - w) * std::exp(log_base);
    }
    return out;
}

CountSeries zm_sample(CountFamily family, const IntensityPath& lambda_path, const Params& params,
                      RandomSource& rng) {
    check_family_a(family, params.a, params.c);
    CountSeries out;
    out.counts.reserve(lambda_path.size());
    const double w = params.omega;
    for (std::size_t t = 0; t < lambda_path.size(); ++t) {
        const double lambda = lambda_path[t];
        check_lambda(lambda);
        check_omega_feasible(family, lambda, params, t);
        const double u = rng.uniform();

        double base = baseline_zero_prob(family, lambda, params.a, params.c);
        double cdf = w + (1.0 - w) * base;
        std::int64_t k = 0;
        if (u > cdf) {
            double ratio_r = 0.0, ratio_q = 0.0;
            if (family == CountFamily::ZMNB) {
                const auto s = nb_shape(lambda, params.a, params.c);
                ratio_r = s.r;
                ratio_q = s.d / (1.0 + s.d);
            }
            const auto m = conditional_moments(family, lambda, {0.0, 0.0, 1.0, 1.0, params.a, params.c});
            const double cutoff = m.mean + 50.0 * std::sqrt(m.variance) + 50.0;
            // Recurrences can underflow from an exp(-lambda) start for large
            // lambda; fall back to the log pmf when that happens.
            while (u > cdf) {
                ++k;
                if (base > 0.0) {
                    base *= family == CountFamily::ZMP
                                ? lambda / static_cast<double>(k)
                                : (static_cast<double>(k - 1) + ratio_r) / static_cast<double>(k) * ratio_q;
                } else {
                    base = std::exp(log_baseline_pmf(family, k, lambda, params.a, params.c));
                }
                cdf += (1.0 - w) * base;
                if (static_cast<double>(k) > cutoff) break;
            }
        }
        out.counts.push_back(k);
    }
    return out;
}

MomentPair conditional_moments(CountFamily family, double lambda, const Params& params) {
    check_lambda(lambda);
    const double w = params.omega;
    const double extra = family == CountFamily::ZMNB ? params.a * (params.c == 1 ? lambda : 1.0) : 0.0;
    return {(1.0 - w) * lambda, (1.0 - w) * (1.0 + w * lambda + extra) * lambda};
}

double zmnb_fourth_central_moment(double lambda, const Params& params) {
    check_lambda(lambda);
    const double w = params.omega;
    const double d = params.a * (params.c == 1 ? lambda : 1.0);
    // Cumulants of the baseline law (Poisson when d = 0).
    const double k2 = lambda * (1.0 + d);
    const double k3 = k2 * (1.0 + 2.0 * d);
    const double k4 = k2 * (1.0 + 6.0 * d + 6.0 * d * d);
    const double s = w * lambda;  // baseline mean minus the modified mean
    const double one_m_w = 1.0 - w;
    const double shifted = k4 + 3.0 * k2 * k2 + 4.0 * s * k3 + 6.0 * s * s * k2 + std::pow(s, 4);
    return w * std::pow(one_m_w * lambda, 4) + one_m_w * shifted;
}

double quadratic_innovation_variance(double lambda, const Params& params) {
    const double m4 = zmnb_fourth_central_moment(lambda, params);
    const double d = params.a * (params.c == 1 ? lambda : 1.0);
    const double v = (1.0 - params.omega) * (1.0 + params.omega * lambda + d) * lambda;
    return m4 - v * v;
}

namespace {

// Bracket in the marginal variance; ACF numerator is (1-omega) sigma2 rho^k.
double marginal_bracket(const ModelSpec& spec) {
    const auto& q = spec.params;
    const double mu = q.mu();
    const double s2 = q.sigma2();
    const double a = spec.family == CountFamily::ZMNB ? q.a : 0.0;
    if (spec.family == CountFamily::ZMNB && q.c == 0) return (1.0 + a) * mu + s2 + q.omega * mu * mu;
    return mu + (1.0 + a) * s2 + (q.omega + a) * mu * mu;
}

}  // namespace

MomentPair marginal_count_moments(const ModelSpec& spec) {
    spec.validate();
    const double w = spec.params.omega;
    return {(1.0 - w) * spec.params.mu(), (1.0 - w) * marginal_bracket(spec)};
}

double count_acf(const ModelSpec& spec, std::size_t k) {
    spec.validate();
    if (k == 0) return 1.0;
    const auto& q = spec.params;
    return (1.0 - q.omega) * q.sigma2() * std::pow(q.rho, static_cast<double>(k)) / marginal_bracket(spec);
}

}  // namespace zmc
