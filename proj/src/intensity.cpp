#include "zmc/intensity.hpp"

#include <cmath>
#include <string>

#include "zmc/errors.hpp"

namespace zmc {

std::string_view to_string(IntensityFamily family) {
    return family == IntensityFamily::GAR1 ? "GAR1" : "EAR1";
}

IntensityFamily parse_intensity_family(std::string_view name) {
    if (name == "GAR1" || name == "gar1") return IntensityFamily::GAR1;
    if (name == "EAR1" || name == "ear1") return IntensityFamily::EAR1;
    throw InvalidSpec("unknown intensity family '" + std::string(name) + "'");
}

void IntensitySpec::validate() const {
    if (!(rho >= 0.0 && rho < 1.0))
        throw InvalidSpec("intensity rho must satisfy 0 <= rho < 1, got " + std::to_string(rho));
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidSpec("intensity beta must be positive, got " + std::to_string(beta));
    if (!(p > 0.0) || !std::isfinite(p))
        throw InvalidSpec("intensity shape p must be positive, got " + std::to_string(p));
    if (family == IntensityFamily::EAR1 && p != 1.0)
        throw InvalidSpec("EAR1 intensities require p = 1");
}

double ear1_innovation_sample(const IntensitySpec& spec, RandomSource& rng) {
    spec.validate();
    if (spec.family != IntensityFamily::EAR1)
        throw InvalidSpec("ear1_innovation_sample called with a GAR1 spec");
    if (rng.uniform() < spec.rho) return 0.0;
    return rng.exponential(spec.beta);
}

double gar1_innovation_sample(const IntensitySpec& spec, RandomSource& rng) {
    spec.validate();
    if (spec.family != IntensityFamily::GAR1)
        throw InvalidSpec("gar1_innovation_sample called with an EAR1 spec");
    if (spec.rho <= 0.0)
        throw InvalidSpec("GAR1 compound-Poisson innovation needs rho > 0 (rho = 0 is iid gamma)");
    const auto count = rng.poisson(spec.p * std::log(1.0 / spec.rho));
    double eta = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const double u = rng.uniform();
        eta += std::pow(spec.rho, u) * rng.exponential(spec.beta);
    }
    return eta;
}

IntensityPath simulate_intensity(const IntensitySpec& spec, std::size_t n, RandomSource& rng) {
    spec.validate();
    if (n == 0) throw InvalidSpec("simulate_intensity needs n >= 1");

    IntensityPath path;
    path.values.reserve(n);
    if (spec.rho == 0.0) {
        for (std::size_t t = 0; t < n; ++t) path.values.push_back(rng.gamma(spec.p, spec.beta));
        return path;
    }

    double lambda = rng.gamma(spec.p, spec.beta);
    for (std::size_t t = 0; t < n; ++t) {
        const double eta = spec.family == IntensityFamily::GAR1 ? gar1_innovation_sample(spec, rng)
                                                                : ear1_innovation_sample(spec, rng);
        lambda = spec.rho * lambda + eta;
        path.values.push_back(lambda);
    }
    return path;
}

IntensityMoments intensity_moments(const IntensitySpec& spec) {
    spec.validate();
    return {spec.p / spec.beta, spec.p / (spec.beta * spec.beta)};
}

double intensity_acf(const IntensitySpec& spec, std::size_t k) {
    spec.validate();
    return std::pow(spec.rho, static_cast<double>(k));
}

}  // namespace zmc
