#include "zmc/diagnostics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "zmc/errors.hpp"

namespace zmc {

std::vector<double> pearson_residuals(std::span<const std::int64_t> counts, std::span<const double> filtered,
                                      const Params& params, CountFamily family) {
    if (counts.size() != filtered.size()) throw InvalidSpec("pearson_residuals: lengths differ");
    std::vector<double> out(counts.size());
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double lambda = filtered[t];
        if (!(lambda > 0.0)) throw EstimationError("non-positive filtered intensity at index " + std::to_string(t));
        const auto m = conditional_moments(family, lambda, params);
        if (!(m.variance > 0.0))
            throw EstimationError("zero conditional variance at index " + std::to_string(t));
        out[t] = (static_cast<double>(counts[t]) - m.mean) / std::sqrt(m.variance);
    }
    return out;
}

namespace {

std::vector<double> autocorrelations(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n <= max_lag) throw InvalidSpec("series must be longer than max_lag");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double c0 = 0.0;
    for (const double v : x) c0 += (v - mean) * (v - mean);
    if (!(c0 > 0.0)) throw InvalidSpec("autocorrelation undefined for a constant series");
    std::vector<double> r(max_lag + 1);
    r[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) ck += (x[t] - mean) * (x[t + k] - mean);
        r[k] = ck / c0;
    }
    return r;
}

}  // namespace

LjungBox ljung_box(std::span<const double> series, std::size_t max_lag) {
    if (max_lag == 0) throw InvalidSpec("ljung_box needs max_lag >= 1");
    const auto r = autocorrelations(series, max_lag);
    const double n = static_cast<double>(series.size());
    double q = 0.0;
    for (std::size_t k = 1; k <= max_lag; ++k) q += r[k] * r[k] / (n - static_cast<double>(k));
    q *= n * (n + 2.0);
    const double p = boost::math::gamma_q(0.5 * static_cast<double>(max_lag), 0.5 * q);
    return {q, p, max_lag};
}

LjungBox ljung_box(std::span<const std::int64_t> counts, std::size_t max_lag) {
    std::vector<double> x(counts.begin(), counts.end());
    return ljung_box(std::span<const double>(x), max_lag);
}

AcfPacf sample_acf_pacf(std::span<const double> series, std::size_t max_lag) {
    AcfPacf out;
    out.acf = autocorrelations(series, max_lag);
    out.pacf.reserve(max_lag);
    // Durbin-Levinson recursion on the sample autocorrelations.
    std::vector<double> phi(max_lag + 1, 0.0), prev(max_lag + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = out.acf[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * out.acf[k - j];
        const double phikk = v > 0.0 ? num / v : 0.0;
        phi[k] = phikk;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - phikk * prev[k - j];
        v *= 1.0 - phikk * phikk;
        out.pacf.push_back(phikk);
        prev = phi;
    }
    return out;
}

std::vector<double> zip_gamma_marginal(const Params& q, std::size_t kmax) {
    std::vector<double> out(kmax + 1);
    const double log_base = q.p * std::log(q.beta / (q.beta + 1.0));
    const double log_ratio = -std::log(q.beta + 1.0);
    for (std::size_t k = 0; k <= kmax; ++k) {
        const double kd = static_cast<double>(k);
        const double nb = std::exp(std::lgamma(q.p + kd) - std::lgamma(kd + 1.0) - std::lgamma(q.p) + log_base +
                                   kd * log_ratio);
        out[k] = (1.0 - q.omega) * nb + (k == 0 ? q.omega : 0.0);
    }
    return out;
}

ProbTable fitted_marginal_probs(const ModelSpec& spec, std::size_t kmax, RandomSource& rng,
                                const MarginalOptions& options) {
    spec.validate();
    ProbTable table;
    if (spec.family == CountFamily::ZMP && !options.force_monte_carlo) {
        table.fitted = zip_gamma_marginal(spec.params, kmax);
    } else {
        if (options.draws < 2) throw InvalidSpec("Monte-Carlo marginal needs at least two draws");
        std::vector<double> sum(kmax + 1, 0.0), sq(kmax + 1, 0.0);
        for (std::size_t i = 0; i < options.draws; ++i) {
            const double lambda = rng.gamma(spec.params.p, spec.params.beta);
            if (!(lambda > 0.0)) continue;
            const auto row = zm_pmf_table(spec.family, lambda, spec.params, kmax);
            for (std::size_t k = 0; k <= kmax; ++k) {
                const double pk = row[k];
                sum[k] += pk;
                sq[k] += pk * pk;
            }
        }
        const double n = static_cast<double>(options.draws);
        table.fitted.resize(kmax + 1);
        for (std::size_t k = 0; k <= kmax; ++k) {
            table.fitted[k] = sum[k] / n;
            const double var = std::max(sq[k] / n - table.fitted[k] * table.fitted[k], 0.0);
            table.mc_error = std::max(table.mc_error, std::sqrt(var / n));
        }
    }
    const double total = std::accumulate(table.fitted.begin(), table.fitted.end(), 0.0);
    table.tail_mass = std::max(0.0, 1.0 - total);
    return table;
}

std::vector<double> empirical_probs(std::span<const std::int64_t> counts, std::size_t kmax) {
    std::vector<double> out(kmax + 1, 0.0);
    if (counts.empty()) return out;
    for (const auto y : counts)
        if (y >= 0 && static_cast<std::size_t>(y) <= kmax) out[static_cast<std::size_t>(y)] += 1.0;
    for (auto& v : out) v /= static_cast<double>(counts.size());
    return out;
}

}  // namespace zmc
