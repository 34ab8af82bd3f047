#include "zmc/filter.hpp"

#include <cmath>
#include <string>

#include "zmc/errors.hpp"

namespace zmc {

FilterParams FilterParams::from(const ModelSpec& spec) {
    spec.validate();
    const auto& q = spec.params;
    return {spec.family, q.omega, q.rho, q.mu(), q.sigma2(), q.a, q.c};
}

double vbar(const FilterParams& q) {
    const double second = q.sigma2 + q.mu * q.mu;
    if (q.family == CountFamily::ZMNB) {
        if (q.c == 0) return (1.0 + q.a) * q.mu + q.omega * second;
        return q.mu + (q.omega + q.a) * second;
    }
    return q.mu + q.omega * second;
}

double vbar(const ModelSpec& spec) { return vbar(FilterParams::from(spec)); }

FilterPrior gkf_init(const FilterParams& q, double lambda0) {
    if (!(lambda0 > 0.0)) throw InvalidSpec("gkf_init needs lambda0 > 0");
    return {q.rho * lambda0 + (1.0 - q.rho) * q.mu, (1.0 - q.rho * q.rho) * q.sigma2};
}

FilterPrior gkf_init(const ModelSpec& spec, double lambda0) {
    return gkf_init(FilterParams::from(spec), lambda0);
}

StepOutput gkf_step(const FilterState& prev, std::int64_t y, const FilterParams& q, double clamp) {
    const double one_m_w = 1.0 - q.omega;
    const double v = vbar(q);

    FilterStep step;
    step.prediction = q.rho * prev.lambda_filtered + (1.0 - q.rho) * q.mu;
    step.pred_var = q.rho * q.rho * prev.error_var + (1.0 - q.rho * q.rho) * q.sigma2;
    step.innovation = static_cast<double>(y) - one_m_w * step.prediction;
    step.innovation_var = one_m_w * one_m_w * step.pred_var + one_m_w * v;
    step.gain = step.innovation_var > 0.0 ? one_m_w * step.pred_var / step.innovation_var : 0.0;

    FilterState next;
    next.lambda_filtered = step.prediction + step.gain * step.innovation;
    next.error_var = (1.0 - step.gain * one_m_w) * step.pred_var;
    if (next.error_var < 0.0) next.error_var = 0.0;
    if (!(next.lambda_filtered > clamp)) {
        next.lambda_filtered = clamp;
        step.clamped = true;
    }
    return {next, step};
}

StepOutput gkf_step(const FilterState& prev, std::int64_t y, const ModelSpec& spec, double clamp) {
    return gkf_step(prev, y, FilterParams::from(spec), clamp);
}

FilterPass gkf_filter(std::span<const std::int64_t> counts, const FilterParams& q,
                      std::optional<double> lambda0, double clamp) {
    if (counts.empty()) throw InvalidSpec("gkf_filter needs a non-empty series");
    FilterPass pass;
    pass.initial = {lambda0.value_or(q.mu), 0.0};
    if (!(pass.initial.lambda_filtered > 0.0)) throw InvalidSpec("gkf_filter needs lambda0 > 0");
    pass.states.reserve(counts.size());
    pass.steps.reserve(counts.size());
    FilterState state = pass.initial;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        if (counts[t] < 0) throw ParseError("negative count at index " + std::to_string(t));
        const auto out = gkf_step(state, counts[t], q, clamp);
        if (!std::isfinite(out.state.lambda_filtered))
            throw EstimationError("filter diverged at index " + std::to_string(t));
        state = out.state;
        pass.clamped += out.step.clamped ? 1 : 0;
        pass.states.push_back(out.state);
        pass.steps.push_back(out.step);
    }
    return pass;
}

FilterPass gkf_filter(const CountSeries& series, const ModelSpec& spec, std::optional<double> lambda0,
                      double clamp) {
    return gkf_filter(std::span<const std::int64_t>(series.counts), FilterParams::from(spec), lambda0, clamp);
}

}  // namespace zmc
