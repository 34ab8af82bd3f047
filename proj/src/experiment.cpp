#include "zmc/experiment.hpp"

#include <ostream>

#include "zmc/errors.hpp"
#include "zmc/io.hpp"
#include "zmc/parallel.hpp"

namespace zmc {

std::string_view to_string(ReplicateStatus status) {
    switch (status) {
        case ReplicateStatus::Completed: return "completed";
        case ReplicateStatus::InfeasibleSimulation: return "infeasible-simulation";
        case ReplicateStatus::InfeasibleInit: return "infeasible-init";
        case ReplicateStatus::NotConverged: return "not-converged";
        case ReplicateStatus::Failed: return "failed";
    }
    return "failed";
}

ReplicateOutcome run_replicate(const ExperimentConfig& config, std::size_t index) {
    ReplicateOutcome out;
    auto rng = RandomSource::derived(config.seed, index);
    CountSeries series;
    try {
        const auto path = simulate_intensity(config.truth.intensity, config.n, rng);
        series = zm_sample(config.truth.family, path, config.truth.params, rng);
    } catch (const InfeasibleOmega& e) {
        out.status = ReplicateStatus::InfeasibleSimulation;
        out.message = e.what();
        return out;
    }
    const ModelStructure model{config.truth.family, config.truth.intensity.family, config.truth.params.c};
    try {
        const auto res = fit_model(series.counts, model, config.fit);
        out.estimate = res.params_hat;
        out.status = res.converged ? ReplicateStatus::Completed : ReplicateStatus::NotConverged;
    } catch (const InfeasibleInit& e) {
        out.status = ReplicateStatus::InfeasibleInit;
        out.message = e.what();
    } catch (const Error& e) {
        out.status = ReplicateStatus::Failed;
        out.message = e.what();
    }
    return out;
}

ExperimentRow summarize(const Params& truth, std::vector<ReplicateOutcome> outcomes) {
    ExperimentRow row;
    row.truth = truth;
    row.mean = Params{0.0, 0.0, 0.0, 0.0, 0.0, truth.c};
    row.mse = row.mean;
    for (const auto& o : outcomes) {
        if (o.status != ReplicateStatus::Completed) {
            ++row.discarded;
            ++row.discard_reasons[std::string(to_string(o.status))];
            continue;
        }
        ++row.completed;
        const auto& e = o.estimate;
        row.mean.omega += e.omega;
        row.mean.rho += e.rho;
        row.mean.beta += e.beta;
        row.mean.p += e.p;
        row.mean.a += e.a;
        row.mse.omega += (e.omega - truth.omega) * (e.omega - truth.omega);
        row.mse.rho += (e.rho - truth.rho) * (e.rho - truth.rho);
        row.mse.beta += (e.beta - truth.beta) * (e.beta - truth.beta);
        row.mse.p += (e.p - truth.p) * (e.p - truth.p);
        row.mse.a += (e.a - truth.a) * (e.a - truth.a);
    }
    if (row.completed > 0) {
        const double k = static_cast<double>(row.completed);
        for (auto* q : {&row.mean, &row.mse}) {
            q->omega /= k;
            q->rho /= k;
            q->beta /= k;
            q->p /= k;
            q->a /= k;
        }
    }
    row.outcomes = std::move(outcomes);
    return row;
}

ExperimentRow run_experiment(const ExperimentConfig& config) {
    config.truth.validate();
    if (config.replicates == 0) throw InvalidSpec("experiment needs at least one replicate");
    std::vector<ReplicateOutcome> outcomes(config.replicates);
    parallel_for(config.replicates, config.jobs,
                 [&](std::size_t i) { outcomes[i] = run_replicate(config, i); });
    return summarize(config.truth.params, std::move(outcomes));
}

void write_experiment_header(std::ostream& out) {
    out << "rho,omega,beta,p,a,mean_rho,mean_omega,mean_beta,mean_p,mean_a,"
           "mse_rho,mse_omega,mse_beta,mse_p,mse_a,completed,discarded\n";
}

void write_experiment_row(std::ostream& out, const ExperimentRow& row) {
    const auto f = [](double v) { return format_double(v); };
    out << f(row.truth.rho) << ',' << f(row.truth.omega) << ',' << f(row.truth.beta) << ',' << f(row.truth.p) << ','
        << f(row.truth.a) << ',' << f(row.mean.rho) << ',' << f(row.mean.omega) << ',' << f(row.mean.beta) << ','
        << f(row.mean.p) << ',' << f(row.mean.a) << ',' << f(row.mse.rho) << ',' << f(row.mse.omega) << ','
        << f(row.mse.beta) << ',' << f(row.mse.p) << ',' << f(row.mse.a) << ',' << row.completed << ','
        << row.discarded << '\n';
}

}  // namespace zmc
