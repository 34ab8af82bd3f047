#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "zmc/estimation.hpp"
#include "zmc/observation.hpp"

namespace zmc {

struct ExperimentConfig {
    ModelSpec truth;
    std::size_t n = 1000;
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    FitConfig fit;
};

enum class ReplicateStatus { Completed, InfeasibleSimulation, InfeasibleInit, NotConverged, Failed };

std::string_view to_string(ReplicateStatus status);

struct ReplicateOutcome {
    ReplicateStatus status = ReplicateStatus::Failed;
    Params estimate;
    std::string message;
};

struct ExperimentRow {
    Params truth;
    Params mean;
    Params mse;
    std::size_t completed = 0;
    std::size_t discarded = 0;
    std::map<std::string, std::size_t> discard_reasons;
    std::vector<ReplicateOutcome> outcomes;  ///< indexed by replicate
};

/// Simulates and refits `replicates` series; replicate i uses
/// RandomSource::derived(seed, i), so rows do not depend on `jobs`.
ReplicateOutcome run_replicate(const ExperimentConfig& config, std::size_t index);
ExperimentRow run_experiment(const ExperimentConfig& config);

/// Means and MSEs over the completed outcomes.
ExperimentRow summarize(const Params& truth, std::vector<ReplicateOutcome> outcomes);

void write_experiment_header(std::ostream& out);
void write_experiment_row(std::ostream& out, const ExperimentRow& row);

}  // namespace zmc
