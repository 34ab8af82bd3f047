#pragma once

#include <cstdint>
#include <random>

namespace zmc {

/// Seedable random source shared by every stochastic routine.
///
/// Each simulation, replicate or bootstrap refit owns its own instance; the
/// type is cheap to copy but deliberately not shared across threads.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for replicate `index` of an experiment seeded with
    /// `master`. The mapping is fixed so results do not depend on scheduling.
    static RandomSource derived(std::uint64_t master, std::uint64_t index);

    /// Uniform draw on the open interval (0, 1).
    double uniform();
    double exponential(double rate);
    /// Gamma draw with the given shape and rate (mean shape / rate).
    double gamma(double shape, double rate);
    std::uint64_t poisson(double mean);
    double normal();
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace zmc
