#include "zmc/random.hpp"

#include <array>

namespace zmc {

RandomSource RandomSource::derived(std::uint64_t master, std::uint64_t index) {
    std::array<std::uint32_t, 4> words{
        static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::seed_seq seq(words.begin(), words.end());
    std::array<std::uint64_t, 1> out{};
    std::array<std::uint32_t, 2> raw{};
    seq.generate(raw.begin(), raw.end());
    out[0] = (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
    return RandomSource(out[0]);
}

double RandomSource::uniform() {
    // generate_canonical can return exactly 0; reject it so callers may take logs.
    for (;;) {
        const double u = std::generate_canonical<double, 53>(engine_);
        if (u > 0.0 && u < 1.0) return u;
    }
}

double RandomSource::exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
}

double RandomSource::gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
}

std::uint64_t RandomSource::poisson(double mean) {
    if (mean <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(engine_));
}

double RandomSource::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

}  // namespace zmc
