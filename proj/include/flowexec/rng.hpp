#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace flowexec {

/// Counter-based generator: output k of stream (seed, path) is a pure function
/// of (seed, path, k), so a path's draws do not depend on which thread runs it
/// or how many paths ran before it.
class PathRng {
public:
    using result_type = std::uint64_t;

    PathRng(std::uint64_t seed, std::uint64_t path)
        : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + path * 0x9e3779b97f4a7c15ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (counter_++) * 0xd1b54a32d192ed03ULL); }

    /// Standard normal draw.
    double normal() { return normal_(*this); }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace flowexec
