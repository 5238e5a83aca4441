#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "mcvd/channel.hpp"

namespace mcvd::rng {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds values into a seed, order-sensitive: h <- splitmix64(h ^ v) per value.
constexpr std::uint64_t mix(std::uint64_t seed, std::initializer_list<std::uint64_t> values) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t v : values) h = splitmix64(h ^ v);
    return h;
}

/// Content key of a case: the IEEE-754 bit patterns of (d, r_tx, r_rx, D).
inline std::uint64_t case_key(const SystemParams& p) {
    return mix(0x6d637664ULL, {std::bit_cast<std::uint64_t>(p.d), std::bit_cast<std::uint64_t>(p.r_tx),
                               std::bit_cast<std::uint64_t>(p.r_rx),
                               std::bit_cast<std::uint64_t>(p.diff_coeff)});
}

/// Seed handed to one case of a batch. Depends on the case content, never on
/// its position in the batch.
inline std::uint64_t case_seed(std::uint64_t master_seed, const SystemParams& p) {
    return mix(master_seed, {case_key(p)});
}

/// Seed of the stream that drives one replication of a case.
constexpr std::uint64_t replication_seed(std::uint64_t case_seed, std::uint64_t replication) {
    return mix(case_seed, {0x7265706cULL, replication});
}

/// An explicitly seeded Gaussian stream (Mersenne Twister + ziggurat normal).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return normal_(engine_); }

private:
    boost::random::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace mcvd::rng
