#pragma once

#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace phi42 {

/// Roles of independent random streams within one realization.
enum class StreamRole : std::uint64_t {
    noise = 1,
    driver_history = 2,
    conditional_noise = 3,
    bootstrap = 4,
    probe = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-style seed derivation: hash of (seed, k1, k2, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t realization, StreamRole role) {
    return derive_seed(base, {realization, static_cast<std::uint64_t>(role)});
}

/// A private generator owned by one task. Never shared across threads.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

private:
    boost::random::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    boost::random::uniform_01<double> uniform_;
};

}  // namespace phi42
