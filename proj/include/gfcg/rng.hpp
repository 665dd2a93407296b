#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace gfcg {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives the seed of sub-stream `index` of `seed`. Streams are addressed by
/// counter, so chain i's randomness never depends on which chains ran before it.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Well-known stream indices within a single chain.
enum class Stream : std::uint64_t { initial_noise = 1, reference_class = 2, data = 3, jitter = 4 };

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, Stream stream)
        : engine_(derive_stream(seed, static_cast<std::uint64_t>(stream))) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    Eigen::VectorXd normal_vector(Eigen::Index dimension) {
        Eigen::VectorXd v(dimension);
        for (Eigen::Index i = 0; i < dimension; ++i) v[i] = normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gfcg
