#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <span>

namespace dbn {

/// Seeded generator with platform-independent draws. Standard-library
/// distributions are implementation-defined, so the few draws we need are
/// derived from the raw mt19937_64 stream directly.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Samples an index proportional to the (unnormalized) weights.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        assert(total > 0.0);
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Derives an independent stream, e.g. one per sequence.
    Rng split() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ull); }

  private:
    std::mt19937_64 gen_;
};

} // namespace dbn
