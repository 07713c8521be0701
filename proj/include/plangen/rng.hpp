#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace plangen {

// Mixes (seed, stream) into an independent sub-seed. Used to derive
// per-epoch and per-update RNG streams from one master seed so that
// resuming from a checkpoint only needs the master seed and a counter.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

// Deterministic RNG wrapper. All distributions are hand-rolled on top of
// mt19937_64 output so sequences are identical across platforms and
// standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform01();

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Standard Gumbel(0, 1) sample: -log(-log(U)) with U in (0, 1).
    double gumbel();

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    }

    uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace plangen
