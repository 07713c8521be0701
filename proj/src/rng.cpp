#include "plangen/rng.hpp"

#include <cmath>

namespace plangen {

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    // splitmix64 over the combined state; one round per input word.
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform01() {
    // 53-bit mantissa construction, in [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi) {
    // Rejection-free modulo is fine here: ranges are tiny vs 2^64.
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double Rng::gumbel() {
    // Keep U strictly inside (0, 1) so both logs are finite.
    double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return -std::log(-std::log(u));
}

}  // namespace plangen
