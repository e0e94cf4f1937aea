#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace teddn {

// Deterministic RNG for parameter init and shuffling. mt19937_64 is fully
// specified by the standard; the distributions are hand-rolled because the
// std:: ones are implementation-defined and would break cross-build
// reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). Modulo bias is negligible for n << 2^64 and
    // irrelevant here; only determinism matters.
    long index(long n) { return static_cast<long>(next() % static_cast<std::uint64_t>(n)); }

    // Independent child stream, stable under calls made on the parent.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27; x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return Rng(x);
    }

    // Fisher-Yates; std::shuffle is implementation-defined.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
            long j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace teddn
