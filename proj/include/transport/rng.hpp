#ifndef TRANSPORT_RNG_HPP
#define TRANSPORT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace transport {

// splitmix64; used to derive independent per-replicate seeds from a master
// seed and a counter so parallel execution order cannot change results.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// mt19937_64 core with explicitly specified real-valued transforms, so
// streams are identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    Rng(std::uint64_t master_seed, std::uint64_t counter) : gen_(mix_seed(master_seed, counter)) {}

    // uniform on [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // standard normal via Marsaglia polar
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // index into probs (assumed to sum to 1)
    int categorical(const std::vector<double>& probs) {
        double u = uniform();
        double c = 0.0;
        for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
            c += probs[k];
            if (u < c) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    // uniform integer on [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace transport

#endif  // TRANSPORT_RNG_HPP
