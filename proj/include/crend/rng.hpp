#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace crend {

// Splittable seed mixer (splitmix64 finalizer). Used to derive independent
// deterministic streams from a base seed, e.g. one per dataset sample.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// Deterministic RNG. All distributions are implemented by hand on top of the
// raw mt19937_64 output so results do not depend on the standard library's
// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal, Box-Muller
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fisher-Yates; deterministic for a given seed regardless of platform
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = next_u64() % i;
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace crend
