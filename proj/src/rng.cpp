#include "crend/rng.hpp"

namespace crend {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(a ^ mix_seed(b ^ mix_seed(c)));
}

}  // namespace crend
