#include "spacebind/rng.hpp"

#include <cmath>

#include "spacebind/errors.hpp"

namespace spacebind {

namespace {

// SplitMix64 finalizer: a strong 64-bit mixer
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() {
    return mix64(key_ ^ mix64(counter_++));
}

double Rng::uniform() {
    // top 53 bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: n must be positive");
    // rejection against the largest multiple of n, no modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

double Rng::normal() {
    // Box-Muller; u clamped away from 0 so log stays finite
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

Vec Rng::normal_vec(std::size_t n, double stddev) {
    Vec out(n);
    for (double& x : out) x = stddev * normal();
    return out;
}

Matrix Rng::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = stddev * normal();
    return m;
}

std::uint64_t derive_key(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ static_cast<std::uint64_t>(stream));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

} // namespace spacebind
