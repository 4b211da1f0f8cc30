#pragma once

#include <cstdint>
#include <vector>

#include "spacebind/matrix.hpp"

namespace spacebind {

// Counter-based generator: the i-th output is a pure function of (key, i),
// so independent streams never interact and any consumer can be re-run in
// isolation with identical results.
class Rng {
  public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    // 64 uniform bits
    std::uint64_t next_u64();
    // uniform in [0, 1)
    double uniform();
    // uniform integer in [0, n), n > 0
    std::uint64_t below(std::uint64_t n);
    // standard normal via Box-Muller (two uniforms per draw, no caching,
    // so the stream position stays a simple counter)
    double normal();

    Vec normal_vec(std::size_t n, double stddev = 1.0);
    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Stream labels for derived keys. Fixed numbering is part of the on-disk
// reproducibility contract: changing it changes every generated world.
enum class Stream : std::uint64_t {
    ClusterCenters = 1,
    ClusterAssign = 2,
    Latent = 3,
    TextDomain = 4,
    Observation = 5,
    EncoderMap = 6,
    EncoderBasis = 7,
    EncoderNoise = 8,
    ModalityMixing = 9,
    Split = 10,
    ParamInit = 11,
    BatchOrder = 12,
    GradCheck = 13,
};

// Hash-combines a seed, a stream label, and up to three indices into a key.
std::uint64_t derive_key(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0);

} // namespace spacebind
