#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace spacebind {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction over a fixed set of parameter spans. The spans
// passed to step() must match the sizes given at construction, in order.
class Adam {
  public:
    Adam(const std::vector<std::size_t>& sizes, AdamConfig cfg = {});

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);

    std::uint64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::vector<std::size_t> sizes_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

} // namespace spacebind
