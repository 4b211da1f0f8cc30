#include "spacebind/optim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "spacebind/errors.hpp"

namespace spacebind {

Adam::Adam(const std::vector<std::size_t>& sizes, AdamConfig cfg) : cfg_(cfg), sizes_(sizes) {
    if (cfg.learning_rate <= 0.0) throw ConfigError("Adam: learning_rate must be positive");
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0) throw ConfigError("Adam: beta1 must be in [0,1)");
    if (cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) throw ConfigError("Adam: beta2 must be in [0,1)");
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
    if (params.size() != sizes_.size() || grads.size() != sizes_.size())
        throw ShapeError("Adam::step: expected " + std::to_string(sizes_.size()) +
                         " parameter spans, got " + std::to_string(params.size()));
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t offset = 0;
    for (std::size_t s = 0; s < sizes_.size(); ++s) {
        if (params[s].size() != sizes_[s] || grads[s].size() != sizes_[s])
            throw ShapeError("Adam::step: span " + std::to_string(s) + " has size " +
                             std::to_string(params[s].size()) + ", expected " +
                             std::to_string(sizes_[s]));
        double* p = params[s].data();
        const double* g = grads[s].data();
        for (std::size_t i = 0; i < sizes_[s]; ++i) {
            const std::size_t k = offset + i;
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g[i];
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m_[k] / bc1;
            const double vhat = v_[k] / bc2;
            p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
        offset += sizes_[s];
    }
}

} // namespace spacebind
