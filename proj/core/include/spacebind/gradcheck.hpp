#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace spacebind {

struct GradCheckReport {
    double max_rel_dev = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t checked = 0;

    bool pass(double tol) const { return max_rel_dev <= tol; }
    std::string describe() const;
};

// Central-difference check of `analytic` against the numeric gradient of
// `f` at `params`. Perturbs each coordinate by +-step (params are restored
// afterwards). Relative deviation uses max(|a|, |n|, floor) as denominator
// so exact-zero gradients don't amplify finite-difference noise.
GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<double> params, std::span<const double> analytic,
                           double step = 1e-5, double denom_floor = 1e-3);

} // namespace spacebind
