#include "spacebind/gradcheck.hpp"

#include <cmath>

#include "spacebind/errors.hpp"

namespace spacebind {

std::string GradCheckReport::describe() const {
    return "max_rel_dev=" + std::to_string(max_rel_dev) + " at index " +
           std::to_string(worst_index) + " (analytic=" + std::to_string(analytic_at_worst) +
           ", numeric=" + std::to_string(numeric_at_worst) + ", checked=" +
           std::to_string(checked) + ")";
}

GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<double> params, std::span<const double> analytic,
                           double step, double denom_floor) {
    if (params.size() != analytic.size())
        throw ShapeError("grad_check: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(analytic.size()) + " analytic gradients");
    if (step <= 0.0) throw ConfigError("grad_check: step must be positive");
    GradCheckReport report;
    report.checked = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double fp = f(params);
        params[i] = saved - step;
        const double fm = f(params);
        params[i] = saved;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), denom_floor});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > report.max_rel_dev) {
            report.max_rel_dev = rel;
            report.worst_index = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

} // namespace spacebind
