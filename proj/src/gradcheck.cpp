#include "crend/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace crend {

GradCheckReport finite_diff_gradcheck(const std::function<double(const ParamStore&)>& loss_fn,
                                      ParamStore& params,
                                      const std::vector<std::string>& subset,
                                      double step) {
    GradCheckReport report;
    for (const auto& name : subset) {
        Param& p = params.get(name);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + step;
            const double f_plus = loss_fn(params);
            p.value[i] = saved - step;
            const double f_minus = loss_fn(params);
            p.value[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw std::runtime_error("finite_diff_gradcheck: non-finite loss at parameter '" +
                                         name + "'[" + std::to_string(i) + "]");
            }
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double analytic = p.grad[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace crend
