#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crend/params.hpp"

namespace crend {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central finite differences against the analytic gradient already stored in
// `params` (the caller runs forward+backward once beforehand). `loss_fn` must
// be a deterministic pure forward pass of the same objective; it is invoked
// with perturbed parameter values. Relative error per element is
// |a - n| / max(1e-8, |a| + |n|). Throws if the loss goes non-finite.
GradCheckReport finite_diff_gradcheck(const std::function<double(const ParamStore&)>& loss_fn,
                                      ParamStore& params,
                                      const std::vector<std::string>& subset,
                                      double step = 1e-4);

}  // namespace crend
