#include "crend/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace crend {

void AdamW::attach(const ParamStore& params) {
    moments_.clear();
    for (const auto& name : params.names()) {
        const Tensor& v = params.get(name).value;
        moments_.emplace(name, std::make_pair(Tensor(v.shape()), Tensor(v.shape())));
    }
    step_ = 0;
}

void AdamW::step(ParamStore& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto& name : params.names()) {
        Param& p = params.get(name);
        auto it = moments_.find(name);
        if (it == moments_.end()) {
            throw std::runtime_error("AdamW::step: no moments for parameter '" + name +
                                     "' (attach() not called?)");
        }
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        double* theta = p.value.data();
        const double* g = p.grad.data();
        double* md = m.data();
        double* vd = v.data();
        const std::size_t n = p.value.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg_.weight_decay != 0.0) theta[i] -= cfg_.lr * cfg_.weight_decay * theta[i];
            md[i] = cfg_.beta1 * md[i] + (1.0 - cfg_.beta1) * g[i];
            vd[i] = cfg_.beta2 * vd[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = md[i] / bc1;
            const double vhat = vd[i] / bc2;
            theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace crend
