#include "crend/params.hpp"

#include <stdexcept>

namespace crend {

Param& ParamStore::add(const std::string& name, Tensor value) {
    if (params_.count(name)) {
        throw std::invalid_argument("ParamStore::add: duplicate parameter '" + name + "'");
    }
    Param p;
    p.grad = Tensor(value.shape());
    p.value = std::move(value);
    auto [it, inserted] = params_.emplace(name, std::move(p));
    order_.push_back(name);
    return it->second;
}

Param& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::invalid_argument("ParamStore::get: unknown parameter '" + name + "'");
    }
    return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::invalid_argument("ParamStore::get: unknown parameter '" + name + "'");
    }
    return it->second;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += params_.at(name).value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (const auto& name : order_) params_.at(name).grad.zero();
}

void ParamStore::add_grads_scaled(const ParamStore& other, double scale) {
    for (const auto& name : order_) {
        get(name).grad.add_scaled(other.get(name).grad, scale);
    }
}

ParamStore ParamStore::clone_layout() const {
    ParamStore out;
    for (const auto& name : order_) {
        out.add(name, params_.at(name).value);
    }
    return out;
}

}  // namespace crend
