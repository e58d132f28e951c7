#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "crend/tensor.hpp"

namespace crend {

struct Param {
    Tensor value;
    Tensor grad;
};

// Named parameter table. Iteration order is insertion order, which also fixes
// the initialization and checkpoint layout.
class ParamStore {
public:
    Param& add(const std::string& name, Tensor value);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    const std::vector<std::string>& names() const { return order_; }
    std::size_t total_values() const;

    void zero_grad();

    // Sums `scale * other.grad` into this store's gradients (same layout).
    void add_grads_scaled(const ParamStore& other, double scale);

    // Deep copy with zeroed gradients, same layout.
    ParamStore clone_layout() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Param> params_;
};

}  // namespace crend
