#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>

#include "crend/params.hpp"
#include "crend/tensor.hpp"

namespace crend {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with decoupled weight decay: the decay term theta -= lr * wd * theta
// is applied independently of (and before) the moment update.
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    // Allocates zero moments for every parameter.
    void attach(const ParamStore& params);

    void step(ParamStore& params);

    AdamWConfig& config() { return cfg_; }
    const AdamWConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return step_; }

    // checkpoint access
    void set_step_count(std::int64_t n) { step_ = n; }
    Tensor& first_moment(const std::string& name) { return moments_.at(name).first; }
    Tensor& second_moment(const std::string& name) { return moments_.at(name).second; }
    const Tensor& first_moment(const std::string& name) const { return moments_.at(name).first; }
    const Tensor& second_moment(const std::string& name) const { return moments_.at(name).second; }

private:
    AdamWConfig cfg_;
    std::int64_t step_ = 0;
    std::unordered_map<std::string, std::pair<Tensor, Tensor>> moments_;
};

}  // namespace crend
