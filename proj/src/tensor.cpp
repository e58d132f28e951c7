#include "crend/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crend {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_product(shape_) != values_.size()) {
        throw std::invalid_argument("Tensor: shape " + shape_to_string(shape_) +
                                    " does not match " + std::to_string(values_.size()) +
                                    " values");
    }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::add_scaled(const Tensor& other, double scale) {
    require_same_shape(*this, other, "Tensor::add_scaled");
    const double* src = other.data();
    double* dst = values_.data();
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] += scale * src[i];
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    out += "]";
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(context) + ": shape mismatch " +
                                    shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
}

}  // namespace crend
