#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace crend {

// Dense row-major tensor of 64-bit floats.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& operator()(std::size_t i, std::size_t j) {
        return values_[i * shape_[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return values_[i * shape_[1] + j];
    }
    double& operator()(std::size_t c, std::size_t y, std::size_t x) {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double operator()(std::size_t c, std::size_t y, std::size_t x) const {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& operator()(std::size_t o, std::size_t c, std::size_t y, std::size_t x) {
        return values_[((o * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double operator()(std::size_t o, std::size_t c, std::size_t y, std::size_t x) const {
        return values_[((o * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    void fill(double v);
    void zero() { fill(0.0); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // elementwise axpy: this += scale * other (shapes must match)
    void add_scaled(const Tensor& other, double scale);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// throws std::invalid_argument naming both shapes on mismatch
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

}  // namespace crend
