#pragma once

#include <vector>

#include "crend/geometry.hpp"
#include "crend/tensor.hpp"

namespace crend {

// y[m] = W x[m] + b. x: M x Din, w: Dout x Din, b: Dout -> y: M x Dout.
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

// Accumulates into grad_w / grad_b (and grad_x when non-null).
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b);

// Same-padded cross-correlation plus bias. x: Cin x H x W,
// w: Cout x Cin x k x k with k odd, stride 1 or 2.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1);

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y, int stride,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b);

// Elementwise max(0, x); the backward gate uses x > 0.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_y);

Tensor sigmoid(const Tensor& x);
// backward expressed on the forward output: g * y * (1 - y)
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_y);

// fm: C x G x G. Corner-aligned convention: position u maps to continuous
// grid index u * (G - 1), so the corners of [0,1]^2 hit corner cells exactly.
// Points must already be clamped to [0, 1]. Returns len(points) x C.
Tensor bilinear_sample(const Tensor& fm, const std::vector<Point01>& points);

// grad_out: M x C. Accumulates into grad_fm (C x G x G) and grad_points
// (M x 2, d/dx then d/dy) when non-null.
void bilinear_sample_backward(const Tensor& fm, const std::vector<Point01>& points,
                              const Tensor& grad_out, Tensor* grad_fm, Tensor* grad_points);

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor grad_logits;  // M x 2, already divided by M
};

// Mean over rows of -log softmax(logits)[target]; targets in {0, 1}.
CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// Row-wise softmax of an M x C tensor.
Tensor softmax_rows(const Tensor& logits);

struct BceResult {
    double loss = 0.0;
    Tensor grad_logits;  // same shape as logits, already divided by count
};

// Mean binary cross entropy on logits (numerically stable form).
BceResult bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace crend
