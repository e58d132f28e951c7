#pragma once

#include <cstdint>
#include <vector>

#include "crend/geometry.hpp"
#include "crend/params.hpp"
#include "crend/rng.hpp"
#include "crend/tensor.hpp"

namespace crend {

struct RendererConfig {
    int train_samples_per_vertex = 3;  // n
    double train_offset_range = 0.09;  // r
    int test_grid_side = 15;           // N
    double test_square_size = 0.09;    // s
    double fg_threshold = 0.3;
    double loss_weight = 1.0;  // lambda

    void validate() const;
};

// Points sampled around contour vertices. `inside01_x/y` record whether the
// pre-clamp coordinate was already inside [0,1] (the clamp gradient gate).
struct SampledPoints {
    std::vector<Point01> points;
    std::vector<std::uint8_t> inside01_x;
    std::vector<std::uint8_t> inside01_y;
    std::vector<int> source_vertex;

    std::size_t size() const { return points.size(); }
};

// n points per vertex with independent uniform offsets in [-r, r] per
// coordinate, clamped to [0,1]. Output is vertex-major; deterministic for a
// given rng state.
SampledPoints sample_train_points(const Contour& c, int n, double r, Rng& rng);

// Per vertex, an n_side x n_side grid centered on the vertex covering an
// s x s square (gap s/(n_side-1)); n_side == 1 degenerates to the vertex
// itself. Vertex-major, grid rows in y order.
SampledPoints sample_test_grid(const Contour& c, int n_side, double s);

// Registers the renderer's point-classification head (affine C_b -> 2).
// Zero-initialized by default so an untrained head scores 0.5/0.5.
void init_renderer_params(ParamStore& params, int backbone_channels, Rng& rng,
                          bool zero_head = true);

// features: M x C_b -> logits M x 2 (background, foreground).
Tensor classify_points(const Tensor& features, const ParamStore& params);

// label 1 iff the point is inside the ground-truth region
std::vector<int> point_targets(const std::vector<Point01>& points, const Contour& gt);
std::vector<int> point_targets(const std::vector<Point01>& points, const Mask& gt);

struct RendererLoss {
    double loss = 0.0;
    Tensor grad_logits;  // M x 2
};

RendererLoss renderer_loss(const Tensor& scores, const std::vector<int>& labels);

// Rasterizes the contour, then pastes every point in order: pixel
// (round(y*(H-1)), round(x*(W-1))) becomes foreground iff its probability
// exceeds the threshold strictly; later points overwrite earlier ones.
Mask render_mask(const Contour& contour, const std::vector<Point01>& points,
                 const std::vector<double>& fg_probs, double threshold, int height, int width);

}  // namespace crend
