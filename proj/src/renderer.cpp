#include "crend/renderer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "crend/nn.hpp"

namespace crend {

void RendererConfig::validate() const {
    if (train_samples_per_vertex < 0) {
        throw std::invalid_argument("RendererConfig: train_samples_per_vertex must be >= 0");
    }
    if (test_grid_side < 1) {
        throw std::invalid_argument("RendererConfig: test_grid_side must be >= 1");
    }
    if (test_square_size < 0.0 || test_square_size > 1.0) {
        throw std::invalid_argument("RendererConfig: test_square_size must lie in [0, 1]");
    }
    if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) {
        throw std::invalid_argument("RendererConfig: fg_threshold must lie in (0, 1)");
    }
}

namespace {

void push_point(SampledPoints& out, double x, double y, int vertex) {
    out.inside01_x.push_back(x >= 0.0 && x <= 1.0);
    out.inside01_y.push_back(y >= 0.0 && y <= 1.0);
    out.points.push_back(clamp01({x, y}));
    out.source_vertex.push_back(vertex);
}

}  // namespace

SampledPoints sample_train_points(const Contour& c, int n, double r, Rng& rng) {
    SampledPoints out;
    const std::size_t k = c.size();
    out.points.reserve(k * n);
    for (std::size_t i = 0; i < k; ++i) {
        for (int s = 0; s < n; ++s) {
            const double dx = rng.uniform(-r, r);
            const double dy = rng.uniform(-r, r);
            push_point(out, c.vertices[i].x + dx, c.vertices[i].y + dy, static_cast<int>(i));
        }
    }
    return out;
}

SampledPoints sample_test_grid(const Contour& c, int n_side, double s) {
    if (n_side < 1) {
        throw std::invalid_argument("sample_test_grid: grid side must be >= 1, got " +
                                    std::to_string(n_side));
    }
    SampledPoints out;
    const std::size_t k = c.size();
    out.points.reserve(k * n_side * n_side);
    for (std::size_t v = 0; v < k; ++v) {
        const Point01& p = c.vertices[v];
        for (int j = 0; j < n_side; ++j) {
            const double oy =
                n_side == 1 ? 0.0 : (static_cast<double>(j) / (n_side - 1) - 0.5) * s;
            for (int i = 0; i < n_side; ++i) {
                const double ox =
                    n_side == 1 ? 0.0 : (static_cast<double>(i) / (n_side - 1) - 0.5) * s;
                push_point(out, p.x + ox, p.y + oy, static_cast<int>(v));
            }
        }
    }
    return out;
}

void init_renderer_params(ParamStore& params, int backbone_channels, Rng& rng, bool zero_head) {
    Tensor w({2, static_cast<std::size_t>(backbone_channels)});
    if (!zero_head) {
        const double bound = std::sqrt(6.0 / (backbone_channels + 2.0));
        for (double& v : w.values()) v = rng.uniform(-bound, bound);
    }
    params.add("render.w", std::move(w));
    params.add("render.b", Tensor({2}));
}

Tensor classify_points(const Tensor& features, const ParamStore& params) {
    const Tensor& w = params.get("render.w").value;
    if (features.ndim() != 2 || features.dim(1) != w.dim(1)) {
        throw std::invalid_argument("classify_points: feature width " +
                                    shape_to_string(features.shape()) + " does not match head " +
                                    shape_to_string(w.shape()));
    }
    return linear_forward(features, w, params.get("render.b").value);
}

std::vector<int> point_targets(const std::vector<Point01>& points, const Contour& gt) {
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        labels[i] = point_in_polygon(points[i], gt) ? 1 : 0;
    }
    return labels;
}

std::vector<int> point_targets(const std::vector<Point01>& points, const Mask& gt) {
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int col = static_cast<int>(std::lround(points[i].x * (gt.width - 1)));
        const int row = static_cast<int>(std::lround(points[i].y * (gt.height - 1)));
        labels[i] = gt.at(row, col) != 0 ? 1 : 0;
    }
    return labels;
}

RendererLoss renderer_loss(const Tensor& scores, const std::vector<int>& labels) {
    CrossEntropyResult ce = softmax_cross_entropy(scores, labels);
    return {ce.loss, std::move(ce.grad_logits)};
}

Mask render_mask(const Contour& contour, const std::vector<Point01>& points,
                 const std::vector<double>& fg_probs, double threshold, int height, int width) {
    if (points.size() != fg_probs.size()) {
        throw std::invalid_argument("render_mask: " + std::to_string(points.size()) +
                                    " points vs " + std::to_string(fg_probs.size()) +
                                    " probabilities");
    }
    Mask mask = rasterize_polygon(contour, height, width);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int col = static_cast<int>(std::lround(points[i].x * (width - 1)));
        const int row = static_cast<int>(std::lround(points[i].y * (height - 1)));
        mask.at(row, col) = fg_probs[i] > threshold ? 1 : 0;
    }
    return mask;
}

}  // namespace crend
