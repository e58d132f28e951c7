#pragma once

#include <vector>

#include "crend/geometry.hpp"
#include "crend/params.hpp"
#include "crend/rng.hpp"
#include "crend/tensor.hpp"

namespace crend {

struct GeneratorConfig {
    int image_size = 64;
    int in_channels = 3;
    int grid_size = 16;        // feature grid G (image_size / 2^stages)
    int backbone_channels = 32;
    int fused_channels = 24;
    int num_vertices = 20;
    int gcn_layers = 3;
    int gcn_hidden = 64;
    int refine_iterations = 1;

    // number of stride-2 stages, derived from image_size / grid_size
    int downsample_stages() const;
    void validate() const;
};

// Output channel count of each stride-2 backbone stage.
std::vector<int> backbone_stage_channels(const GeneratorConfig& cfg);

// Fixed ring topology: node i connects to (i +- 1) mod K and (i +- 2) mod K,
// deduplicated (K=4 gives 3 neighbors, K=3 gives 2).
struct RingGraph {
    int num_nodes = 0;
    std::vector<std::vector<int>> neighbors;
};

RingGraph ring_adjacency(int k);

struct GeneratorOutput {
    Contour contour;     // K vertices, clamped to [0,1]
    Tensor backbone_fm;  // C_b x G x G
    Tensor fused_fm;     // C_f x G x G
    Tensor edge_map;     // 1 x G x G, sigmoid activations
    Tensor vertex_map;   // 1 x G x G
};

struct ConvStageCache {
    Tensor z;  // pre-activation
    Tensor a;  // relu output
};

struct GcnIterCache {
    std::vector<Point01> coords_in;
    Tensor sampled;               // K x C_f
    Tensor node_in;               // K x (2 + C_f)
    std::vector<Tensor> layer_z;  // pre-relu, K x D
    std::vector<Tensor> layer_a;  // relu output
    Tensor offsets;               // K x 2
    std::vector<Point01> pre_clamp;
    std::vector<Point01> coords_out;
};

struct GeneratorCache {
    Tensor image;
    std::vector<ConvStageCache> stages;  // stride-2 stages then two stride-1 tails
    Tensor edge_conv_z, edge_conv_a, edge_fc_z, edge_map;
    Tensor vertex_conv_z, vertex_conv_a, vertex_fc_z, vertex_map;
    Tensor concat;  // (C_b + 2) x G x G
    Tensor fuse_z, fused;
    std::vector<GcnIterCache> iters;
};

// Registers and initializes every generator parameter. Weights are uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases zero. The final offset head is
// zero-initialized by default so the first prediction is the initial circle.
void init_generator_params(ParamStore& params, const GeneratorConfig& cfg, Rng& rng,
                           bool zero_offset_head = true);

Tensor backbone_forward(const Tensor& image, const ParamStore& params,
                        const GeneratorConfig& cfg, std::vector<ConvStageCache>* cache = nullptr);

// Per branch: 3x3 conv (C_b -> 16) + relu, flatten, affine to G*G, sigmoid.
void branches_forward(const Tensor& backbone_fm, const ParamStore& params,
                      const GeneratorConfig& cfg, Tensor& edge_map, Tensor& vertex_map,
                      GeneratorCache* cache = nullptr);

// Channel-concatenate (C_b + 2) then 3x3 conv to C_f + relu.
Tensor fuse_features(const Tensor& backbone_fm, const Tensor& edge_map, const Tensor& vertex_map,
                     const ParamStore& params, const GeneratorConfig& cfg,
                     GeneratorCache* cache = nullptr);

// h'_i = relu(W_self h_i + W_neigh mean_{j in N(i)} h_j + b)
Tensor gcn_layer_forward(const Tensor& node_feats, const RingGraph& g, const Tensor& w_self,
                         const Tensor& w_neigh, const Tensor& b, Tensor* pre_act = nullptr);

// Full generator forward; fills `cache` when given so generator_backward can
// run afterwards.
GeneratorOutput predict_contour(const Tensor& image, const ParamStore& params,
                                const GeneratorConfig& cfg, GeneratorCache* cache = nullptr);

// Backpropagates through the cached forward pass, accumulating parameter
// gradients into `grads` (reads parameter values from `params`; the two may
// be the same store).
//   grad_contour:      K x 2 loss gradient on the predicted vertices
//   grad_backbone_ext: C_b x G x G extra gradient on the backbone map
//                      (e.g. from the renderer), may be empty
//   grad_edge_logits / grad_vertex_logits: 1 x G x G gradients on the branch
//                      pre-sigmoid logits (optional supervision), may be empty
void generator_backward(const GeneratorCache& cache, const ParamStore& params,
                        const GeneratorConfig& cfg, const RingGraph& ring,
                        const Tensor& grad_contour, const Tensor& grad_backbone_ext,
                        const Tensor& grad_edge_logits, const Tensor& grad_vertex_logits,
                        ParamStore& grads);

struct MatchingLoss {
    double loss = 0.0;
    int best_shift = 0;
};

// min over cyclic shifts j of sum_i |p_i - t_{(j+i) % K}|_2. Ties broken by
// the smallest j.
MatchingLoss matching_loss(const Contour& pred, const Contour& target);

// Gradient w.r.t. the predicted vertices through the best shift only (K x 2).
// The norm's gradient at coincident point pairs is defined as zero.
Tensor matching_loss_backward(const Contour& pred, const Contour& target, int best_shift,
                              double scale = 1.0);

}  // namespace crend
