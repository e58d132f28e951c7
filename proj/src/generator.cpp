#include "crend/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crend/nn.hpp"

namespace crend {

namespace {

void xavier_uniform_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

void add_conv(ParamStore& params, const std::string& prefix, int cout, int cin, int k, Rng& rng) {
    Tensor w({static_cast<std::size_t>(cout), static_cast<std::size_t>(cin),
              static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    xavier_uniform_fill(w, static_cast<std::size_t>(cin) * k * k,
                        static_cast<std::size_t>(cout) * k * k, rng);
    params.add(prefix + ".w", std::move(w));
    params.add(prefix + ".b", Tensor({static_cast<std::size_t>(cout)}));
}

void add_linear(ParamStore& params, const std::string& prefix, int dout, int din, Rng& rng,
                bool zero = false) {
    Tensor w({static_cast<std::size_t>(dout), static_cast<std::size_t>(din)});
    if (!zero) xavier_uniform_fill(w, din, dout, rng);
    params.add(prefix + ".w", std::move(w));
    params.add(prefix + ".b", Tensor({static_cast<std::size_t>(dout)}));
}

constexpr int kBranchChannels = 16;

}  // namespace

int GeneratorConfig::downsample_stages() const {
    int s = image_size;
    int stages = 0;
    while (s > grid_size) {
        s /= 2;
        ++stages;
    }
    return stages;
}

void GeneratorConfig::validate() const {
    if (image_size < 4 || grid_size < 2 || in_channels < 1 || backbone_channels < 1 ||
        fused_channels < 1 || gcn_hidden < 1 || gcn_layers < 1 || refine_iterations < 1) {
        throw std::invalid_argument("GeneratorConfig: all dimensions must be positive");
    }
    if (num_vertices < 3) {
        throw std::invalid_argument("GeneratorConfig: num_vertices must be >= 3, got " +
                                    std::to_string(num_vertices));
    }
    int s = image_size;
    int stages = 0;
    while (s > grid_size && s % 2 == 0) {
        s /= 2;
        ++stages;
    }
    if (s != grid_size || stages < 1) {
        throw std::invalid_argument(
            "GeneratorConfig: image_size " + std::to_string(image_size) +
            " must be grid_size " + std::to_string(grid_size) + " times a power of two >= 2");
    }
}

std::vector<int> backbone_stage_channels(const GeneratorConfig& cfg) {
    const int n = cfg.downsample_stages();
    std::vector<int> channels(n);
    for (int i = 0; i < n; ++i) {
        channels[i] = std::max(1, cfg.backbone_channels >> (n - 1 - i));
    }
    return channels;
}

RingGraph ring_adjacency(int k) {
    if (k < 3) {
        throw std::invalid_argument("ring_adjacency: k must be >= 3, got " + std::to_string(k));
    }
    RingGraph g;
    g.num_nodes = k;
    g.neighbors.resize(k);
    const int offsets[4] = {-2, -1, 1, 2};
    for (int i = 0; i < k; ++i) {
        auto& nb = g.neighbors[i];
        for (int off : offsets) {
            const int j = ((i + off) % k + k) % k;
            if (j == i) continue;
            if (std::find(nb.begin(), nb.end(), j) == nb.end()) nb.push_back(j);
        }
    }
    return g;
}

void init_generator_params(ParamStore& params, const GeneratorConfig& cfg, Rng& rng,
                           bool zero_offset_head) {
    cfg.validate();
    const auto stage_channels = backbone_stage_channels(cfg);
    int cin = cfg.in_channels;
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
        add_conv(params, "backbone.s" + std::to_string(i), stage_channels[i], cin, 3, rng);
        cin = stage_channels[i];
    }
    add_conv(params, "backbone.r0", cfg.backbone_channels, cin, 3, rng);
    add_conv(params, "backbone.r1", cfg.backbone_channels, cfg.backbone_channels, 3, rng);

    const int g2 = cfg.grid_size * cfg.grid_size;
    for (const char* branch : {"edge", "vertex"}) {
        add_conv(params, std::string(branch) + ".conv", kBranchChannels, cfg.backbone_channels, 3,
                 rng);
        add_linear(params, std::string(branch) + ".fc", g2, kBranchChannels * g2, rng);
    }

    add_conv(params, "fuse", cfg.fused_channels, cfg.backbone_channels + 2, 3, rng);

    int din = 2 + cfg.fused_channels;
    for (int l = 0; l < cfg.gcn_layers; ++l) {
        const std::string prefix = "gcn.l" + std::to_string(l);
        Tensor w_self({static_cast<std::size_t>(cfg.gcn_hidden), static_cast<std::size_t>(din)});
        xavier_uniform_fill(w_self, din, cfg.gcn_hidden, rng);
        params.add(prefix + ".self.w", std::move(w_self));
        Tensor w_neigh({static_cast<std::size_t>(cfg.gcn_hidden), static_cast<std::size_t>(din)});
        xavier_uniform_fill(w_neigh, din, cfg.gcn_hidden, rng);
        params.add(prefix + ".neigh.w", std::move(w_neigh));
        params.add(prefix + ".b", Tensor({static_cast<std::size_t>(cfg.gcn_hidden)}));
        din = cfg.gcn_hidden;
    }
    add_linear(params, "offset", 2, cfg.gcn_hidden, rng, zero_offset_head);
}

Tensor backbone_forward(const Tensor& image, const ParamStore& params, const GeneratorConfig& cfg,
                        std::vector<ConvStageCache>* cache) {
    if (image.ndim() != 3 || static_cast<int>(image.dim(0)) != cfg.in_channels ||
        static_cast<int>(image.dim(1)) != cfg.image_size ||
        static_cast<int>(image.dim(2)) != cfg.image_size) {
        throw std::invalid_argument("backbone_forward: image shape " +
                                    shape_to_string(image.shape()) + " does not match config " +
                                    std::to_string(cfg.in_channels) + "x" +
                                    std::to_string(cfg.image_size) + "x" +
                                    std::to_string(cfg.image_size));
    }
    const int stages = cfg.downsample_stages();
    const Tensor* x = &image;
    Tensor a;
    for (int i = 0; i <= stages + 1; ++i) {
        std::string prefix;
        int stride;
        if (i < stages) {
            prefix = "backbone.s" + std::to_string(i);
            stride = 2;
        } else {
            prefix = std::string("backbone.r") + (i == stages ? "0" : "1");
            stride = 1;
        }
        Tensor z = conv2d_forward(*x, params.get(prefix + ".w").value,
                                  params.get(prefix + ".b").value, stride);
        a = relu(z);
        if (cache) cache->push_back({std::move(z), a});
        x = cache ? &cache->back().a : &a;
    }
    return a;
}

namespace {

// shared by the edge and vertex branches
Tensor branch_forward(const Tensor& backbone_fm, const ParamStore& params, const std::string& name,
                      int grid, Tensor* conv_z, Tensor* conv_a, Tensor* fc_z) {
    Tensor z = conv2d_forward(backbone_fm, params.get(name + ".conv.w").value,
                              params.get(name + ".conv.b").value, 1);
    Tensor a = relu(z);
    Tensor flat({1, a.size()}, a.values());
    Tensor logits = linear_forward(flat, params.get(name + ".fc.w").value,
                                   params.get(name + ".fc.b").value);
    Tensor map = sigmoid(logits);
    Tensor shaped({1, static_cast<std::size_t>(grid), static_cast<std::size_t>(grid)},
                  map.values());
    if (conv_z) *conv_z = std::move(z);
    if (conv_a) *conv_a = std::move(a);
    if (fc_z) *fc_z = std::move(logits);
    return shaped;
}

}  // namespace

void branches_forward(const Tensor& backbone_fm, const ParamStore& params,
                      const GeneratorConfig& cfg, Tensor& edge_map, Tensor& vertex_map,
                      GeneratorCache* cache) {
    edge_map = branch_forward(backbone_fm, params, "edge", cfg.grid_size,
                              cache ? &cache->edge_conv_z : nullptr,
                              cache ? &cache->edge_conv_a : nullptr,
                              cache ? &cache->edge_fc_z : nullptr);
    vertex_map = branch_forward(backbone_fm, params, "vertex", cfg.grid_size,
                                cache ? &cache->vertex_conv_z : nullptr,
                                cache ? &cache->vertex_conv_a : nullptr,
                                cache ? &cache->vertex_fc_z : nullptr);
    if (cache) {
        cache->edge_map = edge_map;
        cache->vertex_map = vertex_map;
    }
}

Tensor fuse_features(const Tensor& backbone_fm, const Tensor& edge_map, const Tensor& vertex_map,
                     const ParamStore& params, const GeneratorConfig& cfg, GeneratorCache* cache) {
    const std::size_t g = backbone_fm.dim(1);
    if (edge_map.dim(1) != g || edge_map.dim(2) != g || vertex_map.dim(1) != g ||
        vertex_map.dim(2) != g) {
        throw std::invalid_argument("fuse_features: spatial size mismatch between maps");
    }
    const std::size_t cb = backbone_fm.dim(0);
    Tensor cat({cb + 2, g, g});
    std::copy(backbone_fm.data(), backbone_fm.data() + backbone_fm.size(), cat.data());
    std::copy(edge_map.data(), edge_map.data() + g * g, cat.data() + cb * g * g);
    std::copy(vertex_map.data(), vertex_map.data() + g * g, cat.data() + (cb + 1) * g * g);

    Tensor z = conv2d_forward(cat, params.get("fuse.w").value, params.get("fuse.b").value, 1);
    Tensor fused = relu(z);
    if (cache) {
        cache->concat = std::move(cat);
        cache->fuse_z = std::move(z);
        cache->fused = fused;
    }
    return fused;
}

namespace {

Tensor neighbor_mean(const Tensor& node_feats, const RingGraph& g) {
    const std::size_t k = node_feats.dim(0);
    const std::size_t d = node_feats.dim(1);
    Tensor out({k, d});
    for (std::size_t i = 0; i < k; ++i) {
        const auto& nb = g.neighbors[i];
        double* row = out.data() + i * d;
        for (int j : nb) {
            const double* src = node_feats.data() + static_cast<std::size_t>(j) * d;
            for (std::size_t c = 0; c < d; ++c) row[c] += src[c];
        }
        const double inv = 1.0 / static_cast<double>(nb.size());
        for (std::size_t c = 0; c < d; ++c) row[c] *= inv;
    }
    return out;
}

}  // namespace

Tensor gcn_layer_forward(const Tensor& node_feats, const RingGraph& g, const Tensor& w_self,
                         const Tensor& w_neigh, const Tensor& b, Tensor* pre_act) {
    if (static_cast<int>(node_feats.dim(0)) != g.num_nodes) {
        throw std::invalid_argument("gcn_layer_forward: " + std::to_string(node_feats.dim(0)) +
                                    " nodes vs graph with " + std::to_string(g.num_nodes));
    }
    Tensor z = linear_forward(node_feats, w_self, b);
    const Tensor nm = neighbor_mean(node_feats, g);
    const Tensor zero_bias({w_neigh.dim(0)});
    const Tensor zn = linear_forward(nm, w_neigh, zero_bias);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += zn[i];
    Tensor out = relu(z);
    if (pre_act) *pre_act = std::move(z);
    return out;
}

GeneratorOutput predict_contour(const Tensor& image, const ParamStore& params,
                                const GeneratorConfig& cfg, GeneratorCache* cache) {
    cfg.validate();
    GeneratorOutput out;
    if (cache) cache->image = image;

    std::vector<ConvStageCache> stage_cache;
    out.backbone_fm = backbone_forward(image, params, cfg, &stage_cache);
    branches_forward(out.backbone_fm, params, cfg, out.edge_map, out.vertex_map, cache);
    out.fused_fm = fuse_features(out.backbone_fm, out.edge_map, out.vertex_map, params, cfg, cache);
    if (cache) cache->stages = std::move(stage_cache);

    const RingGraph ring = ring_adjacency(cfg.num_vertices);
    const std::size_t k = static_cast<std::size_t>(cfg.num_vertices);
    const std::size_t cf = static_cast<std::size_t>(cfg.fused_channels);

    std::vector<Point01> coords = initial_contour(cfg.num_vertices).vertices;
    for (int t = 0; t < cfg.refine_iterations; ++t) {
        GcnIterCache iter;
        iter.coords_in = coords;
        iter.sampled = bilinear_sample(out.fused_fm, coords);
        iter.node_in = Tensor({k, 2 + cf});
        for (std::size_t i = 0; i < k; ++i) {
            double* row = iter.node_in.data() + i * (2 + cf);
            row[0] = coords[i].x;
            row[1] = coords[i].y;
            const double* feat = iter.sampled.data() + i * cf;
            std::copy(feat, feat + cf, row + 2);
        }

        const Tensor* h = &iter.node_in;
        for (int l = 0; l < cfg.gcn_layers; ++l) {
            const std::string prefix = "gcn.l" + std::to_string(l);
            Tensor z;
            Tensor a = gcn_layer_forward(*h, ring, params.get(prefix + ".self.w").value,
                                         params.get(prefix + ".neigh.w").value,
                                         params.get(prefix + ".b").value, &z);
            iter.layer_z.push_back(std::move(z));
            iter.layer_a.push_back(std::move(a));
            h = &iter.layer_a.back();
        }

        iter.offsets =
            linear_forward(*h, params.get("offset.w").value, params.get("offset.b").value);
        iter.pre_clamp.resize(k);
        iter.coords_out.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            iter.pre_clamp[i] = {coords[i].x + iter.offsets(i, 0),
                                 coords[i].y + iter.offsets(i, 1)};
            iter.coords_out[i] = clamp01(iter.pre_clamp[i]);
        }
        coords = iter.coords_out;
        if (cache) cache->iters.push_back(std::move(iter));
    }

    out.contour.vertices = std::move(coords);
    return out;
}

void generator_backward(const GeneratorCache& cache, const ParamStore& params,
                        const GeneratorConfig& cfg, const RingGraph& ring,
                        const Tensor& grad_contour, const Tensor& grad_backbone_ext,
                        const Tensor& grad_edge_logits, const Tensor& grad_vertex_logits,
                        ParamStore& grads) {
    const std::size_t k = static_cast<std::size_t>(cfg.num_vertices);
    const std::size_t cf = static_cast<std::size_t>(cfg.fused_channels);
    const std::size_t cb = static_cast<std::size_t>(cfg.backbone_channels);
    const std::size_t g = static_cast<std::size_t>(cfg.grid_size);

    Tensor g_coords = grad_contour;  // K x 2, updated as we walk iterations backward
    Tensor g_fused({cf, g, g});

    for (int t = static_cast<int>(cache.iters.size()) - 1; t >= 0; --t) {
        const GcnIterCache& iter = cache.iters[t];
        // clamp gate: zero gradient where the pre-clamp coordinate fell outside
        Tensor g_pre({k, 2});
        for (std::size_t i = 0; i < k; ++i) {
            const bool gx = iter.pre_clamp[i].x >= 0.0 && iter.pre_clamp[i].x <= 1.0;
            const bool gy = iter.pre_clamp[i].y >= 0.0 && iter.pre_clamp[i].y <= 1.0;
            g_pre(i, 0) = gx ? g_coords(i, 0) : 0.0;
            g_pre(i, 1) = gy ? g_coords(i, 1) : 0.0;
        }
        Tensor g_prev = g_pre;  // identity path: out = clamp(in + offset)

        // offset head
        const Tensor& last_a = iter.layer_a.back();
        Tensor g_h({k, static_cast<std::size_t>(cfg.gcn_hidden)});
        linear_backward(last_a, params.get("offset.w").value, g_pre, &g_h,
                        grads.get("offset.w").grad, grads.get("offset.b").grad);

        // GCN stack
        for (int l = cfg.gcn_layers - 1; l >= 0; --l) {
            const std::string prefix = "gcn.l" + std::to_string(l);
            const Tensor& input = (l == 0) ? iter.node_in : iter.layer_a[l - 1];
            const Tensor g_z = relu_backward(iter.layer_z[l], g_h);
            Tensor g_input(input.shape());
            Tensor g_nm(input.shape());
            linear_backward(input, params.get(prefix + ".self.w").value, g_z, &g_input,
                            grads.get(prefix + ".self.w").grad, grads.get(prefix + ".b").grad);
            const Tensor nm = neighbor_mean(input, ring);
            Tensor bias_scratch({static_cast<std::size_t>(cfg.gcn_hidden)});
            linear_backward(nm, params.get(prefix + ".neigh.w").value, g_z, &g_nm,
                            grads.get(prefix + ".neigh.w").grad, bias_scratch);
            // scatter the mean gradient back to the neighbors
            const std::size_t d = input.dim(1);
            for (std::size_t i = 0; i < k; ++i) {
                const auto& nb = ring.neighbors[i];
                const double inv = 1.0 / static_cast<double>(nb.size());
                const double* src = g_nm.data() + i * d;
                for (int j : nb) {
                    double* dst = g_input.data() + static_cast<std::size_t>(j) * d;
                    for (std::size_t c = 0; c < d; ++c) dst[c] += inv * src[c];
                }
            }
            g_h = std::move(g_input);
        }

        // split node input gradient into coordinates and sampled features
        Tensor g_sampled({k, cf});
        for (std::size_t i = 0; i < k; ++i) {
            const double* row = g_h.data() + i * (2 + cf);
            g_prev(i, 0) += row[0];
            g_prev(i, 1) += row[1];
            std::copy(row + 2, row + 2 + cf, g_sampled.data() + i * cf);
        }
        Tensor g_pts({k, 2});
        bilinear_sample_backward(cache.fused, iter.coords_in, g_sampled, &g_fused, &g_pts);
        for (std::size_t i = 0; i < 2 * k; ++i) g_prev[i] += g_pts[i];

        g_coords = std::move(g_prev);
    }
    // g_coords now holds the gradient on the (constant) initial contour; dropped.

    // fuse conv
    const Tensor g_fuse_z = relu_backward(cache.fuse_z, g_fused);
    Tensor g_concat(cache.concat.shape());
    conv2d_backward(cache.concat, params.get("fuse.w").value, g_fuse_z, 1, &g_concat,
                    grads.get("fuse.w").grad, grads.get("fuse.b").grad);

    Tensor g_backbone({cb, g, g});
    std::copy(g_concat.data(), g_concat.data() + cb * g * g, g_backbone.data());
    if (!grad_backbone_ext.empty()) g_backbone.add_scaled(grad_backbone_ext, 1.0);

    // branches feed from the backbone map as well
    struct BranchRefs {
        const char* name;
        const Tensor* conv_z;
        const Tensor* conv_a;
        const Tensor* map;
        const Tensor* ext_logits;
        std::size_t channel;
    };
    const BranchRefs branches[2] = {
        {"edge", &cache.edge_conv_z, &cache.edge_conv_a, &cache.edge_map, &grad_edge_logits, cb},
        {"vertex", &cache.vertex_conv_z, &cache.vertex_conv_a, &cache.vertex_map,
         &grad_vertex_logits, cb + 1},
    };
    for (const auto& br : branches) {
        Tensor g_map({1, g * g});
        std::copy(g_concat.data() + br.channel * g * g, g_concat.data() + (br.channel + 1) * g * g,
                  g_map.data());
        const Tensor map_flat({1, g * g}, br.map->values());
        Tensor g_fc_z = sigmoid_backward(map_flat, g_map);
        if (!br.ext_logits->empty()) {
            for (std::size_t i = 0; i < g * g; ++i) g_fc_z[i] += br.ext_logits->values()[i];
        }
        const std::string name(br.name);
        const Tensor flat_a({1, br.conv_a->size()}, br.conv_a->values());
        Tensor g_flat({1, br.conv_a->size()});
        linear_backward(flat_a, params.get(name + ".fc.w").value, g_fc_z, &g_flat,
                        grads.get(name + ".fc.w").grad, grads.get(name + ".fc.b").grad);
        const Tensor g_conv_a(br.conv_a->shape(), g_flat.values());
        const Tensor g_conv_z = relu_backward(*br.conv_z, g_conv_a);
        conv2d_backward(cache.stages.back().a, params.get(name + ".conv.w").value, g_conv_z, 1,
                        &g_backbone, grads.get(name + ".conv.w").grad,
                        grads.get(name + ".conv.b").grad);
    }

    // backbone chain
    const int stages = cfg.downsample_stages();
    Tensor g_out = std::move(g_backbone);
    for (int i = stages + 1; i >= 0; --i) {
        std::string prefix;
        int stride;
        if (i < stages) {
            prefix = "backbone.s" + std::to_string(i);
            stride = 2;
        } else {
            prefix = std::string("backbone.r") + (i == stages ? "0" : "1");
            stride = 1;
        }
        const Tensor& input = (i == 0) ? cache.image : cache.stages[i - 1].a;
        const Tensor g_z = relu_backward(cache.stages[i].z, g_out);
        if (i == 0) {
            conv2d_backward(input, params.get(prefix + ".w").value, g_z, stride, nullptr,
                            grads.get(prefix + ".w").grad, grads.get(prefix + ".b").grad);
        } else {
            Tensor g_in(input.shape());
            conv2d_backward(input, params.get(prefix + ".w").value, g_z, stride, &g_in,
                            grads.get(prefix + ".w").grad, grads.get(prefix + ".b").grad);
            g_out = std::move(g_in);
        }
    }
}

MatchingLoss matching_loss(const Contour& pred, const Contour& target) {
    const std::size_t k = pred.size();
    if (k != target.size() || k == 0) {
        throw std::invalid_argument("matching_loss: contour sizes differ (" + std::to_string(k) +
                                    " vs " + std::to_string(target.size()) + ")");
    }
    MatchingLoss best;
    best.loss = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const Point01& p = pred.vertices[i];
            const Point01& t = target.vertices[(j + i) % k];
            s += std::hypot(p.x - t.x, p.y - t.y);
        }
        if (best.loss < 0.0 || s < best.loss) {
            best.loss = s;
            best.best_shift = static_cast<int>(j);
        }
    }
    return best;
}

Tensor matching_loss_backward(const Contour& pred, const Contour& target, int best_shift,
                              double scale) {
    const std::size_t k = pred.size();
    Tensor grad({k, 2});
    for (std::size_t i = 0; i < k; ++i) {
        const Point01& p = pred.vertices[i];
        const Point01& t = target.vertices[(best_shift + i) % k];
        const double dx = p.x - t.x;
        const double dy = p.y - t.y;
        const double norm = std::hypot(dx, dy);
        if (norm > 0.0) {
            grad(i, 0) = scale * dx / norm;
            grad(i, 1) = scale * dy / norm;
        }
    }
    return grad;
}

}  // namespace crend
