#include "crend/train.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "crend/eval.hpp"
#include "crend/gradcheck.hpp"
#include "crend/nn.hpp"
#include "crend/renderer.hpp"

namespace crend {

namespace {

constexpr std::uint64_t kInitSalt = 0xA11CE5EEDULL;
constexpr std::uint64_t kPointSalt = 0x504F494E54ULL;
constexpr std::uint64_t kOrderSalt = 0x4F524445ULL;

// one-hot map of contour vertices on the feature grid
Tensor vertex_hit_map(const Contour& c, int grid) {
    Tensor map({1, static_cast<std::size_t>(grid), static_cast<std::size_t>(grid)});
    for (const Point01& p : c.vertices) {
        const int cx = static_cast<int>(std::lround(p.x * (grid - 1)));
        const int cy = static_cast<int>(std::lround(p.y * (grid - 1)));
        map(0, cy, cx) = 1.0;
    }
    return map;
}

}  // namespace

double scheduled_lr(const TrainConfig& cfg, int epoch) {
    return cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

SampleLoss sample_loss(const Sample& sample, const Contour& target_k, const ParamStore& params,
                       const TrainConfig& cfg, const RingGraph& ring, std::uint64_t point_seed,
                       ParamStore* grads) {
    const double lambda = cfg.renderer.loss_weight;
    SampleLoss result;

    GeneratorCache cache;
    const bool need_cache = grads != nullptr || cfg.branch_supervision;
    const GeneratorOutput out =
        predict_contour(sample.image, params, cfg.generator, need_cache ? &cache : nullptr);

    const MatchingLoss match = matching_loss(out.contour, target_k);
    result.match = match.loss;

    // renderer: points offset from the predicted vertices, targets from the
    // ground-truth region (or the prediction itself when configured so)
    Rng point_rng(point_seed);
    SampledPoints pts = sample_train_points(out.contour, cfg.renderer.train_samples_per_vertex,
                                            cfg.renderer.train_offset_range, point_rng);
    Tensor feats;
    Tensor logits;
    RendererLoss render;
    const bool have_points = !pts.points.empty();
    if (have_points) {
        feats = bilinear_sample(out.backbone_fm, pts.points);
        logits = classify_points(feats, params);
        const std::vector<int> labels =
            cfg.render_targets_from_prediction
                ? point_targets(pts.points, out.contour)
                : point_targets(pts.points, sample.gt_contour);
        render = renderer_loss(logits, labels);
        result.render = render.loss;
    }

    // optional branch supervision against rasterized boundary / vertex maps
    BceResult edge_bce, vertex_bce;
    if (cfg.branch_supervision) {
        const Tensor edge_target = vertex_hit_map(sample.gt_contour, cfg.generator.grid_size);
        const Tensor vertex_target = vertex_hit_map(target_k, cfg.generator.grid_size);
        const Tensor edge_logits({1, cache.edge_fc_z.size()}, cache.edge_fc_z.values());
        const Tensor vertex_logits({1, cache.vertex_fc_z.size()}, cache.vertex_fc_z.values());
        edge_bce = bce_with_logits(edge_logits,
                                   Tensor({1, edge_target.size()}, edge_target.values()));
        vertex_bce = bce_with_logits(vertex_logits,
                                     Tensor({1, vertex_target.size()}, vertex_target.values()));
        result.branches = edge_bce.loss + vertex_bce.loss;
    }

    if (!grads) return result;

    // ---- backward ----
    const std::size_t k = out.contour.size();
    Tensor grad_contour = matching_loss_backward(out.contour, target_k, match.best_shift, 1.0);
    Tensor grad_backbone;

    if (have_points && lambda != 0.0) {
        Tensor grad_logits = render.grad_logits;
        for (double& g : grad_logits.values()) g *= lambda;
        Tensor grad_feats({pts.size(), feats.dim(1)});
        linear_backward(feats, params.get("render.w").value, grad_logits, &grad_feats,
                        grads->get("render.w").grad, grads->get("render.b").grad);
        grad_backbone = Tensor(out.backbone_fm.shape());
        Tensor grad_pts({pts.size(), 2});
        bilinear_sample_backward(out.backbone_fm, pts.points, grad_feats, &grad_backbone,
                                 &grad_pts);
        // route the point-coordinate gradients to their source vertices
        // through the clamp gate
        for (std::size_t m = 0; m < pts.size(); ++m) {
            const std::size_t v = static_cast<std::size_t>(pts.source_vertex[m]);
            if (pts.inside01_x[m]) grad_contour(v, 0) += grad_pts(m, 0);
            if (pts.inside01_y[m]) grad_contour(v, 1) += grad_pts(m, 1);
        }
    }

    Tensor grad_edge_logits, grad_vertex_logits;
    if (cfg.branch_supervision) {
        grad_edge_logits = std::move(edge_bce.grad_logits);
        grad_vertex_logits = std::move(vertex_bce.grad_logits);
    }

    generator_backward(cache, params, cfg.generator, ring, grad_contour, grad_backbone,
                       grad_edge_logits, grad_vertex_logits, *grads);
    return result;
}

namespace {

std::vector<int> category_interleaved_order(const DatasetSplit& split, Rng& rng) {
    std::array<std::vector<int>, kNumCategories> groups;
    for (std::size_t i = 0; i < split.size(); ++i) {
        groups[static_cast<int>(split.samples[i].category)].push_back(static_cast<int>(i));
    }
    for (auto& g : groups) rng.shuffle(g);
    std::vector<int> order;
    order.reserve(split.size());
    std::array<std::size_t, kNumCategories> pos{};
    while (order.size() < split.size()) {
        for (int c = 0; c < kNumCategories; ++c) {
            if (pos[c] < groups[c].size()) order.push_back(groups[c][pos[c]++]);
        }
    }
    return order;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetSplit& train_split,
                  const DatasetSplit& val_split) {
    cfg.validate();
    if (train_split.empty()) throw std::invalid_argument("train: empty training split");
    for (const Sample& s : train_split.samples) {
        if (static_cast<int>(s.image.dim(1)) != cfg.generator.image_size) {
            throw std::invalid_argument("train: sample image size does not match config");
        }
    }

    Rng init_rng(mix_seeds(cfg.seed, kInitSalt));
    ParamStore params;
    init_generator_params(params, cfg.generator, init_rng, /*zero_offset_head=*/true);
    init_renderer_params(params, cfg.generator.backbone_channels, init_rng, /*zero_head=*/true);

    AdamW optimizer(AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    optimizer.attach(params);
    const RingGraph ring = ring_adjacency(cfg.generator.num_vertices);

    std::vector<Contour> targets;
    targets.reserve(train_split.size());
    for (const Sample& s : train_split.samples) {
        targets.push_back(resample_contour(s.gt_contour, cfg.generator.num_vertices));
    }

    const int batch = cfg.batch_size;
    std::vector<ParamStore> slot_grads;
    slot_grads.reserve(batch);
    for (int b = 0; b < batch; ++b) slot_grads.push_back(params.clone_layout());

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        optimizer.config().lr = scheduled_lr(cfg, epoch);
        Rng order_rng(mix_seeds(cfg.seed ^ kOrderSalt, static_cast<std::uint64_t>(epoch)));
        const std::vector<int> order = category_interleaved_order(train_split, order_rng);

        double sum_match = 0.0;
        double sum_render = 0.0;
        int step = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
            const int count = static_cast<int>(std::min<std::size_t>(batch, order.size() - start));
            std::vector<SampleLoss> losses(count);
            std::vector<std::exception_ptr> errors(count);

            auto run_slot = [&](int b) {
                const int idx = order[start + b];
                try {
                    slot_grads[b].zero_grad();
                    losses[b] = sample_loss(
                        train_split.samples[idx], targets[idx], params, cfg, ring,
                        mix_seeds(cfg.seed ^ kPointSalt, static_cast<std::uint64_t>(epoch),
                                  static_cast<std::uint64_t>(idx)),
                        &slot_grads[b]);
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            };
            const int workers = std::min(resolve_threads(cfg.threads), count);
            if (workers <= 1) {
                for (int b = 0; b < count; ++b) run_slot(b);
            } else {
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (int w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (int b = w; b < count; b += workers) run_slot(b);
                    });
                }
                for (auto& t : pool) t.join();
            }
            for (int b = 0; b < count; ++b) {
                if (errors[b]) std::rethrow_exception(errors[b]);
                const double total = losses[b].total(cfg.renderer.loss_weight);
                if (!std::isfinite(total)) {
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + " step " +
                                             std::to_string(step) + " (sample " +
                                             std::to_string(train_split.samples[order[start + b]].id) +
                                             ")");
                }
                sum_match += losses[b].match;
                sum_render += losses[b].render;
            }

            // batch gradient = mean of per-sample gradients, merged in sample order
            params.zero_grad();
            const double inv = 1.0 / count;
            for (int b = 0; b < count; ++b) params.add_grads_scaled(slot_grads[b], inv);
            optimizer.step(params);
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.loss_match = sum_match / static_cast<double>(order.size());
        em.loss_render = sum_render / static_cast<double>(order.size());
        if (!val_split.empty()) {
            em.val_miou_contour =
                evaluate(params, cfg, val_split, EvalMode::kContourOnly, cfg.threads).mean;
            em.val_miou_rendered =
                evaluate(params, cfg, val_split, EvalMode::kRendered, cfg.threads).mean;
        } else {
            em.val_miou_contour = std::nan("");
            em.val_miou_rendered = std::nan("");
        }
        result.metrics.push_back(em);
    }

    result.checkpoint.config = cfg;
    result.checkpoint.epoch = cfg.epochs;
    result.checkpoint.params = std::move(params);
    result.checkpoint.optimizer = std::move(optimizer);
    return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "epoch,loss_match,loss_render,val_miou_contour,val_miou_rendered\n";
    char buf[160];
    for (const EpochMetrics& m : metrics) {
        std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f,%.9f\n", m.epoch, m.loss_match,
                      m.loss_render, m.val_miou_contour, m.val_miou_rendered);
        out << buf;
    }
}

double run_full_gradcheck(const TrainConfig& cfg, std::uint64_t seed, std::ostream& out) {
    cfg.validate();
    Rng rng(mix_seeds(seed, kInitSalt));
    ParamStore params;
    init_generator_params(params, cfg.generator, rng, /*zero_offset_head=*/false);
    // keep the random offsets small so vertices stay strictly inside [0,1]
    for (double& v : params.get("offset.w").value.values()) v *= 0.1;
    init_renderer_params(params, cfg.generator.backbone_channels, rng, /*zero_head=*/false);

    const Sample sample =
        gen_sample(mix_seeds(seed, 7), ShapeCategory::kBlob, cfg.generator.image_size);
    const Contour target = resample_contour(sample.gt_contour, cfg.generator.num_vertices);
    const RingGraph ring = ring_adjacency(cfg.generator.num_vertices);
    const std::uint64_t point_seed = mix_seeds(seed, kPointSalt);

    params.zero_grad();
    sample_loss(sample, target, params, cfg, ring, point_seed, &params);
    const auto loss_fn = [&](const ParamStore& p) {
        return sample_loss(sample, target, p, cfg, ring, point_seed, nullptr)
            .total(cfg.renderer.loss_weight);
    };

    double worst = 0.0;
    std::string worst_name;
    for (const auto& name : params.names()) {
        const GradCheckReport rep = finite_diff_gradcheck(loss_fn, params, {name});
        char line[160];
        std::snprintf(line, sizeof(line), "%-18s max_rel_err %.3e\n", name.c_str(),
                      rep.max_rel_err);
        out << line;
        if (rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_name = name;
        }
    }
    out << "worst: " << worst_name << " (" << worst << ")\n";
    return worst;
}

}  // namespace crend
