#include "crend/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "crend/generator.hpp"
#include "crend/nn.hpp"
#include "crend/renderer.hpp"

namespace crend {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return std::max(1, std::min(8, static_cast<int>(hw)));
}

namespace {

double sample_iou(const Sample& sample, const ParamStore& params, const TrainConfig& cfg,
                  EvalMode mode) {
    const int size = cfg.generator.image_size;
    const GeneratorOutput out = predict_contour(sample.image, params, cfg.generator);
    if (mode == EvalMode::kContourOnly) {
        return mask_iou(rasterize_polygon(out.contour, size, size), sample.gt_mask);
    }
    const SampledPoints pts = sample_test_grid(out.contour, cfg.renderer.test_grid_side,
                                               cfg.renderer.test_square_size);
    const Tensor feats = bilinear_sample(out.backbone_fm, pts.points);
    const Tensor probs = softmax_rows(classify_points(feats, params));
    std::vector<double> fg(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) fg[i] = probs(i, 1);
    const Mask rendered =
        render_mask(out.contour, pts.points, fg, cfg.renderer.fg_threshold, size, size);
    return mask_iou(rendered, sample.gt_mask);
}

}  // namespace

EvalReport evaluate(const ParamStore& params, const TrainConfig& cfg, const DatasetSplit& split,
                    EvalMode mode, int threads) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    for (const Sample& s : split.samples) {
        if (static_cast<int>(s.image.dim(1)) != cfg.generator.image_size) {
            throw std::invalid_argument("evaluate: sample image size " +
                                        std::to_string(s.image.dim(1)) +
                                        " does not match config image_size " +
                                        std::to_string(cfg.generator.image_size));
        }
    }

    const int workers = std::min<int>(resolve_threads(threads), static_cast<int>(split.size()));
    std::vector<double> ious(split.size(), 0.0);
    auto run_range = [&](int worker) {
        for (std::size_t i = worker; i < split.size(); i += workers) {
            ious[i] = sample_iou(split.samples[i], params, cfg, mode);
        }
    };
    if (workers <= 1) {
        run_range(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
        for (auto& t : pool) t.join();
    }

    EvalReport report;
    std::array<double, kNumCategories> sums{};
    for (std::size_t i = 0; i < split.size(); ++i) {
        const int c = static_cast<int>(split.samples[i].category);
        sums[c] += ious[i];
        report.counts[c] += 1;
    }
    double total = 0.0;
    for (int c = 0; c < kNumCategories; ++c) {
        if (report.counts[c] == 0) {
            throw std::invalid_argument(std::string("evaluate: split has no samples of category ") +
                                        category_name(static_cast<ShapeCategory>(c)));
        }
        report.per_category[c] = sums[c] / report.counts[c];
        total += report.per_category[c];
    }
    report.mean = total / kNumCategories;
    return report;
}

std::string eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-14s", "method");
    out += buf;
    for (int c = 0; c < kNumCategories; ++c) {
        std::snprintf(buf, sizeof(buf), " %10s", category_name(static_cast<ShapeCategory>(c)));
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), " %10s\n", "mean");
    out += buf;
    for (const auto& [name, report] : rows) {
        std::snprintf(buf, sizeof(buf), "%-14s", name.c_str());
        out += buf;
        for (int c = 0; c < kNumCategories; ++c) {
            std::snprintf(buf, sizeof(buf), " %10.4f", report.per_category[c]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), " %10.4f\n", report.mean);
        out += buf;
    }
    return out;
}

void write_eval_csv(const std::vector<std::pair<std::string, EvalReport>>& rows,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_eval_csv: cannot open " + path);
    out << "method";
    for (int c = 0; c < kNumCategories; ++c) {
        out << "," << category_name(static_cast<ShapeCategory>(c));
    }
    out << ",mean\n";
    char buf[32];
    for (const auto& [name, report] : rows) {
        out << name;
        for (int c = 0; c < kNumCategories; ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", report.per_category[c]);
            out << "," << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.6f", report.mean);
        out << "," << buf << "\n";
    }
}

}  // namespace crend
