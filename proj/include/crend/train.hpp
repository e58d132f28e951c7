#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "crend/checkpoint.hpp"
#include "crend/config.hpp"
#include "crend/data.hpp"
#include "crend/generator.hpp"

namespace crend {

struct EpochMetrics {
    int epoch = 0;
    double loss_match = 0.0;
    double loss_render = 0.0;
    double val_miou_contour = 0.0;
    double val_miou_rendered = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochMetrics> metrics;
};

// lr * decay_factor^floor(epoch / decay_every)
double scheduled_lr(const TrainConfig& cfg, int epoch);

struct SampleLoss {
    double match = 0.0;
    double render = 0.0;    // unweighted cross entropy
    double branches = 0.0;  // optional supervision term
    double total(double lambda) const { return match + lambda * render + branches; }
};

// Composed training objective for one sample: point-matching loss on the
// predicted contour plus the weighted renderer cross entropy over points
// sampled around it (targets from the ground truth). When `grads` is given,
// the full backward pass accumulates into it; otherwise this is a pure
// forward evaluation (the finite-difference harness relies on that).
SampleLoss sample_loss(const Sample& sample, const Contour& target_k, const ParamStore& params,
                       const TrainConfig& cfg, const RingGraph& ring, std::uint64_t point_seed,
                       ParamStore* grads);

// Full training loop with the step-decay schedule; validation metrics are
// appended per epoch when `val_split` is non-empty. Deterministic per seed.
TrainResult train(const TrainConfig& cfg, const DatasetSplit& train_split,
                  const DatasetSplit& val_split);

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);

// Fresh randomly-initialized model on one tiny synthetic sample: runs the
// finite-difference check per parameter group through the composed loss,
// printing one line each. Returns the overall worst relative error.
double run_full_gradcheck(const TrainConfig& cfg, std::uint64_t seed, std::ostream& out);

}  // namespace crend
