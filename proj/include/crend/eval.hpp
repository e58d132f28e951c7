#pragma once

#include <array>
#include <string>

#include "crend/config.hpp"
#include "crend/data.hpp"
#include "crend/params.hpp"

namespace crend {

enum class EvalMode {
    kContourOnly,  // IoU of the rasterized predicted contour
    kRendered,     // IoU after pasting classified grid points
};

struct EvalReport {
    std::array<double, kNumCategories> per_category{};
    std::array<int, kNumCategories> counts{};
    double mean = 0.0;  // arithmetic mean of the 8 per-category values
};

// Per-sample IoU against the ground-truth mask, averaged per category.
// Every category must be present in the split.
EvalReport evaluate(const ParamStore& params, const TrainConfig& cfg, const DatasetSplit& split,
                    EvalMode mode, int threads = 0);

// Human-readable table: one header row of category names plus Mean, one row
// per provided report.
std::string eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

// CSV with the same column order.
void write_eval_csv(const std::vector<std::pair<std::string, EvalReport>>& rows,
                    const std::string& path);

int resolve_threads(int requested);

}  // namespace crend
