#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crend/geometry.hpp"
#include "crend/tensor.hpp"

namespace crend {

enum class ShapeCategory {
    kTriangle = 0,
    kRectangle,
    kEllipse,
    kStar,
    kBlob,
    kNotched,
    kLShape,
    kRingCut,
};

inline constexpr int kNumCategories = 8;

const char* category_name(ShapeCategory c);
ShapeCategory category_from_name(const std::string& name);

struct Sample {
    int id = 0;
    ShapeCategory category = ShapeCategory::kTriangle;
    Tensor image;        // 3 x S x S, values in [0, 1]
    Contour gt_contour;  // dense clockwise polygon
    Mask gt_mask;        // rasterize_polygon(gt_contour, S, S)
};

struct DatasetSplit {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// One synthetic single-object image: a random simple polygon of the given
// category centered near (0.5, 0.5), filled with a random foreground color
// over a random background, plus Gaussian pixel noise (sigma 0.02).
// Deterministic per seed.
Sample gen_sample(std::uint64_t seed, ShapeCategory category, int image_size);

// Balanced split: sample i has category i % 8 and an independent seed stream
// derived from (base_seed, split_id, i).
DatasetSplit generate_split(std::uint64_t base_seed, int split_id, int count, int image_size);

// Writes one JSON record per line ({id, category, image_file, contour}) with
// contour coordinates rounded to 9 decimals; images go to an images/
// directory beside the index as binary PPM files.
void write_dataset(const DatasetSplit& split, const std::string& index_path);

// Exact inverse of write_dataset; masks are rebuilt by rasterizing the
// stored contours.
DatasetSplit read_dataset(const std::string& index_path);

}  // namespace crend
