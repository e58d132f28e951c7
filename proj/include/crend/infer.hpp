#pragma once

#include <string>

#include "crend/checkpoint.hpp"

namespace crend {

// Runs the full pipeline on one PPM image and writes four artifacts into
// out_dir: contour.json (K [x, y] pairs), contour_mask.pgm, rendered_mask.pgm
// and points_overlay.ppm (sampled points colored by predicted class).
void run_inference(const Checkpoint& ckpt, const std::string& image_path,
                   const std::string& out_dir);

}  // namespace crend
