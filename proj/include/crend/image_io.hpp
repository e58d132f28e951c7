#pragma once

#include <string>

#include "crend/geometry.hpp"
#include "crend/tensor.hpp"

namespace crend {

// Binary PPM (P6, maxval 255). image: 3 x H x W with values in [0, 1],
// quantized as round(v * 255).
void write_image_ppm(const Tensor& image, const std::string& path);
Tensor read_image_ppm(const std::string& path);

// Binary PGM (P5, maxval 255); foreground pixels are written as 255.
void write_mask_pgm(const Mask& mask, const std::string& path);
Mask read_mask_pgm(const std::string& path);

}  // namespace crend
