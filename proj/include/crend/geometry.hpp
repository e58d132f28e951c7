#pragma once

#include <cstdint>
#include <vector>

namespace crend {

// Normalized image coordinates: x grows rightward, y grows downward,
// both in [0, 1].
struct Point01 {
    double x = 0.0;
    double y = 0.0;
};

Point01 clamp01(Point01 p);

// Closed polygon. Vertices are expected in clockwise order under the y-down
// convention, i.e. signed_area() > 0.
struct Contour {
    std::vector<Point01> vertices;

    Contour() = default;
    explicit Contour(std::vector<Point01> v) : vertices(std::move(v)) {}
    std::size_t size() const { return vertices.size(); }
};

// Binary label grid, row-major, values in {0, 1}.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;

    Mask() = default;
    Mask(int h, int w) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int r, int c) { return labels[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t at(int r, int c) const { return labels[static_cast<std::size_t>(r) * width + c]; }
};

// Shoelace sum 0.5 * sum(x_i * y_{i+1} - x_{i+1} * y_i); positive means
// clockwise in image coordinates.
double signed_area(const Contour& c);

double contour_perimeter(const Contour& c);

// k points at equal arc-length spacing along the closed polyline, starting at
// vertex 0 and preserving traversal order.
Contour resample_contour(const Contour& c, int k);

// Even-odd ray cast toward +x. An edge counts iff one endpoint is strictly
// above the ray (y < pt.y) and the other at-or-below.
bool point_in_polygon(const Point01& pt, const Contour& c);

// Pixel (r, c) is foreground iff its center ((c+0.5)/W, (r+0.5)/H) is inside
// the polygon under the same even-odd rule as point_in_polygon.
Mask rasterize_polygon(const Contour& c, int height, int width);

// |a AND b| / |a OR b|; defined as 1.0 when both masks are empty.
double mask_iou(const Mask& a, const Mask& b);

// Circle of radius 0.35 around (0.5, 0.5), k points clockwise starting at the
// topmost point.
Contour initial_contour(int k);

}  // namespace crend
