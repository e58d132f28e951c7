#include "crend/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace crend {

Point01 clamp01(Point01 p) {
    p.x = std::clamp(p.x, 0.0, 1.0);
    p.y = std::clamp(p.y, 0.0, 1.0);
    return p;
}

double signed_area(const Contour& c) {
    const auto& v = c.vertices;
    if (v.size() < 3) {
        throw std::invalid_argument("signed_area: need at least 3 vertices, got " +
                                    std::to_string(v.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point01& a = v[i];
        const Point01& b = v[(i + 1) % v.size()];
        sum += a.x * b.y - b.x * a.y;
    }
    return 0.5 * sum;
}

double contour_perimeter(const Contour& c) {
    const auto& v = c.vertices;
    double len = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point01& a = v[i];
        const Point01& b = v[(i + 1) % v.size()];
        len += std::hypot(b.x - a.x, b.y - a.y);
    }
    return len;
}

Contour resample_contour(const Contour& c, int k) {
    const auto& v = c.vertices;
    if (v.size() < 3) {
        throw std::invalid_argument("resample_contour: need at least 3 vertices, got " +
                                    std::to_string(v.size()));
    }
    if (k < 3) {
        throw std::invalid_argument("resample_contour: k must be >= 3, got " + std::to_string(k));
    }
    const std::size_t n = v.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Point01& a = v[i];
        const Point01& b = v[(i + 1) % n];
        cum[i + 1] = cum[i] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double perimeter = cum[n];
    if (!(perimeter > 0.0)) {
        throw std::invalid_argument("resample_contour: contour has zero perimeter");
    }

    Contour out;
    out.vertices.reserve(k);
    std::size_t edge = 0;
    for (int i = 0; i < k; ++i) {
        const double d = perimeter * static_cast<double>(i) / k;
        while (edge < n - 1 && cum[edge + 1] <= d) ++edge;
        const Point01& a = v[edge];
        const Point01& b = v[(edge + 1) % n];
        const double seg = cum[edge + 1] - cum[edge];
        const double t = seg > 0.0 ? (d - cum[edge]) / seg : 0.0;
        out.vertices.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

bool point_in_polygon(const Point01& pt, const Contour& c) {
    const auto& v = c.vertices;
    const std::size_t n = v.size();
    bool inside = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point01& a = v[i];
        const Point01& b = v[(i + 1) % n];
        if ((a.y < pt.y) != (b.y < pt.y)) {
            const double cross_x = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (pt.x < cross_x) inside = !inside;
        }
    }
    return inside;
}

Mask rasterize_polygon(const Contour& c, int height, int width) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("rasterize_polygon: bad dimensions " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    const auto& v = c.vertices;
    if (v.size() < 3) {
        throw std::invalid_argument("rasterize_polygon: need at least 3 vertices, got " +
                                    std::to_string(v.size()));
    }

    Mask mask(height, width);
    std::vector<double> crossings;
    crossings.reserve(v.size());
    for (int r = 0; r < height; ++r) {
        const double py = (r + 0.5) / height;
        crossings.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point01& a = v[i];
            const Point01& b = v[(i + 1) % v.size()];
            if ((a.y < py) != (b.y < py)) {
                crossings.push_back(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        if (crossings.empty()) continue;
        std::sort(crossings.begin(), crossings.end());
        // Sweep left to right; a pixel is inside iff an odd number of
        // crossings lies strictly to its right, matching point_in_polygon.
        std::size_t idx = 0;
        for (int col = 0; col < width; ++col) {
            const double px = (col + 0.5) / width;
            while (idx < crossings.size() && !(px < crossings[idx])) ++idx;
            if ((crossings.size() - idx) & 1U) mask.at(r, col) = 1;
        }
    }
    return mask;
}

double mask_iou(const Mask& a, const Mask& b) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument("mask_iou: dimension mismatch " + std::to_string(a.height) +
                                    "x" + std::to_string(a.width) + " vs " +
                                    std::to_string(b.height) + "x" + std::to_string(b.width));
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const bool fa = a.labels[i] != 0;
        const bool fb = b.labels[i] != 0;
        inter += fa && fb;
        uni += fa || fb;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Contour initial_contour(int k) {
    if (k < 3) {
        throw std::invalid_argument("initial_contour: k must be >= 3, got " + std::to_string(k));
    }
    Contour c;
    c.vertices.reserve(k);
    for (int i = 0; i < k; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / k;
        c.vertices.push_back({0.5 + 0.35 * std::sin(phi), 0.5 - 0.35 * std::cos(phi)});
    }
    return c;
}

}  // namespace crend
