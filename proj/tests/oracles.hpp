#pragma once

// Test-side reference implementations, kept independent of the library code
// they are used to check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "crend/geometry.hpp"
#include "crend/rng.hpp"

namespace oracle {

// Even-odd crossing test, ray toward +x, half-open vertex rule: an edge
// counts iff exactly one endpoint lies strictly above the ray.
inline bool point_in_polygon(double px, double py, const std::vector<crend::Point01>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double ax = poly[j].x, ay = poly[j].y;
        const double bx = poly[i].x, by = poly[i].y;
        if ((ay < py) != (by < py)) {
            const double cross_x = ay == by ? ax : ax + (py - ay) * (bx - ax) / (by - ay);
            if (px < cross_x) inside = !inside;
        }
    }
    return inside;
}

// Brute-force per-pixel rasterization at pixel centers.
inline std::vector<std::uint8_t> rasterize(const std::vector<crend::Point01>& poly, int h, int w) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (point_in_polygon((c + 0.5) / w, (r + 0.5) / h, poly)) {
                out[static_cast<std::size_t>(r) * w + c] = 1;
            }
        }
    }
    return out;
}

// Minimum over all cyclic shifts of the summed Euclidean distances.
inline double matching_loss(const std::vector<crend::Point01>& pred,
                            const std::vector<crend::Point01>& target) {
    const std::size_t k = pred.size();
    double best = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const auto& p = pred[i];
            const auto& t = target[(j + i) % k];
            s += std::hypot(p.x - t.x, p.y - t.y);
        }
        if (best < 0.0 || s < best) best = s;
    }
    return best;
}

// Proper segment intersection (shared endpoints of adjacent edges excluded
// by the caller).
inline bool segments_intersect(const crend::Point01& a, const crend::Point01& b,
                               const crend::Point01& c, const crend::Point01& d) {
    const auto orient = [](const crend::Point01& p, const crend::Point01& q,
                           const crend::Point01& r) {
        const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        return v > 0 ? 1 : (v < 0 ? -1 : 0);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

inline bool contour_is_simple(const crend::Contour& c) {
    const auto& v = c.vertices;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // skip adjacent edges (they share an endpoint)
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    return true;
}

// random clockwise star-shaped polygon around (0.5, 0.5)
inline crend::Contour random_clockwise_contour(crend::Rng& rng, int k) {
    crend::Contour c;
    for (int i = 0; i < k; ++i) {
        const double phi = 2.0 * 3.14159265358979323846 * i / k;
        const double r = rng.uniform(0.1, 0.42);
        c.vertices.push_back({0.5 + r * std::sin(phi), 0.5 - r * std::cos(phi)});
    }
    return c;
}

}  // namespace oracle
