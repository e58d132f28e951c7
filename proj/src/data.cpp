#include "crend/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "crend/image_io.hpp"
#include "crend/rng.hpp"

namespace crend {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kCategoryNames[kNumCategories] = {
    "triangle", "rectangle", "ellipse", "star", "blob", "notched", "l_shape", "ring_cut",
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

Vec2 rotate(Vec2 p, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// point on the clockwise circle at angle phi (phi = 0 is the topmost point)
Vec2 radial(double radius, double phi) {
    return {radius * std::sin(phi), -radius * std::cos(phi)};
}

void ensure_clockwise(std::vector<Vec2>& pts) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[(i + 1) % pts.size()];
        sum += a.x * b.y - b.x * a.y;
    }
    if (sum < 0.0) std::reverse(pts.begin(), pts.end());
}

// area centroid of a simple polygon
Vec2 polygon_centroid(const std::vector<Vec2>& pts) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& p = pts[i];
        const Vec2& q = pts[(i + 1) % pts.size()];
        const double cross = p.x * q.y - q.x * p.y;
        a += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    a *= 0.5;
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

// Splits every edge into ceil(len / spacing) segments, keeping the original
// vertices (corners stay exact).
std::vector<Vec2> densify(const std::vector<Vec2>& pts, double spacing) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[(i + 1) % pts.size()];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const int segments = std::max(1, static_cast<int>(std::ceil(len / spacing)));
        for (int s = 0; s < segments; ++s) {
            const double t = static_cast<double>(s) / segments;
            out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    return out;
}

std::vector<Vec2> make_triangle(Rng& rng) {
    std::vector<Vec2> pts;
    const double base = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < 3; ++i) {
        const double phi =
            base + i * 2.0 * std::numbers::pi / 3.0 + rng.uniform(-0.3, 0.3);
        pts.push_back(radial(rng.uniform(0.22, 0.34), phi));
    }
    return densify(pts, 0.015);
}

std::vector<Vec2> make_rectangle(Rng& rng) {
    const double a = rng.uniform(0.14, 0.30);
    const double b = rng.uniform(0.14, 0.30);
    const double angle = rng.uniform(-0.5, 0.5);
    std::vector<Vec2> pts = {{-a, -b}, {a, -b}, {a, b}, {-a, b}};
    for (auto& p : pts) p = rotate(p, angle);
    return densify(pts, 0.015);
}

std::vector<Vec2> make_ellipse(Rng& rng) {
    const double a = rng.uniform(0.16, 0.32);
    const double b = rng.uniform(0.16, 0.32);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    std::vector<Vec2> pts;
    const int n = 144;
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * i / n;
        pts.push_back(rotate({a * std::sin(t), -b * std::cos(t)}, angle));
    }
    return pts;
}

std::vector<Vec2> make_star(Rng& rng) {
    const int spikes = rng.uniform_int(5, 7);
    const double r_out = rng.uniform(0.25, 0.34);
    const double r_in = r_out * rng.uniform(0.50, 0.68);
    const double base = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<Vec2> pts;
    for (int j = 0; j < 2 * spikes; ++j) {
        const double phi = base + j * std::numbers::pi / spikes;
        pts.push_back(radial(j % 2 == 0 ? r_out : r_in, phi));
    }
    return densify(pts, 0.015);
}

std::vector<Vec2> make_blob(Rng& rng) {
    const double r0 = rng.uniform(0.20, 0.30);
    double amp[3], phase[3];
    for (int k = 0; k < 3; ++k) {
        amp[k] = rng.uniform(0.0, 0.12);
        phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    std::vector<Vec2> pts;
    const int n = 144;
    for (int i = 0; i < n; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / n;
        double r = r0;
        for (int k = 0; k < 3; ++k) r += r0 * amp[k] * std::cos((k + 2) * phi + phase[k]);
        pts.push_back(radial(r, phi));
    }
    return pts;
}

std::vector<Vec2> make_notched(Rng& rng) {
    const double a = rng.uniform(0.18, 0.30);
    const double b = rng.uniform(0.18, 0.30);
    const double wn = a * rng.uniform(0.25, 0.42);
    const double depth = b * rng.uniform(0.7, 1.3);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<Vec2> pts = {
        {-a, -b}, {-wn, -b}, {-wn, -b + depth}, {wn, -b + depth},
        {wn, -b}, {a, -b},   {a, b},            {-a, b},
    };
    for (auto& p : pts) p = rotate(p, angle);
    ensure_clockwise(pts);
    return densify(pts, 0.015);
}

std::vector<Vec2> make_l_shape(Rng& rng) {
    const double a = rng.uniform(0.18, 0.30);
    const double b = rng.uniform(0.18, 0.30);
    const double xc = -a + 2.0 * a * rng.uniform(0.35, 0.65);
    const double yc = -b + 2.0 * b * rng.uniform(0.35, 0.65);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<Vec2> pts = {{-a, -b}, {xc, -b}, {xc, yc}, {a, yc}, {a, b}, {-a, b}};
    for (auto& p : pts) p = rotate(p, angle);
    ensure_clockwise(pts);
    return densify(pts, 0.015);
}

std::vector<Vec2> make_ring_cut(Rng& rng) {
    const double r_out = rng.uniform(0.26, 0.34);
    const double r_in = r_out * rng.uniform(0.45, 0.62);
    const double gap = rng.uniform(1.2, 2.0);
    const double start = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double span = 2.0 * std::numbers::pi - gap;
    std::vector<Vec2> pts;
    const int n_arc = 56;
    for (int i = 0; i <= n_arc; ++i) {
        pts.push_back(radial(r_out, start + span * i / n_arc));
    }
    for (int i = n_arc; i >= 0; --i) {
        pts.push_back(radial(r_in, start + span * i / n_arc));
    }
    return pts;
}

std::vector<Vec2> make_shape(ShapeCategory category, Rng& rng) {
    switch (category) {
        case ShapeCategory::kTriangle: return make_triangle(rng);
        case ShapeCategory::kRectangle: return make_rectangle(rng);
        case ShapeCategory::kEllipse: return make_ellipse(rng);
        case ShapeCategory::kStar: return make_star(rng);
        case ShapeCategory::kBlob: return make_blob(rng);
        case ShapeCategory::kNotched: return make_notched(rng);
        case ShapeCategory::kLShape: return make_l_shape(rng);
        case ShapeCategory::kRingCut: return make_ring_cut(rng);
    }
    throw std::invalid_argument("make_shape: bad category");
}

double round9(double v) { return std::round(v * 1e9) / 1e9; }

}  // namespace

const char* category_name(ShapeCategory c) { return kCategoryNames[static_cast<int>(c)]; }

ShapeCategory category_from_name(const std::string& name) {
    for (int i = 0; i < kNumCategories; ++i) {
        if (name == kCategoryNames[i]) return static_cast<ShapeCategory>(i);
    }
    throw std::invalid_argument("unknown category '" + name + "'");
}

Sample gen_sample(std::uint64_t seed, ShapeCategory category, int image_size) {
    if (image_size < 16) {
        throw std::invalid_argument("gen_sample: image_size must be >= 16, got " +
                                    std::to_string(image_size));
    }
    Rng rng(mix_seed(seed));
    std::vector<Vec2> pts = make_shape(category, rng);

    // recenter on the area centroid, keep the shape inside the frame
    const Vec2 centroid = polygon_centroid(pts);
    double extent = 0.0;
    for (auto& p : pts) {
        p.x -= centroid.x;
        p.y -= centroid.y;
        extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
    }
    if (extent > 0.42) {
        const double scale = 0.42 / extent;
        for (auto& p : pts) {
            p.x *= scale;
            p.y *= scale;
        }
    }
    const double cx = 0.5 + rng.uniform(-0.05, 0.05);
    const double cy = 0.5 + rng.uniform(-0.05, 0.05);

    Sample sample;
    sample.category = category;
    sample.gt_contour.vertices.reserve(pts.size());
    for (const auto& p : pts) {
        sample.gt_contour.vertices.push_back(clamp01({p.x + cx, p.y + cy}));
    }
    sample.gt_mask = rasterize_polygon(sample.gt_contour, image_size, image_size);

    // random hues, but the object is consistently brighter than the
    // background (a stable per-point statistic; mirrors the single-object
    // crops this stands in for, where the object dominates the center)
    double bg[3], fg[3];
    double bg_mean = 0.0;
    do {
        bg_mean = 0.0;
        for (double& c : bg) {
            c = rng.uniform();
            bg_mean += c / 3.0;
        }
    } while (bg_mean > 0.55);
    for (;;) {
        double fg_mean = 0.0;
        double dist = 0.0;
        for (double& c : fg) {
            c = rng.uniform();
            fg_mean += c / 3.0;
        }
        for (int c = 0; c < 3; ++c) dist += (fg[c] - bg[c]) * (fg[c] - bg[c]);
        if (fg_mean - bg_mean >= 0.25 && std::sqrt(dist) >= 0.4) break;
    }

    const std::size_t s = static_cast<std::size_t>(image_size);
    sample.image = Tensor({3, s, s});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < image_size; ++y) {
            for (int x = 0; x < image_size; ++x) {
                const double base = sample.gt_mask.at(y, x) ? fg[c] : bg[c];
                sample.image(c, y, x) = std::clamp(base + 0.02 * rng.normal(), 0.0, 1.0);
            }
        }
    }
    return sample;
}

DatasetSplit generate_split(std::uint64_t base_seed, int split_id, int count, int image_size) {
    DatasetSplit split;
    split.samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Sample s = gen_sample(mix_seeds(base_seed, static_cast<std::uint64_t>(split_id), i),
                              static_cast<ShapeCategory>(i % kNumCategories), image_size);
        s.id = i;
        split.samples.push_back(std::move(s));
    }
    return split;
}

void write_dataset(const DatasetSplit& split, const std::string& index_path) {
    const fs::path index(index_path);
    const fs::path dir = index.parent_path().empty() ? fs::path(".") : index.parent_path();
    const std::string stem = index.stem().string();
    fs::create_directories(dir / "images");

    std::ofstream out(index_path);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + index_path);
    for (const Sample& s : split.samples) {
        char file[64];
        std::snprintf(file, sizeof(file), "images/%s_%06d.ppm", stem.c_str(), s.id);
        write_image_ppm(s.image, (dir / file).string());

        json contour = json::array();
        for (const Point01& p : s.gt_contour.vertices) {
            contour.push_back(json::array({round9(p.x), round9(p.y)}));
        }
        const json record = {{"id", s.id},
                             {"category", category_name(s.category)},
                             {"image_file", std::string(file)},
                             {"contour", contour}};
        out << record.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write_dataset: write failed for " + index_path);
}

DatasetSplit read_dataset(const std::string& index_path) {
    std::ifstream in(index_path);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + index_path);
    const fs::path dir = fs::path(index_path).parent_path();

    DatasetSplit split;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
            Sample s;
            s.id = record.at("id").get<int>();
            s.category = category_from_name(record.at("category").get<std::string>());
            for (const auto& pt : record.at("contour")) {
                s.gt_contour.vertices.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
            }
            const fs::path image_path = dir / record.at("image_file").get<std::string>();
            if (!fs::exists(image_path)) {
                throw std::runtime_error("missing image file " + image_path.string());
            }
            s.image = read_image_ppm(image_path.string());
            const int size = static_cast<int>(s.image.dim(1));
            s.gt_mask = rasterize_polygon(s.gt_contour, size, size);
            split.samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw std::runtime_error("read_dataset: " + index_path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return split;
}

}  // namespace crend
