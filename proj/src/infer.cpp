#include "crend/infer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "crend/generator.hpp"
#include "crend/image_io.hpp"
#include "crend/nn.hpp"
#include "crend/renderer.hpp"

namespace crend {

void run_inference(const Checkpoint& ckpt, const std::string& image_path,
                   const std::string& out_dir) {
    const TrainConfig& cfg = ckpt.config;
    const Tensor image = read_image_ppm(image_path);
    if (static_cast<int>(image.dim(1)) != cfg.generator.image_size ||
        static_cast<int>(image.dim(2)) != cfg.generator.image_size) {
        throw std::invalid_argument("run_inference: image " + image_path + " is " +
                                    std::to_string(image.dim(2)) + "x" +
                                    std::to_string(image.dim(1)) +
                                    " but the checkpoint expects " +
                                    std::to_string(cfg.generator.image_size) + "x" +
                                    std::to_string(cfg.generator.image_size));
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    const int size = cfg.generator.image_size;

    const GeneratorOutput out = predict_contour(image, ckpt.params, cfg.generator);

    nlohmann::json contour = nlohmann::json::array();
    for (const Point01& p : out.contour.vertices) {
        contour.push_back(nlohmann::json::array({p.x, p.y}));
    }
    {
        std::ofstream js((dir / "contour.json").string());
        if (!js) throw std::runtime_error("run_inference: cannot write contour.json");
        js << contour.dump(2) << "\n";
    }

    write_mask_pgm(rasterize_polygon(out.contour, size, size),
                   (dir / "contour_mask.pgm").string());

    const SampledPoints pts = sample_test_grid(out.contour, cfg.renderer.test_grid_side,
                                               cfg.renderer.test_square_size);
    const Tensor feats = bilinear_sample(out.backbone_fm, pts.points);
    const Tensor probs = softmax_rows(classify_points(feats, ckpt.params));
    std::vector<double> fg(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) fg[i] = probs(i, 1);

    write_mask_pgm(render_mask(out.contour, pts.points, fg, cfg.renderer.fg_threshold, size, size),
                   (dir / "rendered_mask.pgm").string());

    Tensor overlay = image;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int col = static_cast<int>(std::lround(pts.points[i].x * (size - 1)));
        const int row = static_cast<int>(std::lround(pts.points[i].y * (size - 1)));
        const bool is_fg = fg[i] > cfg.renderer.fg_threshold;
        overlay(0, row, col) = is_fg ? 1.0 : 0.0;
        overlay(1, row, col) = 0.0;
        overlay(2, row, col) = is_fg ? 0.0 : 1.0;
    }
    write_image_ppm(overlay, (dir / "points_overlay.ppm").string());
}

}  // namespace crend
