#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "crend/checkpoint.hpp"
#include "crend/config.hpp"
#include "crend/eval.hpp"
#include "crend/image_io.hpp"
#include "crend/infer.hpp"
#include "crend/nn.hpp"
#include "crend/renderer.hpp"
#include "crend/train.hpp"

using namespace crend;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "crend_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// small-but-real configuration for fast pipeline tests (32 -> 8 grid)
TrainConfig small_config() {
    TrainConfig cfg;
    cfg.generator.image_size = 32;
    cfg.generator.grid_size = 8;
    cfg.generator.backbone_channels = 16;
    cfg.generator.fused_channels = 12;
    cfg.generator.num_vertices = 12;
    cfg.generator.gcn_hidden = 24;
    cfg.batch_size = 4;
    cfg.threads = 2;
    return cfg;
}

ParamStore fresh_params(const TrainConfig& cfg, std::uint64_t seed, bool zero_heads = true) {
    Rng rng(mix_seeds(seed, 0xA11CE5EEDULL));
    ParamStore params;
    init_generator_params(params, cfg.generator, rng, zero_heads);
    init_renderer_params(params, cfg.generator.backbone_channels, rng, zero_heads);
    return params;
}

}  // namespace

TEST_CASE("config defaults carry the published training constants") {
    const fs::path dir = temp_dir("config_defaults");
    {
        std::ofstream out((dir / "empty.cfg").string());
    }
    const TrainConfig cfg = parse_config_file((dir / "empty.cfg").string());
    CHECK(cfg.lr == 3e-4);
    CHECK(cfg.weight_decay == 1e-5);
    CHECK(cfg.lr_decay_factor == 0.1);
    CHECK(cfg.lr_decay_every == 10);
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.renderer.train_samples_per_vertex == 3);
    CHECK(cfg.renderer.test_grid_side == 15);
    CHECK(cfg.renderer.test_square_size == 0.09);
    CHECK(cfg.renderer.fg_threshold == 0.3);
    CHECK(cfg.renderer.loss_weight == 1.0);
    CHECK(cfg.generator.image_size == 64);
    CHECK(cfg.generator.grid_size == 16);
    CHECK(cfg.generator.num_vertices == 20);
}

TEST_CASE("config file parsing: overrides, comments, errors") {
    const fs::path dir = temp_dir("config_parse");
    {
        std::ofstream out((dir / "ok.cfg").string());
        out << "# comment\n\nlr = 0.001\nk_vertices = 24\nbranch_supervision = true\n";
    }
    const TrainConfig cfg = parse_config_file((dir / "ok.cfg").string());
    CHECK(cfg.lr == 0.001);
    CHECK(cfg.generator.num_vertices == 24);
    CHECK(cfg.branch_supervision);

    {
        std::ofstream out((dir / "unknown.cfg").string());
        out << "unknown_key = 1\n";
    }
    CHECK_THROWS_WITH_AS(parse_config_file((dir / "unknown.cfg").string()),
                         doctest::Contains("unknown_key"), std::invalid_argument);
    {
        std::ofstream out((dir / "badval.cfg").string());
        out << "lr = fast\n";
    }
    CHECK_THROWS_WITH_AS(parse_config_file((dir / "badval.cfg").string()),
                         doctest::Contains("lr"), std::invalid_argument);

    // canonical serialization round-trips
    TrainConfig base = small_config();
    base.lr = 7.5e-4;
    base.seed = 987654321;
    const TrainConfig back = parse_config_text(config_to_text(base), "roundtrip");
    CHECK(back.lr == base.lr);
    CHECK(back.seed == base.seed);
    CHECK(back.generator.image_size == base.generator.image_size);
    CHECK(config_to_text(back) == config_to_text(base));
}

TEST_CASE("learning-rate schedule decays by 0.1 every 10 epochs") {
    TrainConfig cfg;
    CHECK(scheduled_lr(cfg, 0) == 3e-4);
    CHECK(scheduled_lr(cfg, 9) == 3e-4);
    CHECK(scheduled_lr(cfg, 10) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK(scheduled_lr(cfg, 19) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK(scheduled_lr(cfg, 20) == doctest::Approx(3e-6).epsilon(1e-12));
}

TEST_CASE("initial composed loss is matching loss of the circle plus ln 2") {
    const TrainConfig cfg = small_config();
    const ParamStore params = fresh_params(cfg, 3);
    const RingGraph ring = ring_adjacency(cfg.generator.num_vertices);

    const Sample sample = gen_sample(42, ShapeCategory::kEllipse, cfg.generator.image_size);
    const Contour target = resample_contour(sample.gt_contour, cfg.generator.num_vertices);

    const SampleLoss loss = sample_loss(sample, target, params, cfg, ring, 5, nullptr);
    const double expected_match = matching_loss(initial_contour(cfg.generator.num_vertices),
                                                target)
                                      .loss;
    CHECK(loss.match == expected_match);
    CHECK(loss.render == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(loss.total(cfg.renderer.loss_weight) ==
          doctest::Approx(expected_match + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("one optimizer step on a single example decreases the matching loss") {
    const TrainConfig cfg = small_config();
    const RingGraph ring = ring_adjacency(cfg.generator.num_vertices);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ParamStore params = fresh_params(cfg, seed);
        AdamW opt(AdamWConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
        opt.attach(params);

        const Sample sample = gen_sample(mix_seeds(11, seed),
                                         static_cast<ShapeCategory>(seed % kNumCategories),
                                         cfg.generator.image_size);
        const Contour target = resample_contour(sample.gt_contour, cfg.generator.num_vertices);

        params.zero_grad();
        const SampleLoss before = sample_loss(sample, target, params, cfg, ring, seed, &params);
        opt.step(params);
        const SampleLoss after = sample_loss(sample, target, params, cfg, ring, seed, nullptr);
        CHECK(after.match < before.match);
    }
}

TEST_CASE("renderer loss feeds gradients back into the backbone") {
    TrainConfig cfg = small_config();
    const RingGraph ring = ring_adjacency(cfg.generator.num_vertices);
    // random heads so the renderer head passes nonzero gradients down
    ParamStore params = fresh_params(cfg, 21, /*zero_heads=*/false);
    const Sample sample = gen_sample(77, ShapeCategory::kStar, cfg.generator.image_size);
    const Contour target = resample_contour(sample.gt_contour, cfg.generator.num_vertices);

    ParamStore with_render = params.clone_layout();
    ParamStore without_render = params.clone_layout();
    cfg.renderer.loss_weight = 1.0;
    sample_loss(sample, target, params, cfg, ring, 5, &with_render);
    cfg.renderer.loss_weight = 0.0;
    sample_loss(sample, target, params, cfg, ring, 5, &without_render);

    double diff = 0.0;
    for (const char* name : {"backbone.s0.w", "backbone.r1.w"}) {
        const Tensor& a = with_render.get(name).grad;
        const Tensor& b = without_render.get(name).grad;
        for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    }
    CHECK(diff > 1e-8);
}

TEST_CASE("full composed loss passes the finite-difference check on tiny configs") {
    TrainConfig cfg;
    cfg.generator = {16, 3, 4, 8, 6, 8, 2, 8, 2};
    cfg.renderer.train_samples_per_vertex = 2;
    std::ostringstream sink;
    CHECK(run_full_gradcheck(cfg, 3, sink) < 1e-3);
    // the report lists every parameter group exactly once (the trailing
    // "worst:" summary line aside)
    std::string text = sink.str();
    text.resize(text.find("worst:"));
    ParamStore probe = fresh_params(cfg, 3);
    for (const auto& name : probe.names()) {
        std::size_t first = text.find(name + " ");
        CHECK(first != std::string::npos);
        CHECK(text.find(name + " ", first + 1) == std::string::npos);
    }
}

TEST_CASE("full gradcheck covers branch supervision and the target-source flag") {
    TrainConfig cfg;
    cfg.generator = {16, 3, 4, 8, 6, 8, 2, 8, 2};
    cfg.renderer.train_samples_per_vertex = 2;
    cfg.branch_supervision = true;
    cfg.render_targets_from_prediction = true;
    std::ostringstream sink;
    CHECK(run_full_gradcheck(cfg, 3, sink) < 1e-3);
}

TEST_CASE("training on a small synthetic set decreases the loss within 5 epochs") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        TrainConfig cfg = small_config();
        cfg.epochs = 5;
        cfg.seed = seed;
        const DatasetSplit train_split = generate_split(seed, 0, 48, cfg.generator.image_size);

        const TrainResult result = train(cfg, train_split, DatasetSplit{});
        REQUIRE(result.metrics.size() == 5);
        const double first = result.metrics.front().loss_match;
        const double last = result.metrics.back().loss_match;
        CHECK(last < first);
    }
}

TEST_CASE("training is deterministic per seed") {
    TrainConfig cfg = small_config();
    cfg.epochs = 2;
    cfg.seed = 11;
    const DatasetSplit train_split = generate_split(11, 0, 16, cfg.generator.image_size);

    const TrainResult a = train(cfg, train_split, DatasetSplit{});
    const TrainResult b = train(cfg, train_split, DatasetSplit{});
    for (const auto& name : a.checkpoint.params.names()) {
        const Tensor& ta = a.checkpoint.params.get(name).value;
        const Tensor& tb = b.checkpoint.params.get(name).value;
        CHECK(std::memcmp(ta.data(), tb.data(), ta.size() * sizeof(double)) == 0);
    }
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].loss_match == b.metrics[i].loss_match);
        CHECK(a.metrics[i].loss_render == b.metrics[i].loss_render);
    }
}

TEST_CASE("checkpoint round trip is bit-exact and errors are distinct") {
    const fs::path dir = temp_dir("checkpoint");
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.seed = 13;
    const DatasetSplit train_split = generate_split(13, 0, 8, cfg.generator.image_size);
    TrainResult result = train(cfg, train_split, DatasetSplit{});

    const std::string p1 = (dir / "a.crnd").string();
    const std::string p2 = (dir / "b.crnd").string();
    save_checkpoint(result.checkpoint, p1);
    Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);

    const auto read_bytes = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(read_bytes(p1) == read_bytes(p2));

    // evaluation agrees bit-exactly between original and reloaded parameters
    const DatasetSplit eval_split = generate_split(14, 2, 16, cfg.generator.image_size);
    const EvalReport r1 =
        evaluate(result.checkpoint.params, cfg, eval_split, EvalMode::kContourOnly);
    const EvalReport r2 = evaluate(loaded.params, loaded.config, eval_split,
                                   EvalMode::kContourOnly);
    for (int c = 0; c < kNumCategories; ++c) CHECK(r1.per_category[c] == r2.per_category[c]);
    CHECK(r1.mean == r2.mean);

    SUBCASE("bad magic") {
        std::fstream f(p1, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXXX", 5);
        f.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(p1), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
    SUBCASE("unsupported version") {
        std::fstream f(p1, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(5);
        const std::uint32_t v = 99;
        f.write(reinterpret_cast<const char*>(&v), 4);
        f.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(p1), doctest::Contains("version"),
                             std::runtime_error);
    }
    SUBCASE("truncated file") {
        const std::string bytes = read_bytes(p1);
        std::ofstream out(p1, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(p1), doctest::Contains("truncated"),
                             std::runtime_error);
    }
}

TEST_CASE("evaluate in oracle mode scores the ground truth near 1") {
    // feeding ground-truth contours back as predictions: upper bound of the
    // evaluation protocol; uses the resampled gt as a mock prediction
    TrainConfig cfg = small_config();
    const DatasetSplit split = generate_split(15, 2, 24, cfg.generator.image_size);
    double mean = 0.0;
    for (const Sample& s : split.samples) {
        const Contour coarse = resample_contour(s.gt_contour, cfg.generator.num_vertices);
        mean += mask_iou(rasterize_polygon(coarse, cfg.generator.image_size,
                                           cfg.generator.image_size),
                         s.gt_mask);
    }
    mean /= static_cast<double>(split.size());
    CHECK(mean >= 0.90);  // K=12 vertices at 32x32; the desk-scale bound follows
}

TEST_CASE("oracle-mode evaluation at desk scale reaches mean IoU 0.95") {
    // desk configuration: K=20 vertices, 64x64 masks, per-category averages
    const DatasetSplit split = generate_split(23, 2, 64, 64);
    std::array<double, kNumCategories> sums{};
    std::array<int, kNumCategories> counts{};
    for (const Sample& s : split.samples) {
        const Contour coarse = resample_contour(s.gt_contour, 20);
        const double iou = mask_iou(rasterize_polygon(coarse, 64, 64), s.gt_mask);
        sums[static_cast<int>(s.category)] += iou;
        counts[static_cast<int>(s.category)] += 1;
    }
    double mean = 0.0;
    for (int c = 0; c < kNumCategories; ++c) mean += sums[c] / counts[c] / kNumCategories;
    CHECK(mean >= 0.95);
}

TEST_CASE("evaluate validates inputs and balances categories") {
    TrainConfig cfg = small_config();
    const ParamStore params = fresh_params(cfg, 5);
    CHECK_THROWS_AS(evaluate(params, cfg, DatasetSplit{}, EvalMode::kContourOnly),
                    std::invalid_argument);

    DatasetSplit lopsided;
    lopsided.samples.push_back(gen_sample(1, ShapeCategory::kTriangle, cfg.generator.image_size));
    CHECK_THROWS_WITH_AS(evaluate(params, cfg, lopsided, EvalMode::kContourOnly),
                         doctest::Contains("category"), std::invalid_argument);

    const DatasetSplit split = generate_split(16, 2, 16, cfg.generator.image_size);
    const EvalReport report = evaluate(params, cfg, split, EvalMode::kContourOnly);
    double sum = 0.0;
    for (double v : report.per_category) sum += v;
    CHECK(report.mean == doctest::Approx(sum / kNumCategories).epsilon(1e-12));
}

TEST_CASE("inference writes all four artifacts consistently") {
    const fs::path dir = temp_dir("inference");
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.seed = 17;
    const DatasetSplit train_split = generate_split(17, 0, 8, cfg.generator.image_size);
    TrainResult result = train(cfg, train_split, DatasetSplit{});

    const Sample probe = gen_sample(171, ShapeCategory::kNotched, cfg.generator.image_size);
    const std::string image_path = (dir / "probe.ppm").string();
    write_image_ppm(probe.image, image_path);

    const std::string out_dir = (dir / "artifacts").string();
    run_inference(result.checkpoint, image_path, out_dir);

    for (const char* name :
         {"contour.json", "contour_mask.pgm", "rendered_mask.pgm", "points_overlay.ppm"}) {
        CHECK(fs::exists(fs::path(out_dir) / name));
    }

    // contour.json: exactly K pairs inside [0,1]
    std::ifstream js((fs::path(out_dir) / "contour.json").string());
    const nlohmann::json contour = nlohmann::json::parse(js);
    REQUIRE(contour.size() == static_cast<std::size_t>(cfg.generator.num_vertices));
    Contour emitted;
    for (const auto& pair : contour) {
        REQUIRE(pair.size() == 2);
        const double x = pair[0].get<double>();
        const double y = pair[1].get<double>();
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        CHECK(y >= 0.0);
        CHECK(y <= 1.0);
        emitted.vertices.push_back({x, y});
    }

    // the masks have the image dimensions
    const Mask contour_mask = read_mask_pgm((fs::path(out_dir) / "contour_mask.pgm").string());
    CHECK(contour_mask.height == cfg.generator.image_size);
    CHECK(contour_mask.width == cfg.generator.image_size);

    // self-consistency: recompute the rendered mask from the emitted contour
    const Tensor image = read_image_ppm(image_path);
    const GeneratorOutput out = predict_contour(image, result.checkpoint.params, cfg.generator);
    const SampledPoints pts = sample_test_grid(emitted, cfg.renderer.test_grid_side,
                                               cfg.renderer.test_square_size);
    const Tensor feats = bilinear_sample(out.backbone_fm, pts.points);
    const Tensor probs = softmax_rows(classify_points(feats, result.checkpoint.params));
    std::vector<double> fg(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) fg[i] = probs(i, 1);
    const Mask recomputed = render_mask(emitted, pts.points, fg, cfg.renderer.fg_threshold,
                                        cfg.generator.image_size, cfg.generator.image_size);
    const Mask rendered = read_mask_pgm((fs::path(out_dir) / "rendered_mask.pgm").string());
    CHECK(rendered.labels == recomputed.labels);
}

TEST_CASE("metrics CSV has the documented header and row count") {
    const fs::path dir = temp_dir("metrics_csv");
    std::vector<EpochMetrics> metrics;
    metrics.push_back({0, 2.5, 0.7, 0.5, 0.55});
    metrics.push_back({1, 1.5, 0.6, 0.6, 0.62});
    const std::string path = (dir / "metrics.csv").string();
    write_metrics_csv(metrics, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,loss_match,loss_render,val_miou_contour,val_miou_rendered");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 2);
}
