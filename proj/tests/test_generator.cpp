#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "crend/generator.hpp"
#include "crend/gradcheck.hpp"
#include "crend/nn.hpp"
#include "oracles.hpp"

using namespace crend;

namespace {

const GeneratorConfig kDesk{};  // 64 -> 16, C_b 32, C_f 24, K 20

GeneratorConfig tiny_config() {
    GeneratorConfig cfg;
    cfg.image_size = 16;
    cfg.grid_size = 4;
    cfg.backbone_channels = 8;
    cfg.fused_channels = 6;
    cfg.num_vertices = 8;
    cfg.gcn_layers = 2;
    cfg.gcn_hidden = 8;
    return cfg;
}

Tensor random_image(const GeneratorConfig& cfg, Rng& rng) {
    Tensor img({static_cast<std::size_t>(cfg.in_channels),
                static_cast<std::size_t>(cfg.image_size),
                static_cast<std::size_t>(cfg.image_size)});
    for (double& v : img.values()) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("ring_adjacency neighbor sets") {
    const RingGraph g8 = ring_adjacency(8);
    CHECK(g8.neighbors[0] == std::vector<int>{6, 7, 1, 2});

    const RingGraph g60 = ring_adjacency(60);
    CHECK(g60.neighbors[59] == std::vector<int>{57, 58, 0, 1});

    // offsets +-2 coincide for K=4 and deduplicate
    const RingGraph g4 = ring_adjacency(4);
    CHECK(g4.neighbors[0] == std::vector<int>{2, 3, 1});

    const RingGraph g3 = ring_adjacency(3);
    CHECK(g3.neighbors[0].size() == 2);

    CHECK_THROWS_AS(ring_adjacency(2), std::invalid_argument);
}

TEST_CASE("ring_adjacency is symmetric with bounded degree") {
    for (int k : {3, 4, 5, 8, 20, 60}) {
        const RingGraph g = ring_adjacency(k);
        for (int i = 0; i < k; ++i) {
            CHECK(g.neighbors[i].size() >= 2);
            CHECK(g.neighbors[i].size() <= 4);
            for (int j : g.neighbors[i]) {
                const auto& back = g.neighbors[j];
                CHECK(std::find(back.begin(), back.end(), i) != back.end());
            }
        }
    }
}

TEST_CASE("gcn_layer_forward reduces to per-node linear when w_neigh is zero") {
    Rng rng(61);
    const RingGraph g = ring_adjacency(6);
    Tensor feats({6, 3});
    for (double& v : feats.values()) v = rng.uniform(-1, 1);
    Tensor w_self({4, 3});
    for (double& v : w_self.values()) v = rng.uniform(-1, 1);
    const Tensor w_neigh({4, 3});  // zeros
    Tensor b({4});
    for (double& v : b.values()) v = rng.uniform(-1, 1);

    const Tensor out = gcn_layer_forward(feats, g, w_self, w_neigh, b);
    const Tensor expect = relu(linear_forward(feats, w_self, b));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == expect[i]);
}

TEST_CASE("gcn_layer_forward maps identical node features to identical outputs") {
    Rng rng(67);
    const RingGraph g = ring_adjacency(9);
    Tensor feats({9, 5});
    for (std::size_t i = 0; i < 9; ++i) {
        for (std::size_t c = 0; c < 5; ++c) feats(i, c) = 0.1 * static_cast<double>(c) - 0.2;
    }
    Tensor w_self({4, 5}), w_neigh({4, 5}), b({4});
    for (double& v : w_self.values()) v = rng.uniform(-1, 1);
    for (double& v : w_neigh.values()) v = rng.uniform(-1, 1);
    for (double& v : b.values()) v = rng.uniform(-1, 1);

    const Tensor out = gcn_layer_forward(feats, g, w_self, w_neigh, b);
    for (std::size_t i = 1; i < 9; ++i) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(out(i, c) == out(0, c));
    }
}

TEST_CASE("gcn_layer_forward hand-computed example") {
    // K=4 ring: neighbors of every node are the other three; Din = Dout = 1
    const RingGraph g = ring_adjacency(4);
    const Tensor feats({4, 1}, {1.0, 2.0, 3.0, 4.0});
    const Tensor w_self({1, 1}, {2.0});
    const Tensor w_neigh({1, 1}, {-1.0});
    const Tensor b({1}, {0.5});
    const Tensor out = gcn_layer_forward(feats, g, w_self, w_neigh, b);
    // node 0: relu(2*1 - mean(3,4,2) + 0.5) = relu(2 - 3 + 0.5) = 0
    CHECK(out(0, 0) == 0.0);
    // node 1: relu(4 - mean(4,1,3) + 0.5) = relu(4 - 8/3 + 0.5)
    CHECK(out(1, 0) == doctest::Approx(4.0 - 8.0 / 3.0 + 0.5).epsilon(1e-14));
    // node 3: relu(8 - mean(2,3,1) + 0.5) = relu(8 - 2 + 0.5)
    CHECK(out(3, 0) == doctest::Approx(6.5).epsilon(1e-14));
}

TEST_CASE("backbone_forward shape contract and zero image") {
    Rng rng(71);
    ParamStore params;
    init_generator_params(params, kDesk, rng);

    const Tensor img = random_image(kDesk, rng);
    const Tensor fm = backbone_forward(img, params, kDesk);
    CHECK(fm.shape() == std::vector<std::size_t>{32, 16, 16});

    // zero image with zero biases stays zero through every stage
    const Tensor zero_img({3, 64, 64});
    const Tensor zero_fm = backbone_forward(zero_img, params, kDesk);
    for (double v : zero_fm.values()) CHECK(v == 0.0);

    CHECK_THROWS_AS(backbone_forward(Tensor({3, 32, 32}), params, kDesk), std::invalid_argument);
}

TEST_CASE("branches_forward shapes and sigmoid range") {
    Rng rng(73);
    const GeneratorConfig cfg = tiny_config();
    ParamStore params;
    init_generator_params(params, cfg, rng);
    const Tensor fm = backbone_forward(random_image(cfg, rng), params, cfg);

    Tensor edge, vertex;
    branches_forward(fm, params, cfg, edge, vertex);
    CHECK(edge.shape() == std::vector<std::size_t>{1, 4, 4});
    CHECK(vertex.shape() == std::vector<std::size_t>{1, 4, 4});
    for (double v : edge.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    // zero weights: sigmoid(0) everywhere
    ParamStore zeros;
    Rng rng2(1);
    init_generator_params(zeros, cfg, rng2);
    for (const char* name : {"edge.conv.w", "edge.fc.w", "vertex.conv.w", "vertex.fc.w"}) {
        zeros.get(name).value.zero();
    }
    branches_forward(fm, zeros, cfg, edge, vertex);
    for (double v : edge.values()) CHECK(v == 0.5);
    for (double v : vertex.values()) CHECK(v == 0.5);
}

TEST_CASE("fuse_features channel bookkeeping") {
    Rng rng(79);
    const GeneratorConfig cfg = tiny_config();
    ParamStore params;
    init_generator_params(params, cfg, rng);
    const Tensor fm = backbone_forward(random_image(cfg, rng), params, cfg);
    Tensor edge, vertex;
    branches_forward(fm, params, cfg, edge, vertex);
    const Tensor fused = fuse_features(fm, edge, vertex, params, cfg);
    CHECK(fused.shape() == std::vector<std::size_t>{6, 4, 4});

    // desk config: 32 + 2 = 34 input channels, 24 output
    CHECK(params.has("fuse.w"));
    ParamStore desk;
    Rng rng2(2);
    init_generator_params(desk, kDesk, rng2);
    CHECK(desk.get("fuse.w").value.shape() == std::vector<std::size_t>{24, 34, 3, 3});
}

TEST_CASE("predict_contour with a zero offset head is the initial circle") {
    Rng rng(83);
    const GeneratorConfig cfg = tiny_config();
    ParamStore params;
    init_generator_params(params, cfg, rng, /*zero_offset_head=*/true);

    const GeneratorOutput out = predict_contour(random_image(cfg, rng), params, cfg);
    const Contour want = initial_contour(cfg.num_vertices);
    REQUIRE(out.contour.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(out.contour.vertices[i].x == want.vertices[i].x);
        CHECK(out.contour.vertices[i].y == want.vertices[i].y);
    }
}

TEST_CASE("predict_contour output contract: K vertices clamped to [0,1]") {
    Rng rng(89);
    const GeneratorConfig cfg = tiny_config();
    for (int trial = 0; trial < 5; ++trial) {
        ParamStore params;
        init_generator_params(params, cfg, rng, /*zero_offset_head=*/false);
        const GeneratorOutput out = predict_contour(random_image(cfg, rng), params, cfg);
        REQUIRE(out.contour.size() == static_cast<std::size_t>(cfg.num_vertices));
        for (const Point01& p : out.contour.vertices) {
            CHECK(p.x >= 0.0);
            CHECK(p.x <= 1.0);
            CHECK(p.y >= 0.0);
            CHECK(p.y <= 1.0);
        }
        CHECK(out.backbone_fm.all_finite());
        CHECK(out.fused_fm.all_finite());
    }
}

TEST_CASE("matching_loss identities and shift invariance") {
    Rng rng(97);
    const Contour c = oracle::random_clockwise_contour(rng, 12);
    const MatchingLoss self = matching_loss(c, c);
    CHECK(self.loss == 0.0);
    CHECK(self.best_shift == 0);

    // invariance across all shifts, many random contours
    for (int trial = 0; trial < 50; ++trial) {
        const int k = rng.uniform_int(3, 24);
        const Contour p = oracle::random_clockwise_contour(rng, k);
        for (int j = 0; j < k; ++j) {
            Contour shifted;
            for (int i = 0; i < k; ++i) shifted.vertices.push_back(p.vertices[(j + i) % k]);
            CHECK(matching_loss(p, shifted).loss <= 1e-9);
        }
    }

    CHECK_THROWS_AS(
        matching_loss(oracle::random_clockwise_contour(rng, 5),
                      oracle::random_clockwise_contour(rng, 6)),
        std::invalid_argument);
}

TEST_CASE("matching_loss equals the brute-force oracle exactly") {
    Rng rng(101);
    for (int trial = 0; trial < 120; ++trial) {
        const int k = rng.uniform_int(3, 30);
        const Contour p = oracle::random_clockwise_contour(rng, k);
        const Contour t = oracle::random_clockwise_contour(rng, k);
        const MatchingLoss got = matching_loss(p, t);
        CHECK(got.loss == oracle::matching_loss(p.vertices, t.vertices));
        CHECK(got.loss >= 0.0);
    }
}

TEST_CASE("matching_loss three-point shifted example against the oracle") {
    const Contour pred({{0, 0}, {1, 0}, {0, 1}});
    Contour target({{1, 0}, {0, 1}, {0.05, 0.02}});
    const MatchingLoss got = matching_loss(pred, target);
    CHECK(got.loss == oracle::matching_loss(pred.vertices, target.vertices));
    CHECK(got.best_shift == 2);  // aligning p_0 with t_2 matches the shifted layout
    CHECK(got.loss == doctest::Approx(std::hypot(0.05, 0.02)).epsilon(1e-12));
}

TEST_CASE("matching_loss gradient matches finite differences away from ties") {
    Rng rng(103);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 20; ++trial) {
        const int k = rng.uniform_int(3, 10);
        const Contour pred = oracle::random_clockwise_contour(rng, k);
        const Contour target = oracle::random_clockwise_contour(rng, k);

        // skip near-ties between the best two shifts (gradient is not defined
        // through the argmin there)
        std::vector<double> sums;
        for (int j = 0; j < k; ++j) {
            double s = 0;
            for (int i = 0; i < k; ++i) {
                const auto& p = pred.vertices[i];
                const auto& t = target.vertices[(j + i) % k];
                s += std::hypot(p.x - t.x, p.y - t.y);
            }
            sums.push_back(s);
        }
        std::sort(sums.begin(), sums.end());
        if (sums.size() > 1 && sums[1] - sums[0] < 1e-3) continue;
        // near-coincident matched pairs make the norm's finite difference
        // ill-conditioned; the gradient check applies away from them
        {
            const MatchingLoss ml = matching_loss(pred, target);
            double closest = 1e9;
            for (int i = 0; i < k; ++i) {
                const auto& p = pred.vertices[i];
                const auto& t = target.vertices[(ml.best_shift + i) % k];
                closest = std::min(closest, std::hypot(p.x - t.x, p.y - t.y));
            }
            if (closest < 5e-2) continue;
        }

        ParamStore store;
        Tensor coords({static_cast<std::size_t>(k), 2});
        for (int i = 0; i < k; ++i) {
            coords(i, 0) = pred.vertices[i].x;
            coords(i, 1) = pred.vertices[i].y;
        }
        store.add("pred", coords);
        const auto to_contour = [k](const Tensor& t) {
            Contour c;
            for (int i = 0; i < k; ++i) c.vertices.push_back({t(i, 0), t(i, 1)});
            return c;
        };
        const auto loss = [&](const ParamStore& p) {
            return matching_loss(to_contour(p.get("pred").value), target).loss;
        };
        const MatchingLoss ml = matching_loss(pred, target);
        store.get("pred").grad = matching_loss_backward(pred, target, ml.best_shift);
        const auto report = finite_diff_gradcheck(loss, store, {"pred"});
        CHECK(report.max_rel_err < 1e-4);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("gradcheck: backbone chain through a scalar readout") {
    Rng rng(107);
    const GeneratorConfig cfg = tiny_config();
    ParamStore params;
    init_generator_params(params, cfg, rng);
    const Tensor img = random_image(cfg, rng);
    Tensor mix({static_cast<std::size_t>(cfg.backbone_channels) * 16});
    for (double& v : mix.values()) v = rng.uniform(-1, 1);

    const auto loss = [&](const ParamStore& p) {
        const Tensor fm = backbone_forward(img, p, cfg);
        double s = 0.0;
        for (std::size_t i = 0; i < fm.size(); ++i) s += mix[i] * fm[i];
        return s;
    };
    params.zero_grad();
    {
        std::vector<ConvStageCache> stages;
        const Tensor fm = backbone_forward(img, params, cfg, &stages);
        Tensor g(fm.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = mix[i];
        // reuse the full backward by walking the chain manually
        const int n = cfg.downsample_stages();
        Tensor g_out = g;
        for (int i = n + 1; i >= 0; --i) {
            const std::string prefix =
                i < n ? "backbone.s" + std::to_string(i)
                      : std::string("backbone.r") + (i == n ? "0" : "1");
            const int stride = i < n ? 2 : 1;
            const Tensor& input = (i == 0) ? img : stages[i - 1].a;
            const Tensor g_z = relu_backward(stages[i].z, g_out);
            Tensor g_in(input.shape());
            conv2d_backward(input, params.get(prefix + ".w").value, g_z, stride,
                            i == 0 ? nullptr : &g_in, params.get(prefix + ".w").grad,
                            params.get(prefix + ".b").grad);
            if (i > 0) g_out = std::move(g_in);
        }
    }
    const auto report =
        finite_diff_gradcheck(loss, params, {"backbone.s0.w", "backbone.s0.b", "backbone.r1.w"});
    CHECK(report.max_rel_err < 1e-4);
}
