#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>

#include "ad2/detector.hpp"
#include "ad2/rng.hpp"

using namespace ad2;
using dataset::Dataset;
using dataset::Label;
using dataset::LabeledPair;
using detector::Ad2Config;
using detector::Ad2Model;
using imaging::Frame;
using nn::Graph;

namespace {

Frame random_frame(Rng& rng, int w, int h) {
    Frame f(w, h);
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return f;
}

LabeledPair random_pair(Rng& rng, int w, int h, Label label) {
    LabeledPair p;
    for (int c = 0; c < 3; ++c) {
        p.prev[static_cast<std::size_t>(c)] = random_frame(rng, w, h);
        p.curr[static_cast<std::size_t>(c)] = random_frame(rng, w, h);
    }
    p.label = label;
    return p;
}

Ad2Config small_cfg() {
    Ad2Config cfg;
    cfg.input_w = 48;
    cfg.input_h = 32;
    return cfg;
}

}  // namespace

TEST_CASE("extract_features: 64 dims, bitwise deterministic, slot-independent") {
    Ad2Model model = Ad2Model::make(small_cfg(), 7);
    model.randomize_all(3);
    Rng rng(1);
    const Frame f = random_frame(rng, 48, 32);

    const auto v1 = model.extract_features(f);
    const auto v2 = model.extract_features(f);
    REQUIRE(v1.size() == 64);
    REQUIRE(v1 == v2);

    // the backbone is shared: the same image yields the same features no
    // matter which camera/timestep slot presents it
    LabeledPair a = random_pair(rng, 48, 32, Label::benign);
    a.curr[0] = f;  // left at t
    LabeledPair b = random_pair(rng, 48, 32, Label::benign);
    b.prev[2] = f;  // right at t-1
    REQUIRE(model.extract_features(a.curr[0]) == model.extract_features(b.prev[2]));
}

TEST_CASE("spatial encoder: output width and positional sensitivity") {
    Ad2Model model = Ad2Model::make(small_cfg(), 7);
    model.randomize_all(11);  // stands in for trained weights; pe become nonzero

    Rng rng(5);
    nn::Tensor va({1, 64}), vb({1, 64}), vc({1, 64});
    for (auto* t : {&va, &vb, &vc}) {
        for (auto& x : t->v) x = rng.normal();
    }

    Graph g;
    const auto s_abc = model.spatial_encode(g, g.input(va), g.input(vb), g.input(vc));
    REQUIRE(g.shape(s_abc) == nn::Shape{1, 64});
    const auto s_cba = model.spatial_encode(g, g.input(vc), g.input(vb), g.input(va));
    double max_diff = 0.0;
    for (int i = 0; i < 64; ++i) {
        max_diff = std::max(max_diff, std::abs(g.value(s_abc)[static_cast<std::size_t>(i)] -
                                               g.value(s_cba)[static_cast<std::size_t>(i)]));
    }
    REQUIRE(max_diff > 1e-6);  // positional encodings break permutation symmetry
}

TEST_CASE("temporal encoder: order sensitivity and zero propagation") {
    Ad2Model model = Ad2Model::make(small_cfg(), 7);
    model.randomize_all(13);

    Rng rng(6);
    nn::Tensor a({2, 64}), b({2, 64});
    for (auto* t : {&a, &b}) {
        for (auto& x : t->v) x = rng.normal();
    }
    Graph g;
    const auto h_ab = model.temporal_encode(g, g.input(a), g.input(b));
    const auto h_ba = model.temporal_encode(g, g.input(b), g.input(a));
    REQUIRE(g.shape(h_ab) == nn::Shape{2, 64});
    double max_diff = 0.0;
    for (std::size_t i = 0; i < g.value(h_ab).size(); ++i) {
        max_diff = std::max(max_diff, std::abs(g.value(h_ab)[i] - g.value(h_ba)[i]));
    }
    REQUIRE(max_diff > 1e-6);

    // all-zero inputs and all-zero parameters propagate to exactly zero
    Ad2Model zero = Ad2Model::make(small_cfg(), 7);
    for (auto& [name, p] : zero.params.all()) std::fill(p.value.begin(), p.value.end(), 0.0);
    nn::Tensor z({1, 64});
    Graph gz;
    const auto h0 = zero.temporal_encode(gz, gz.input(z), gz.input(z));
    for (double v : gz.value(h0)) REQUIRE(v == 0.0);
}

TEST_CASE("classify: shapes, posterior normalization, determinism") {
    Ad2Model model = Ad2Model::make(small_cfg(), 7);
    model.randomize_all(17);
    Rng rng(8);
    const LabeledPair p = random_pair(rng, 48, 32, Label::snal);

    const auto [logits1, label1] = model.classify(p);
    const auto [logits2, label2] = model.classify(p);
    REQUIRE(logits1 == logits2);
    REQUIRE(label1 == label2);

    const auto post = model.posterior(p);
    double sum = 0.0;
    for (double v : post) {
        REQUIRE(v >= 0.0);
        sum += v;
    }
    REQUIRE(sum == Approx(1.0).margin(1e-9));
}

TEST_CASE("classify rejects frames of the wrong size") {
    Ad2Model model = Ad2Model::make(small_cfg(), 7);
    Rng rng(9);
    const LabeledPair p = random_pair(rng, 96, 64, Label::benign);
    REQUIRE_THROWS_AS(model.classify(p), ShapeError);
}

TEST_CASE("parameter counts: closed-form head and the desk envelope") {
    Ad2Model model = Ad2Model::make(Ad2Config{}, 7);
    long head = 0;
    for (const auto& [name, p] : model.params.all()) {
        if (name.rfind("head.", 0) == 0) head += nn::numel(p.shape);
    }
    REQUIRE(head == 64 * 64 + 64 + 64 * 4 + 4);  // 4420
    REQUIRE(model.param_count() < 1500000);
}

TEST_CASE("full detector graph passes the finite-difference check") {
    Ad2Config cfg;
    cfg.input_w = 16;
    cfg.input_h = 16;
    Ad2Model model = Ad2Model::make(cfg, 7);
    // nudge off ReLU kinks with a smooth random init
    model.randomize_all(23, 0.2);

    Rng rng(10);
    const LabeledPair p = random_pair(rng, 16, 16, Label::poltergeist);
    const nn::Tensor x = model.normalize_pair(p);
    const std::vector<int> labels = {1};

    auto loss_fn = [&]() {
        Graph g;
        const auto logits = model.forward(g, g.input(x), 1);
        const auto loss = g.cross_entropy(logits, labels);
        model.params.zero_grads();
        g.backward(loss);
        // surface parameter grads through the store for grad_check
        double l = g.scalar(loss);
        return l;
    };
    // grad_check zeroes and repopulates store grads via loss_fn's backward
    Rng pick(11);
    const double err = nn::grad_check(model.params, loss_fn, pick, 64);
    CAPTURE(err);
    REQUIRE(err < 1e-4);
}

TEST_CASE("training: smoke, class checks, determinism, save/load") {
    Rng rng(12);
    Dataset tiny;
    for (int i = 0; i < 8; ++i) {
        tiny.push_back(random_pair(rng, 32, 32, i % 2 == 0 ? Label::benign : Label::esia));
    }

    detector::TrainConfig tc;
    tc.epochs = 1;
    tc.batch = 4;
    tc.seed = 7;
    auto [model, hist] = detector::train(tiny, tc);
    REQUIRE(hist.epoch_loss.size() == 1);
    REQUIRE(std::isfinite(hist.epoch_loss[0]));

    // determinism: identical config and seed, identical parameter checksum
    auto [model2, hist2] = detector::train(tiny, tc);
    REQUIRE(model.params.checksum() == model2.params.checksum());

    // save / load round trip preserves behaviour
    const auto path = (std::filesystem::temp_directory_path() / "ad2_model.bin").string();
    model.save(path);
    detector::Ad2Model back = detector::Ad2Model::load(path);
    REQUIRE(back.params.checksum() == model.params.checksum());
    const LabeledPair probe = random_pair(rng, 32, 32, Label::benign);
    REQUIRE(back.classify(probe).first == model.classify(probe).first);

    // error paths
    REQUIRE_THROWS_AS(detector::train(Dataset{}, tc), ArgumentError);
    Dataset single;
    for (int i = 0; i < 4; ++i) single.push_back(random_pair(rng, 32, 32, Label::benign));
    REQUIRE_THROWS_AS(detector::train(single, tc), ArgumentError);
}
