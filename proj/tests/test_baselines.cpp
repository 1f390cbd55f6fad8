#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ad2/attacks.hpp"
#include "ad2/baselines.hpp"
#include "ad2/detector.hpp"
#include "ad2/render.hpp"
#include "ad2/routes.hpp"
#include "ad2/rng.hpp"

using namespace ad2;
using baselines::lap4_score;
using imaging::Frame;

namespace {

Frame checkerboard(int w, int h) {
    Frame f(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t v = ((x + y) % 2) ? 255 : 0;
            for (int c = 0; c < 3; ++c) f.at(x, y, c) = v;
        }
    }
    return f;
}

Frame rendered_sample() {
    routes::RouteParams rp;
    const world::World w = routes::build_world(rp);
    world::EgoState ego = routes::initial_ego(w);
    const auto rig = render::default_rig();
    return render::render_frame(w, 0.0, ego, rig.cameras[1]);
}

}  // namespace

TEST_CASE("lap4: constant zero, checkerboard vs blur ordering") {
    REQUIRE(lap4_score(Frame::filled(16, 16, 77, 77, 77)) == 0.0);

    const Frame board = checkerboard(48, 32);
    const double sharp = lap4_score(board);
    REQUIRE(sharp > 0.0);

    attacks::PoltergeistParams p;
    p.motion_len = 0;
    Rng rng(3);
    const Frame blurred = attacks::poltergeist(board, p, rng);
    REQUIRE(lap4_score(blurred) < sharp);

    REQUIRE_THROWS_AS(lap4_score(Frame(2, 2)), ArgumentError);
}

TEST_CASE("lap4 barely moves under snal at epsilon 8") {
    const Frame benign = rendered_sample();
    attacks::SnalParams p;
    p.epsilon = 8;
    Rng rng(5);
    const Frame hit = attacks::snal(benign, p, rng);
    const double s0 = lap4_score(benign);
    const double s1 = lap4_score(hit);
    REQUIRE(std::abs(s1 - s0) / s0 < 0.5);
}

TEST_CASE("lap4 is invariant to a constant pre-clamp shift") {
    Rng rng(7);
    Frame f(24, 18);
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.uniform_int(40, 200));
    Frame shifted = f;
    for (auto& b : shifted.data) b = static_cast<std::uint8_t>(b + 30);  // stays in range
    REQUIRE(lap4_score(shifted) == Approx(lap4_score(f)).margin(1e-9));
}

TEST_CASE("cop_map: 3-4-5 triangle, idempotence, unit norm, zero rejection") {
    const auto v = baselines::cop_map({3.0, 4.0});
    REQUIRE(v[0] == Approx(0.6).margin(1e-15));
    REQUIRE(v[1] == Approx(0.8).margin(1e-15));

    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> z(8);
        for (auto& x : z) x = rng.normal();
        const auto m = baselines::cop_map(z);
        double n2 = 0.0;
        for (double x : m) n2 += x * x;
        REQUIRE(std::sqrt(n2) == Approx(1.0).margin(1e-12));
        const auto mm = baselines::cop_map(m);
        for (std::size_t k = 0; k < m.size(); ++k) REQUIRE(mm[k] == Approx(m[k]).margin(1e-12));
    }
    REQUIRE_THROWS_AS(baselines::cop_map({0.0, 0.0}), ArgumentError);
}

TEST_CASE("corp_map: cosine bounds, determinism, Gaussian kernel approximation") {
    const int d = 12, M = 4096;
    const double gamma = 1.0;
    const auto rff = baselines::RffParams::make(d, M, gamma, 42);
    const auto rff_again = baselines::RffParams::make(d, M, gamma, 42);
    REQUIRE(rff.omega == rff_again.omega);
    REQUIRE(rff.u == rff_again.u);

    Rng rng(11);
    const double bound = std::sqrt(2.0 / M) + 1e-12;
    double total_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(d), b(d);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        const auto fa = baselines::corp_map(a, rff);
        const auto fb = baselines::corp_map(b, rff);
        for (double x : fa) REQUIRE(std::abs(x) <= bound);

        double dot = 0.0;
        for (int i = 0; i < M; ++i) dot += fa[static_cast<std::size_t>(i)] * fb[static_cast<std::size_t>(i)];
        const auto ah = baselines::cop_map(a);
        const auto bh = baselines::cop_map(b);
        double dist2 = 0.0;
        for (int i = 0; i < d; ++i) {
            dist2 += (ah[static_cast<std::size_t>(i)] - bh[static_cast<std::size_t>(i)]) *
                     (ah[static_cast<std::size_t>(i)] - bh[static_cast<std::size_t>(i)]);
        }
        total_err += std::abs(dot - std::exp(-dist2 / (2.0 * gamma * gamma)));
    }
    REQUIRE(total_err / 100.0 < 0.05);
}

TEST_CASE("pca: perfect reconstruction at full rank, orthonormal components, rank errors") {
    Rng rng(13);
    // samples spanning a 3-D subspace of R^6
    std::vector<std::vector<double>> basis(3, std::vector<double>(6));
    for (auto& b : basis) {
        for (auto& x : b) x = rng.normal();
    }
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> s(6, 0.0);
        for (int k = 0; k < 3; ++k) {
            const double c = rng.normal();
            for (int j = 0; j < 6; ++j) s[static_cast<std::size_t>(j)] += c * basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        }
        samples.push_back(s);
    }

    const auto pca = baselines::Pca::fit(samples, 3);
    // training samples reconstruct exactly at full rank
    for (int i = 0; i < 5; ++i) {
        REQUIRE(pca.reconstruction_error(samples[static_cast<std::size_t>(i)]) ==
                Approx(0.0).margin(1e-9));
    }
    // components orthonormal: Gram = I +- 1e-9
    for (int r = 0; r < 3; ++r) {
        for (int s = 0; s < 3; ++s) {
            double dot = 0.0;
            for (int j = 0; j < 6; ++j) {
                dot += pca.components[static_cast<std::size_t>(r) * 6 + j] *
                       pca.components[static_cast<std::size_t>(s) * 6 + j];
            }
            REQUIRE(dot == Approx(r == s ? 1.0 : 0.0).margin(1e-9));
        }
    }
    // q beyond the achievable rank is rejected with the rank named
    REQUIRE_THROWS_WITH(baselines::Pca::fit(samples, 5), Catch::Contains("rank"));
}

TEST_CASE("pca scores an orthogonal offset by its squared norm") {
    Rng rng(17);
    std::vector<std::vector<double>> samples;
    // data varies only along e0 and e1
    for (int i = 0; i < 30; ++i) {
        samples.push_back({rng.normal(), rng.normal(), 0.0, 0.0});
    }
    const auto pca = baselines::Pca::fit(samples, 2);
    std::vector<double> probe = pca.mean;
    probe[2] += 1.5;  // orthogonal to the retained components and the data plane
    REQUIRE(pca.reconstruction_error(probe) == Approx(1.5 * 1.5).margin(1e-9));
}

TEST_CASE("kth_diff: annihilation, hand oracle, linearity, bounds") {
    // constant -> zeros for any k
    for (int k : {1, 2, 3}) {
        const auto d = baselines::kth_diff(Frame::filled(8, 8, 120, 10, 250), k);
        for (int c = 0; c < 3; ++c) {
            for (double v : d.horizontal.ch[static_cast<std::size_t>(c)].v) REQUIRE(v == 0.0);
            for (double v : d.vertical.ch[static_cast<std::size_t>(c)].v) REQUIRE(v == 0.0);
        }
    }

    // linear ramp: k=1 constant, k=2 zero
    Frame ramp(10, 6);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 10; ++x) {
            for (int c = 0; c < 3; ++c) ramp.at(x, y, c) = static_cast<std::uint8_t>(7 * x);
        }
    }
    const auto d1 = baselines::kth_diff(ramp, 1);
    for (double v : d1.horizontal.ch[0].v) REQUIRE(v == Approx(7.0));
    const auto d2 = baselines::kth_diff(ramp, 2);
    for (double v : d2.horizontal.ch[0].v) REQUIRE(v == Approx(0.0).margin(1e-12));

    // random 4x4 against hand-computed adjacent differences
    Rng rng(19);
    Frame f(4, 4);
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto dd = baselines::kth_diff(f, 1);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 3; ++x) {
            const double expect = static_cast<double>(f.at(x + 1, y, 0)) - f.at(x, y, 0);
            REQUIRE(dd.horizontal.ch[0].at(x, y) == expect);
        }
    }

    // linearity on real planes: diff(a+b) = diff(a) + diff(b)
    Frame a(6, 6), b(6, 6);
    for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 120));
    for (auto& v : b.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 120));
    Frame sum(6, 6);
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = static_cast<std::uint8_t>(a.data[i] + b.data[i]);
    const auto da = baselines::kth_diff(a, 1);
    const auto db = baselines::kth_diff(b, 1);
    const auto ds = baselines::kth_diff(sum, 1);
    for (std::size_t i = 0; i < ds.horizontal.ch[0].v.size(); ++i) {
        REQUIRE(ds.horizontal.ch[0].v[i] ==
                Approx(da.horizontal.ch[0].v[i] + db.horizontal.ch[0].v[i]).margin(1e-12));
    }

    REQUIRE_THROWS_AS(baselines::kth_diff(f, 4), ArgumentError);
}

TEST_CASE("diffnet has at least 5x the detector's parameters") {
    const auto ad2_model = detector::Ad2Model::make(detector::Ad2Config{}, 7);
    const auto diffnet = baselines::DiffNetModel::make(baselines::DiffNetConfig{});
    REQUIRE(diffnet.param_count() >= 5 * ad2_model.param_count());
}

TEST_CASE("export_features: header, labels, 1e-9 round trip") {
    Rng rng(23);
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> f(5);
        for (auto& v : f) v = rng.normal();
        feats.push_back(f);
        labels.push_back(i % 4);
    }
    const auto path = (std::filesystem::temp_directory_path() / "ad2_features.csv").string();
    baselines::export_features(feats, labels, path);

    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 13);  // header + rows
    REQUIRE(lines[0] == "sample_id,label,f0,f1,f2,f3,f4");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::stringstream ss(lines[i]);
        std::string cell;
        std::getline(ss, cell, ',');
        REQUIRE(std::stoul(cell) == i - 1);
        std::getline(ss, cell, ',');
        const int label = std::stoi(cell);
        REQUIRE(label >= 0);
        REQUIRE(label <= 3);
        REQUIRE(label == labels[i - 1]);
        for (int k = 0; k < 5; ++k) {
            std::getline(ss, cell, ',');
            REQUIRE(std::stod(cell) == Approx(feats[i - 1][static_cast<std::size_t>(k)]).margin(1e-9));
        }
    }
}
