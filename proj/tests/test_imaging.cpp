#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ad2/imaging.hpp"
#include "ad2/rng.hpp"

using namespace ad2;
using imaging::Frame;

namespace {

std::filesystem::path tmp_dir() {
    auto p = std::filesystem::temp_directory_path() / "ad2_imaging_tests";
    std::filesystem::create_directories(p);
    return p;
}

Frame random_frame(Rng& rng, int w, int h) {
    Frame f(w, h);
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return f;
}

}  // namespace

TEST_CASE("ppm round trip of a 2x1 frame is exact") {
    Frame f(2, 1);
    f.data = {255, 0, 0, 0, 255, 0};
    const auto path = (tmp_dir() / "two.ppm").string();
    imaging::save_ppm(f, path);

    std::ifstream in(path, std::ios::binary);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(contents.substr(0, 11) == "P6\n2 1\n255\n");
    REQUIRE(contents.size() == 11 + 6);

    const Frame back = imaging::load_ppm(path);
    REQUIRE(back == f);
}

TEST_CASE("ppm load of an empty file is a decode error") {
    const auto path = (tmp_dir() / "empty.ppm").string();
    std::ofstream(path, std::ios::binary).close();
    REQUIRE_THROWS_AS(imaging::load_ppm(path), DecodeError);
}

TEST_CASE("ppm rejects maxval != 255 and truncated payload, naming the offset") {
    const auto path = (tmp_dir() / "bad.ppm").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "P6\n2 2\n65535\n";
        out << std::string(12, '\0');
    }
    REQUIRE_THROWS_WITH(imaging::load_ppm(path), Catch::Contains("maxval"));
    {
        std::ofstream out(path, std::ios::binary);
        out << "P6\n4 4\n255\n";
        out << std::string(10, '\0');  // needs 48
    }
    REQUIRE_THROWS_WITH(imaging::load_ppm(path), Catch::Contains("truncated"));
}

TEST_CASE("ppm all-zero 8x8 frame has 192 zero payload bytes") {
    const Frame f(8, 8);
    const auto path = (tmp_dir() / "zero.ppm").string();
    imaging::save_ppm(f, path);
    std::ifstream in(path, std::ios::binary);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string header = "P6\n8 8\n255\n";
    REQUIRE(contents.size() == header.size() + 192);
    for (std::size_t i = header.size(); i < contents.size(); ++i) REQUIRE(contents[i] == '\0');
    REQUIRE(imaging::load_ppm(path) == f);
}

TEST_CASE("ppm round trip is byte-identical for 1000 random frames") {
    Rng rng(11);
    const auto path = (tmp_dir() / "rand.ppm").string();
    for (int i = 0; i < 1000; ++i) {
        const int w = static_cast<int>(rng.uniform_int(1, 12));
        const int h = static_cast<int>(rng.uniform_int(1, 12));
        const Frame f = random_frame(rng, w, h);
        imaging::save_ppm(f, path);
        REQUIRE(imaging::load_ppm(path) == f);
    }
}

TEST_CASE("identity kernel convolution is exact on 8-bit data") {
    Rng rng(5);
    const Frame f = random_frame(rng, 9, 7);
    imaging::Kernel2D id;
    id.size = 1;
    id.weights = {1.0};
    const Frame back = imaging::quantize(imaging::convolve(f, id));
    REQUIRE(back == f);
}

TEST_CASE("box kernel keeps a constant image constant") {
    const Frame f = Frame::filled(8, 8, 13, 200, 77);
    const auto planes = imaging::convolve(f, imaging::box_kernel(3));
    for (int c = 0; c < 3; ++c) {
        for (double v : planes.ch[c].v) {
            REQUIRE(v == Approx(static_cast<double>(f.data[static_cast<std::size_t>(c)])).margin(1e-9));
        }
    }
}

TEST_CASE("3x3 box matches a direct summation oracle at the centre") {
    Frame f(3, 3);
    const std::uint8_t vals[9] = {12, 200, 34, 99, 250, 1, 77, 130, 8};
    for (int i = 0; i < 9; ++i) {
        f.data[static_cast<std::size_t>(i) * 3] = vals[i];
        f.data[static_cast<std::size_t>(i) * 3 + 1] = vals[i];
        f.data[static_cast<std::size_t>(i) * 3 + 2] = vals[i];
    }
    // independent scalar loop
    double expect = 0.0;
    for (int i = 0; i < 9; ++i) expect += vals[i];
    expect /= 9.0;

    const auto planes = imaging::convolve(f, imaging::box_kernel(3));
    REQUIRE(planes.ch[0].at(1, 1) == Approx(expect).epsilon(1e-12));
}

TEST_CASE("convolve rejects kernels larger than the image") {
    const Frame f(4, 4);
    REQUIRE_THROWS_AS(imaging::convolve(f, imaging::box_kernel(5)), ArgumentError);
}

TEST_CASE("laplacian of a constant frame is exactly zero") {
    const Frame f = Frame::filled(10, 6, 90, 90, 90);
    const auto lap = imaging::laplacian(f);
    for (int c = 0; c < 3; ++c) {
        for (double v : lap.ch[c].v) REQUIRE(v == 0.0);
    }
}

TEST_CASE("laplacian of a linear ramp vanishes in the interior") {
    Frame f(12, 5);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            for (int c = 0; c < 3; ++c) f.at(x, y, c) = static_cast<std::uint8_t>(x * 10);
        }
    }
    const auto lap = imaging::laplacian(f);
    for (int y = 1; y < f.height - 1; ++y) {
        for (int x = 1; x < f.width - 1; ++x) {
            REQUIRE(lap.ch[0].at(x, y) == Approx(0.0).margin(1e-12));
        }
    }
}

TEST_CASE("laplacian of a single bright pixel matches the stencil") {
    Frame f(7, 7);
    const double v = 200.0;
    f.at(3, 3, 0) = 200;
    f.at(3, 3, 1) = 200;
    f.at(3, 3, 2) = 200;
    const auto lap = imaging::laplacian(f);
    REQUIRE(lap.ch[0].at(3, 3) == Approx(-4.0 * v));
    REQUIRE(lap.ch[0].at(2, 3) == Approx(v));
    REQUIRE(lap.ch[0].at(4, 3) == Approx(v));
    REQUIRE(lap.ch[0].at(3, 2) == Approx(v));
    REQUIRE(lap.ch[0].at(3, 4) == Approx(v));
    REQUIRE(lap.ch[0].at(1, 1) == Approx(0.0).margin(1e-12));
}

TEST_CASE("laplacian rejects frames smaller than 3x3") {
    REQUIRE_THROWS_AS(imaging::laplacian(Frame(2, 5)), ArgumentError);
}

TEST_CASE("gaussian kernel normalizes, peaks at the centre and is 90-degree symmetric") {
    for (double sigma : {0.4, 1.0, 2.5, 100.0}) {
        for (int size : {1, 3, 7, 13}) {
            const auto k = imaging::gaussian_kernel(sigma, size);
            double sum = 0.0;
            for (double w : k.weights) sum += w;
            REQUIRE(sum == Approx(1.0).margin(1e-9));
            const double centre = k.at(size / 2, size / 2);
            for (double w : k.weights) REQUIRE(centre >= w - 1e-15);
            for (int i = 0; i < size; ++i) {
                for (int j = 0; j < size; ++j) {
                    REQUIRE(k.at(i, j) == Approx(k.at(j, i)).margin(1e-12));
                    REQUIRE(k.at(i, j) == Approx(k.at(size - 1 - j, i)).margin(1e-12));
                }
            }
        }
    }
}

TEST_CASE("wide gaussian on a 3x3 support approaches the box kernel") {
    const auto k = imaging::gaussian_kernel(100.0, 3);
    for (double w : k.weights) REQUIRE(w == Approx(1.0 / 9.0).margin(1e-3));
}

TEST_CASE("gaussian kernel rejects bad arguments") {
    REQUIRE_THROWS_AS(imaging::gaussian_kernel(0.0, 3), ArgumentError);
    REQUIRE_THROWS_AS(imaging::gaussian_kernel(-1.0, 3), ArgumentError);
    REQUIRE_THROWS_AS(imaging::gaussian_kernel(1.0, 4), ArgumentError);
}
