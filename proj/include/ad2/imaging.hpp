#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ad2/errors.hpp"

namespace ad2::imaging {

// One RGB image from one camera at one timestep. Row-major, 8-bit, RGB order.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // width * height * 3

    Frame() = default;
    Frame(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    static Frame filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        Frame f(w, h);
        for (std::size_t i = 0; i < f.data.size(); i += 3) {
            f.data[i] = r;
            f.data[i + 1] = g;
            f.data[i + 2] = b;
        }
        return f;
    }

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool same_dims(const Frame& o) const { return width == o.width && height == o.height; }
    bool operator==(const Frame& o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

// Single-channel 64-bit plane. Intermediate results stay real-valued and are
// quantized only when a Frame is produced.
struct RealPlane {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    RealPlane() = default;
    RealPlane(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0.0) {}

    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

// Per-channel real-valued planes of one frame.
struct RealPlanes {
    int width = 0;
    int height = 0;
    std::array<RealPlane, 3> ch;

    RealPlanes() = default;
    RealPlanes(int w, int h) : width(w), height(h) {
        for (auto& p : ch) p = RealPlane(w, h);
    }
};

struct Kernel2D {
    int size = 1;  // odd
    std::vector<double> weights;  // size * size, row-major

    double at(int i, int j) const { return weights[static_cast<std::size_t>(i) * size + j]; }
};

inline RealPlanes to_real(const Frame& f) {
    RealPlanes p(f.width, f.height);
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    for (std::size_t i = 0; i < n; ++i) {
        p.ch[0].v[i] = f.data[i * 3];
        p.ch[1].v[i] = f.data[i * 3 + 1];
        p.ch[2].v[i] = f.data[i * 3 + 2];
    }
    return p;
}

// Round-half-up, clamp to [0,255].
inline std::uint8_t quantize_sample(double x) {
    const double r = std::floor(x + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

inline Frame quantize(const RealPlanes& p) {
    Frame f(p.width, p.height);
    const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
    for (std::size_t i = 0; i < n; ++i) {
        f.data[i * 3] = quantize_sample(p.ch[0].v[i]);
        f.data[i * 3 + 1] = quantize_sample(p.ch[1].v[i]);
        f.data[i * 3 + 2] = quantize_sample(p.ch[2].v[i]);
    }
    return f;
}

inline RealPlane luminance(const Frame& f) {
    RealPlane p(f.width, f.height);
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    for (std::size_t i = 0; i < n; ++i) {
        p.v[i] = (f.data[i * 3] + f.data[i * 3 + 1] + f.data[i * 3 + 2]) / 3.0;
    }
    return p;
}

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)
// ---------------------------------------------------------------------------

inline void save_ppm(const Frame& f, const std::string& path) {
    if (f.width <= 0 || f.height <= 0 ||
        f.data.size() != static_cast<std::size_t>(f.width) * f.height * 3) {
        throw ArgumentError("save_ppm: frame dimensions inconsistent with data length");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_ppm: cannot open '" + path + "' for writing");
    out << "P6\n" << f.width << " " << f.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(f.data.data()),
              static_cast<std::streamsize>(f.data.size()));
    if (!out) throw IoError("save_ppm: short write to '" + path + "'");
}

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comments. Tracks the
// byte offset so decode errors can name where parsing stopped.
inline std::string ppm_token(const std::vector<char>& buf, std::size_t& pos) {
    const std::size_t n = buf.size();
    while (pos < n) {
        const char c = buf[pos];
        if (c == '#') {
            while (pos < n && buf[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < n) {
        const char c = buf[pos];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    return tok;
}

inline long ppm_int(const std::vector<char>& buf, std::size_t& pos, const char* what) {
    const std::size_t at = pos;
    const std::string tok = ppm_token(buf, pos);
    if (tok.empty()) {
        throw DecodeError(std::string("load_ppm: missing ") + what + " at byte offset " +
                          std::to_string(at));
    }
    long value = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') {
            throw DecodeError(std::string("load_ppm: malformed ") + what + " '" + tok +
                              "' at byte offset " + std::to_string(at));
        }
        value = value * 10 + (c - '0');
        if (value > 1000000000L) {
            throw DecodeError(std::string("load_ppm: ") + what + " out of range at byte offset " +
                              std::to_string(at));
        }
    }
    return value;
}

}  // namespace detail

inline Frame load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_ppm: cannot open '" + path + "'");
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 2) {
        throw DecodeError("load_ppm: '" + path + "': empty or truncated header at byte offset 0");
    }
    if (buf[0] != 'P' || buf[1] != '6') {
        throw DecodeError("load_ppm: '" + path + "': not a binary PPM (expected magic P6) at byte offset 0");
    }
    std::size_t pos = 2;
    const long w = detail::ppm_int(buf, pos, "width");
    const long h = detail::ppm_int(buf, pos, "height");
    const std::size_t maxval_at = pos;
    const long maxval = detail::ppm_int(buf, pos, "maxval");
    if (maxval != 255) {
        throw DecodeError("load_ppm: '" + path + "': maxval " + std::to_string(maxval) +
                          " unsupported (expected 255) at byte offset " + std::to_string(maxval_at));
    }
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20) {
        throw DecodeError("load_ppm: '" + path + "': invalid dimensions " + std::to_string(w) +
                          "x" + std::to_string(h));
    }
    if (pos >= buf.size()) {
        throw DecodeError("load_ppm: '" + path + "': payload missing at byte offset " +
                          std::to_string(pos));
    }
    ++pos;  // the single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (buf.size() - pos < need) {
        throw DecodeError("load_ppm: '" + path + "': truncated payload at byte offset " +
                          std::to_string(buf.size()) + " (need " + std::to_string(pos + need) +
                          " bytes)");
    }
    Frame f(static_cast<int>(w), static_cast<int>(h));
    std::copy_n(reinterpret_cast<const std::uint8_t*>(buf.data()) + pos, need, f.data.begin());
    return f;
}

// ---------------------------------------------------------------------------
// Kernels and convolution
// ---------------------------------------------------------------------------

inline Kernel2D box_kernel(int size) {
    if (size < 1 || size % 2 == 0) throw ArgumentError("box_kernel: size must be odd and >= 1");
    Kernel2D k;
    k.size = size;
    k.weights.assign(static_cast<std::size_t>(size) * size,
                     1.0 / (static_cast<double>(size) * size));
    return k;
}

inline Kernel2D gaussian_kernel(double sigma, int size) {
    if (sigma <= 0.0) throw ArgumentError("gaussian_kernel: sigma must be > 0");
    if (size < 1 || size % 2 == 0) throw ArgumentError("gaussian_kernel: size must be odd and >= 1");
    Kernel2D k;
    k.size = size;
    k.weights.resize(static_cast<std::size_t>(size) * size);
    const int r = size / 2;
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k.weights[static_cast<std::size_t>(dy + r) * size + (dx + r)] = w;
            sum += w;
        }
    }
    for (auto& w : k.weights) w /= sum;
    return k;
}

// Replicated-border convolution of a single plane.
inline RealPlane convolve_plane(const RealPlane& p, const Kernel2D& k) {
    if (k.size > std::min(p.width, p.height)) {
        throw ArgumentError("convolve: kernel size " + std::to_string(k.size) +
                            " exceeds image " + std::to_string(p.width) + "x" +
                            std::to_string(p.height));
    }
    RealPlane out(p.width, p.height);
    const int r = k.size / 2;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, p.height - 1);
                for (int j = -r; j <= r; ++j) {
                    const int xx = std::clamp(x + j, 0, p.width - 1);
                    acc += k.at(i + r, j + r) * p.at(xx, yy);
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

inline RealPlanes convolve(const RealPlanes& p, const Kernel2D& k) {
    RealPlanes out(p.width, p.height);
    for (int c = 0; c < 3; ++c) out.ch[c] = convolve_plane(p.ch[c], k);
    return out;
}

inline RealPlanes convolve(const Frame& f, const Kernel2D& k) { return convolve(to_real(f), k); }

// 4-neighbour Laplacian stencil [[0,1,0],[1,-4,1],[0,1,0]].
inline Kernel2D laplacian_kernel() {
    Kernel2D k;
    k.size = 3;
    k.weights = {0, 1, 0, 1, -4, 1, 0, 1, 0};
    return k;
}

inline RealPlane laplacian_plane(const RealPlane& p) {
    if (p.width < 3 || p.height < 3) {
        throw ArgumentError("laplacian: image must be at least 3x3, got " +
                            std::to_string(p.width) + "x" + std::to_string(p.height));
    }
    return convolve_plane(p, laplacian_kernel());
}

inline RealPlanes laplacian(const Frame& f) {
    if (f.width < 3 || f.height < 3) {
        throw ArgumentError("laplacian: image must be at least 3x3, got " +
                            std::to_string(f.width) + "x" + std::to_string(f.height));
    }
    return convolve(f, laplacian_kernel());
}

}  // namespace ad2::imaging
