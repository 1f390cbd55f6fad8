#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ad2/errors.hpp"
#include "ad2/imaging.hpp"
#include "ad2/json_util.hpp"
#include "ad2/rng.hpp"

namespace ad2::attacks {

using imaging::Frame;
using imaging::RealPlane;
using imaging::RealPlanes;

enum class AttackKind { poltergeist, snal, esia };

inline const char* kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::poltergeist: return "poltergeist";
        case AttackKind::snal: return "snal";
        case AttackKind::esia: return "esia";
    }
    return "?";
}

inline AttackKind kind_from_name(const std::string& s) {
    if (s == "poltergeist") return AttackKind::poltergeist;
    if (s == "snal") return AttackKind::snal;
    if (s == "esia") return AttackKind::esia;
    throw ConfigError("attack: unknown kind \"" + s + "\" (expected poltergeist|snal|esia)");
}

// ---------------------------------------------------------------------------
// Poltergeist: stabilizer-induced blur. Gaussian blur composed with a linear
// motion smear whose angle is drawn once per attack event.
// ---------------------------------------------------------------------------

enum class MotionAngleMode { random_per_event, fixed };

struct PoltergeistParams {
    double sigma = 3.0;
    int ksize = 13;
    int motion_len = 9;  // pixels; 0 disables the motion component
    MotionAngleMode motion_angle_mode = MotionAngleMode::random_per_event;
    double fixed_angle = 0.0;  // radians, used when mode == fixed

    void validate() const {
        if (sigma <= 0.0) throw ArgumentError("poltergeist: sigma must be > 0");
        if (ksize < 1 || ksize % 2 == 0) throw ArgumentError("poltergeist: ksize must be odd");
        if (motion_len < 0) throw ArgumentError("poltergeist: motion_len must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// SNAL: ghost-object injection, clamped to an l-inf epsilon ball.
// ---------------------------------------------------------------------------

struct SnalParams {
    int epsilon = 8;  // 0..255 scale
    int n_patches_min = 3;
    int n_patches_max = 8;
    int patch_min = 8;   // pixels, patch width
    int patch_max = 24;
    int template_count = 16;
    std::uint64_t template_seed = 0xADD5ULL;  // bank version; bump to regenerate

    void validate() const {
        if (epsilon < 1) throw ArgumentError("snal: epsilon must be >= 1");
        if (n_patches_min < 1 || n_patches_min > n_patches_max)
            throw ArgumentError("snal: need 1 <= n_patches_min <= n_patches_max");
        if (patch_min < 1 || patch_min > patch_max)
            throw ArgumentError("snal: need 1 <= patch_min <= patch_max");
        if (template_count < 1) throw ArgumentError("snal: template_count must be >= 1");
    }
};

// Procedurally generated object silhouette: vehicle-like rounded rectangle
// with a two-tone body, window band and wheels. Stands in for the attack's
// pre-collected object crops.
struct SnalTemplate {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;   // width*height*3
    std::vector<std::uint8_t> mask;  // width*height, 1 = part of the object
};

namespace detail {

inline SnalTemplate make_template(Rng& rng) {
    SnalTemplate t;
    t.width = 32;
    t.height = 20;
    t.rgb.assign(static_cast<std::size_t>(t.width) * t.height * 3, 0);
    t.mask.assign(static_cast<std::size_t>(t.width) * t.height, 0);

    const std::uint8_t body_r = static_cast<std::uint8_t>(rng.uniform_int(30, 225));
    const std::uint8_t body_g = static_cast<std::uint8_t>(rng.uniform_int(30, 225));
    const std::uint8_t body_b = static_cast<std::uint8_t>(rng.uniform_int(30, 225));
    const bool window_light = rng.bernoulli(0.5);
    const double corner = rng.uniform(2.0, 5.0);

    auto inside_body = [&](int x, int y) {
        // rounded rectangle over rows [3, height-3)
        const double x0 = 1, x1 = t.width - 2, y0 = 3, y1 = t.height - 4;
        if (x < x0 || x > x1 || y < y0 || y > y1) return false;
        const double cx = std::clamp(static_cast<double>(x), x0 + corner, x1 - corner);
        const double cy = std::clamp(static_cast<double>(y), y0 + corner, y1 - corner);
        const double dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= corner * corner;
    };

    for (int y = 0; y < t.height; ++y) {
        for (int x = 0; x < t.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * t.width + x;
            if (inside_body(x, y)) {
                t.mask[i] = 1;
                std::uint8_t r = body_r, g = body_g, b = body_b;
                if (y >= 4 && y < 9 && x >= 6 && x < t.width - 6) {
                    // window band, two-tone against the body
                    const int shift = window_light ? 70 : -70;
                    r = static_cast<std::uint8_t>(std::clamp(body_r + shift, 0, 255));
                    g = static_cast<std::uint8_t>(std::clamp(body_g + shift, 0, 255));
                    b = static_cast<std::uint8_t>(std::clamp(body_b + shift, 0, 255));
                }
                t.rgb[i * 3] = r;
                t.rgb[i * 3 + 1] = g;
                t.rgb[i * 3 + 2] = b;
            }
        }
    }
    // wheels: dark discs touching the bottom
    for (double wx : {7.0, t.width - 8.0}) {
        for (int y = t.height - 7; y < t.height; ++y) {
            for (int x = 0; x < t.width; ++x) {
                const double dx = x - wx, dy = y - (t.height - 4);
                if (dx * dx + dy * dy <= 3.2 * 3.2) {
                    const std::size_t i = static_cast<std::size_t>(y) * t.width + x;
                    t.mask[i] = 1;
                    t.rgb[i * 3] = 25;
                    t.rgb[i * 3 + 1] = 25;
                    t.rgb[i * 3 + 2] = 28;
                }
            }
        }
    }
    return t;
}

}  // namespace detail

inline const std::vector<SnalTemplate>& snal_template_bank(const SnalParams& p) {
    static std::vector<SnalTemplate> bank;
    static std::uint64_t bank_seed = 0;
    static int bank_count = -1;
    if (bank_count != p.template_count || bank_seed != p.template_seed) {
        bank.clear();
        Rng rng(p.template_seed);
        for (int i = 0; i < p.template_count; ++i) bank.push_back(detail::make_template(rng));
        bank_seed = p.template_seed;
        bank_count = p.template_count;
    }
    return bank;
}

// ---------------------------------------------------------------------------
// ESIA: coloured-strip distortion from signal injection into the camera
// readout. Severity maps to a fixed footprint table (monotone by
// construction): low = 2 strips x 4 rows, offset 64, no saturation;
// med = 4 x 8, offset 128, no saturation; high = 8 x 12, offset 128,
// saturation on.
// ---------------------------------------------------------------------------

enum class EsiaSeverity { low, med, high };

inline const char* severity_name(EsiaSeverity s) {
    switch (s) {
        case EsiaSeverity::low: return "low";
        case EsiaSeverity::med: return "med";
        case EsiaSeverity::high: return "high";
    }
    return "?";
}

inline EsiaSeverity severity_from_name(const std::string& s) {
    if (s == "low") return EsiaSeverity::low;
    if (s == "med") return EsiaSeverity::med;
    if (s == "high") return EsiaSeverity::high;
    throw ConfigError("esia: unknown severity \"" + s + "\" (expected low|med|high)");
}

struct EsiaParams {
    EsiaSeverity severity = EsiaSeverity::med;

    int n_strips() const {
        switch (severity) {
            case EsiaSeverity::low: return 2;
            case EsiaSeverity::med: return 4;
            case EsiaSeverity::high: return 8;
        }
        return 0;
    }
    int strip_height() const {
        switch (severity) {
            case EsiaSeverity::low: return 4;
            case EsiaSeverity::med: return 8;
            case EsiaSeverity::high: return 12;
        }
        return 0;
    }
    int channel_offset() const { return severity == EsiaSeverity::low ? 64 : 128; }
    bool saturate() const { return severity == EsiaSeverity::high; }
};

// ---------------------------------------------------------------------------
// Config and schedule
// ---------------------------------------------------------------------------

struct AttackConfig {
    AttackKind kind = AttackKind::poltergeist;
    int interval_d = 1;
    int phase = 0;
    std::uint64_t seed = 0;
    PoltergeistParams poltergeist;
    SnalParams snal;
    EsiaParams esia;

    void validate() const {
        if (interval_d < 1) throw ArgumentError("attack: interval_d must be >= 1");
        if (phase < 0) throw ArgumentError("attack: phase must be >= 0");
        switch (kind) {
            case AttackKind::poltergeist: poltergeist.validate(); break;
            case AttackKind::snal: snal.validate(); break;
            case AttackKind::esia: break;
        }
    }
};

inline bool is_attack_step(long t, const AttackConfig& cfg) {
    if (t < 0) throw ArgumentError("is_attack_step: t must be >= 0");
    if (t < cfg.phase) return false;
    return (t - cfg.phase) % cfg.interval_d == 0;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> gaussian_taps(double sigma, int ksize) {
    std::vector<double> g(static_cast<std::size_t>(ksize));
    const int r = ksize / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += g[static_cast<std::size_t>(i + r)];
    }
    for (auto& w : g) w /= sum;
    return g;
}

inline void blur_plane_separable(RealPlane& p, const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size()) / 2;
    RealPlane tmp(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int xx = std::clamp(x + i, 0, p.width - 1);
                acc += taps[static_cast<std::size_t>(i + r)] * p.at(xx, y);
            }
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, p.height - 1);
                acc += taps[static_cast<std::size_t>(i + r)] * tmp.at(x, yy);
            }
            p.at(x, y) = acc;
        }
    }
}

inline double bilinear_clamped(const RealPlane& p, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(p.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(p.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, p.width - 1);
    const int y1 = std::min(y0 + 1, p.height - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * p.at(x0, y0) + fx * (1 - fy) * p.at(x1, y0) +
           (1 - fx) * fy * p.at(x0, y1) + fx * fy * p.at(x1, y1);
}

inline void motion_blur_planes(RealPlanes& p, int len, double angle) {
    if (len <= 1) return;
    const double cx = std::cos(angle), sy = std::sin(angle);
    for (int c = 0; c < 3; ++c) {
        RealPlane out(p.width, p.height);
        for (int y = 0; y < p.height; ++y) {
            for (int x = 0; x < p.width; ++x) {
                double acc = 0.0;
                for (int i = 0; i < len; ++i) {
                    const double t = i - (len - 1) / 2.0;
                    acc += bilinear_clamped(p.ch[c], x + t * cx, y + t * sy);
                }
                out.at(x, y) = acc / len;
            }
        }
        p.ch[c] = std::move(out);
    }
}

}  // namespace detail

inline Frame poltergeist(const Frame& frame, const PoltergeistParams& p, Rng& rng) {
    p.validate();
    if (p.ksize > std::min(frame.width, frame.height)) {
        throw ArgumentError("poltergeist: ksize " + std::to_string(p.ksize) +
                            " exceeds image " + std::to_string(frame.width) + "x" +
                            std::to_string(frame.height));
    }
    const double angle = p.motion_angle_mode == MotionAngleMode::fixed
                             ? p.fixed_angle
                             : rng.uniform(0.0, 2.0 * 3.141592653589793);
    RealPlanes planes = imaging::to_real(frame);
    if (p.ksize > 1) {
        const auto taps = detail::gaussian_taps(p.sigma, p.ksize);
        for (int c = 0; c < 3; ++c) detail::blur_plane_separable(planes.ch[c], taps);
    }
    detail::motion_blur_planes(planes, p.motion_len, angle);
    return imaging::quantize(planes);
}

inline Frame snal(const Frame& frame, const SnalParams& p, Rng& rng) {
    p.validate();
    const auto& bank = snal_template_bank(p);
    Frame out = frame;
    const int n = static_cast<int>(rng.uniform_int(p.n_patches_min, p.n_patches_max));
    for (int k = 0; k < n; ++k) {
        const SnalTemplate& tpl = bank[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(bank.size()) - 1))];
        const int pw = static_cast<int>(rng.uniform_int(p.patch_min, p.patch_max));
        const int ph = std::max(2, pw * tpl.height / tpl.width);
        // placement uniform over the image; patches may clip at the borders
        const int px = static_cast<int>(rng.uniform_int(-pw / 2, frame.width - 1 - pw / 2));
        const int py = static_cast<int>(rng.uniform_int(-ph / 2, frame.height - 1 - ph / 2));
        for (int y = 0; y < ph; ++y) {
            const int iy = py + y;
            if (iy < 0 || iy >= frame.height) continue;
            // bilinear template sampling keeps the silhouette's regions
            // coherent at small patch sizes; nearest sampling would alias
            // the texture into per-pixel noise
            const double fy = (y + 0.5) * tpl.height / ph - 0.5;
            for (int x = 0; x < pw; ++x) {
                const int ix = px + x;
                if (ix < 0 || ix >= frame.width) continue;
                const double fx = (x + 0.5) * tpl.width / pw - 0.5;
                const int tx = std::clamp(static_cast<int>(std::lround(fx)), 0, tpl.width - 1);
                const int ty = std::clamp(static_cast<int>(std::lround(fy)), 0, tpl.height - 1);
                const std::size_t ti = static_cast<std::size_t>(ty) * tpl.width + tx;
                if (!tpl.mask[ti]) continue;
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, tpl.width - 1);
                const int x1 = std::min(x0 + 1, tpl.width - 1);
                const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, tpl.height - 1);
                const int y1 = std::min(y0 + 1, tpl.height - 1);
                const double ax = std::clamp(fx - x0, 0.0, 1.0);
                const double ay = std::clamp(fy - y0, 0.0, 1.0);
                for (int c = 0; c < 3; ++c) {
                    // delta is clamped against the original frame so that
                    // overlapping patches cannot compound past epsilon
                    const int orig = frame.at(ix, iy, c);
                    auto texel = [&](int xx, int yy) {
                        return static_cast<double>(
                            tpl.rgb[(static_cast<std::size_t>(yy) * tpl.width + xx) * 3 +
                                    static_cast<std::size_t>(c)]);
                    };
                    const double want = (1 - ax) * (1 - ay) * texel(x0, y0) +
                                        ax * (1 - ay) * texel(x1, y0) +
                                        (1 - ax) * ay * texel(x0, y1) + ax * ay * texel(x1, y1);
                    const int delta =
                        std::clamp(static_cast<int>(std::lround(want)) - orig, -p.epsilon, p.epsilon);
                    out.at(ix, iy, c) =
                        static_cast<std::uint8_t>(std::clamp(orig + delta, 0, 255));
                }
            }
        }
    }
    return out;
}

inline Frame esia(const Frame& frame, const EsiaParams& p, Rng& rng) {
    const int sh = p.strip_height();
    if (sh > frame.height) {
        throw ArgumentError("esia: strip height " + std::to_string(sh) +
                            " exceeds image height " + std::to_string(frame.height));
    }
    // Cap the strip count so bands always fit; keeps the severity footprint
    // monotone on small frames where the full table would exceed the image.
    const int n = std::min(p.n_strips(), frame.height / sh);
    const int free_rows = frame.height - n * sh;

    // non-overlapping band starts: sorted offsets into the free space
    std::vector<int> offs(static_cast<std::size_t>(n));
    for (auto& o : offs) o = static_cast<int>(rng.uniform_int(0, free_rows));
    std::sort(offs.begin(), offs.end());

    Frame out = frame;
    for (int i = 0; i < n; ++i) {
        const int row0 = offs[static_cast<std::size_t>(i)] + i * sh;
        const int shifted = static_cast<int>(rng.uniform_int(0, 2));
        const int sign = rng.bernoulli(0.5) ? 1 : -1;
        const int offset = sign * p.channel_offset();
        int sat_channel = -1;
        int sat_value = 0;
        if (p.saturate()) {
            sat_channel = (shifted + 1 + static_cast<int>(rng.uniform_int(0, 1))) % 3;
            sat_value = rng.bernoulli(0.5) ? 255 : 0;
        }
        for (int y = row0; y < row0 + sh; ++y) {
            for (int x = 0; x < frame.width; ++x) {
                const int v = out.at(x, y, shifted);
                out.at(x, y, shifted) = static_cast<std::uint8_t>(std::clamp(v + offset, 0, 255));
                if (sat_channel >= 0) {
                    out.at(x, y, sat_channel) = static_cast<std::uint8_t>(sat_value);
                }
            }
        }
    }
    return out;
}

inline std::pair<Frame, bool> apply(const Frame& frame, const AttackConfig& cfg, long t, Rng& rng) {
    if (!is_attack_step(t, cfg)) return {frame, false};
    switch (cfg.kind) {
        case AttackKind::poltergeist: return {poltergeist(frame, cfg.poltergeist, rng), true};
        case AttackKind::snal: return {snal(frame, cfg.snal, rng), true};
        case AttackKind::esia: return {esia(frame, cfg.esia, rng), true};
    }
    throw ArgumentError("apply: unknown attack kind");
}

// Applies the configured operator to every camera frame of one timestep.
// All randomness is derived from (cfg.seed, t, camera) so a replay with
// the same seed is byte-identical; the poltergeist motion angle is drawn
// once per event and shared across cameras.
template <std::size_t N>
inline std::array<Frame, N> apply_rig(const std::array<Frame, N>& frames, const AttackConfig& cfg,
                                      long t, bool* attacked_out = nullptr) {
    if (!is_attack_step(t, cfg)) {
        if (attacked_out) *attacked_out = false;
        return frames;
    }
    if (attacked_out) *attacked_out = true;
    std::array<Frame, N> out;
    PoltergeistParams polt = cfg.poltergeist;
    if (cfg.kind == AttackKind::poltergeist &&
        polt.motion_angle_mode == MotionAngleMode::random_per_event) {
        Rng event_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        polt.fixed_angle = event_rng.uniform(0.0, 2.0 * 3.141592653589793);
        polt.motion_angle_mode = MotionAngleMode::fixed;
    }
    for (std::size_t cam = 0; cam < N; ++cam) {
        Rng cam_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t), cam));
        switch (cfg.kind) {
            case AttackKind::poltergeist: out[cam] = poltergeist(frames[cam], polt, cam_rng); break;
            case AttackKind::snal: out[cam] = snal(frames[cam], cfg.snal, cam_rng); break;
            case AttackKind::esia: out[cam] = esia(frames[cam], cfg.esia, cam_rng); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON round trip: {"kind","interval_d","phase","seed","params":{...}}
// ---------------------------------------------------------------------------

inline ordered_json to_json(const AttackConfig& cfg) {
    ordered_json j;
    j["kind"] = kind_name(cfg.kind);
    j["interval_d"] = cfg.interval_d;
    j["phase"] = cfg.phase;
    j["seed"] = cfg.seed;
    ordered_json params;
    switch (cfg.kind) {
        case AttackKind::poltergeist:
            params["sigma"] = cfg.poltergeist.sigma;
            params["ksize"] = cfg.poltergeist.ksize;
            params["motion_len"] = cfg.poltergeist.motion_len;
            params["motion_angle_mode"] =
                cfg.poltergeist.motion_angle_mode == MotionAngleMode::fixed ? "fixed"
                                                                            : "random_per_event";
            params["fixed_angle"] = cfg.poltergeist.fixed_angle;
            break;
        case AttackKind::snal:
            params["epsilon"] = cfg.snal.epsilon;
            params["n_patches"] = {cfg.snal.n_patches_min, cfg.snal.n_patches_max};
            params["patch_size"] = {cfg.snal.patch_min, cfg.snal.patch_max};
            params["template_count"] = cfg.snal.template_count;
            params["template_seed"] = cfg.snal.template_seed;
            break;
        case AttackKind::esia:
            params["severity"] = severity_name(cfg.esia.severity);
            break;
    }
    j["params"] = params;
    return j;
}

inline AttackConfig attack_from_json(const json& j) {
    check_keys(j, {"kind", "interval_d", "phase", "seed", "params"}, "attack");
    AttackConfig cfg;
    cfg.kind = kind_from_name(json_require<std::string>(j, "kind", "attack"));
    cfg.interval_d = json_get<int>(j, "interval_d", 1);
    cfg.phase = json_get<int>(j, "phase", 0);
    cfg.seed = json_get<std::uint64_t>(j, "seed", 0);
    const json params = j.contains("params") ? j.at("params") : json::object();
    switch (cfg.kind) {
        case AttackKind::poltergeist: {
            check_keys(params, {"sigma", "ksize", "motion_len", "motion_angle_mode", "fixed_angle"},
                       "attack.params (poltergeist)");
            cfg.poltergeist.sigma = json_get<double>(params, "sigma", cfg.poltergeist.sigma);
            cfg.poltergeist.ksize = json_get<int>(params, "ksize", cfg.poltergeist.ksize);
            cfg.poltergeist.motion_len =
                json_get<int>(params, "motion_len", cfg.poltergeist.motion_len);
            const std::string mode =
                json_get<std::string>(params, "motion_angle_mode", "random_per_event");
            if (mode == "fixed") {
                cfg.poltergeist.motion_angle_mode = MotionAngleMode::fixed;
            } else if (mode == "random_per_event") {
                cfg.poltergeist.motion_angle_mode = MotionAngleMode::random_per_event;
            } else {
                throw ConfigError("attack.params: unknown motion_angle_mode \"" + mode + "\"");
            }
            cfg.poltergeist.fixed_angle =
                json_get<double>(params, "fixed_angle", cfg.poltergeist.fixed_angle);
            break;
        }
        case AttackKind::snal: {
            check_keys(params, {"epsilon", "n_patches", "patch_size", "template_count", "template_seed"},
                       "attack.params (snal)");
            cfg.snal.epsilon = json_get<int>(params, "epsilon", cfg.snal.epsilon);
            if (params.contains("n_patches")) {
                const auto v = params.at("n_patches").get<std::vector<int>>();
                if (v.size() != 2) throw ConfigError("attack.params: n_patches must be [min,max]");
                cfg.snal.n_patches_min = v[0];
                cfg.snal.n_patches_max = v[1];
            }
            if (params.contains("patch_size")) {
                const auto v = params.at("patch_size").get<std::vector<int>>();
                if (v.size() != 2) throw ConfigError("attack.params: patch_size must be [min,max]");
                cfg.snal.patch_min = v[0];
                cfg.snal.patch_max = v[1];
            }
            cfg.snal.template_count =
                json_get<int>(params, "template_count", cfg.snal.template_count);
            cfg.snal.template_seed =
                json_get<std::uint64_t>(params, "template_seed", cfg.snal.template_seed);
            break;
        }
        case AttackKind::esia: {
            check_keys(params, {"severity"}, "attack.params (esia)");
            cfg.esia.severity =
                severity_from_name(json_get<std::string>(params, "severity", "med"));
            break;
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace ad2::attacks
