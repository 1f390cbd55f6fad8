#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ad2/errors.hpp"
#include "ad2/geometry.hpp"
#include "ad2/imaging.hpp"
#include "ad2/world.hpp"

namespace ad2::render {

using geom::Vec2;
using imaging::Frame;
using world::EgoState;
using world::Obstacle;
using world::ObstacleKind;
using world::World;

// Flat-shaded palette. The reference pilot keys on these constants, so they
// live here rather than in the pilot.
namespace palette {
struct Rgb {
    std::uint8_t r, g, b;
};
inline constexpr Rgb sky{135, 206, 235};
inline constexpr Rgb road{80, 80, 85};
inline constexpr Rgb offroad{104, 106, 98};
inline constexpr Rgb boundary{250, 250, 250};
inline constexpr Rgb centerline{240, 210, 50};
inline constexpr Rgb stop_marker{205, 40, 160};
inline constexpr Rgb signal_red{230, 40, 40};
inline constexpr Rgb signal_green{40, 220, 60};
inline constexpr Rgb obstacle_vehicle{40, 90, 220};
inline constexpr Rgb obstacle_pedestrian{245, 130, 35};
inline constexpr Rgb obstacle_static{0, 175, 175};

inline Rgb obstacle_color(ObstacleKind k) {
    switch (k) {
        case ObstacleKind::pedestrian: return obstacle_pedestrian;
        case ObstacleKind::vehicle: return obstacle_vehicle;
        case ObstacleKind::static_prop: return obstacle_static;
    }
    return obstacle_static;
}
}  // namespace palette

// stop-zone billboard geometry, shared with the pilot's distance estimator
inline constexpr double kStopMarkerHeight = 2.0;
inline constexpr double kStopMarkerRadius = 0.45;
inline constexpr double kSignalHeadHeight = 3.0;
inline constexpr double kSignalHeadRadius = 0.6;

struct CameraSpec {
    double mount_dx = 1.0;   // ego frame, +x forward
    double mount_dy = 0.0;   // +y left
    double mount_dz = 1.6;   // height above ground
    double yaw_offset = 0.0; // radians, +left
    double hfov = 1.5707963267948966;
    int width = 96;
    int height = 64;

    void validate() const {
        if (!(hfov > 0.0 && hfov < 3.141592653589793))
            throw ArgumentError("camera: hfov must be in (0, pi)");
        if (width < 16 || height < 16)
            throw ArgumentError("camera: width and height must be >= 16");
    }
};

struct CameraRig {
    std::array<CameraSpec, 3> cameras;  // fixed order [left, centre, right]

    void validate() const {
        for (const auto& c : cameras) c.validate();
        const auto lo = [](const CameraSpec& c) { return c.yaw_offset - c.hfov / 2; };
        const auto hi = [](const CameraSpec& c) { return c.yaw_offset + c.hfov / 2; };
        const double min_overlap = 10.0 * 3.141592653589793 / 180.0;
        const double ol1 = std::min(hi(cameras[0]), hi(cameras[1])) -
                           std::max(lo(cameras[0]), lo(cameras[1]));
        const double ol2 = std::min(hi(cameras[1]), hi(cameras[2])) -
                           std::max(lo(cameras[1]), lo(cameras[2]));
        if (ol1 < min_overlap || ol2 < min_overlap)
            throw ArgumentError("camera rig: adjacent fields of view must overlap by >= 10 deg");
    }
};

inline CameraRig default_rig(int width = 96, int height = 64) {
    const double q = 3.141592653589793 / 4.0;
    CameraRig rig;
    rig.cameras[0] = CameraSpec{1.0, 0.0, 1.6, +q, 1.5707963267948966, width, height};
    rig.cameras[1] = CameraSpec{1.0, 0.0, 1.6, 0.0, 1.5707963267948966, width, height};
    rig.cameras[2] = CameraSpec{1.0, 0.0, 1.6, -q, 1.5707963267948966, width, height};
    return rig;
}

// Pose-resolved pinhole model. Camera axes: x forward, y left, z up;
// u grows rightward, v grows downward, principal point at the image centre.
struct CameraModel {
    Vec2 pos{};
    double z = 1.6;
    double yaw = 0.0;
    double fx = 48.0, fy = 48.0, cx = 48.0, cy = 32.0;
    int width = 96, height = 64;

    // world point -> pixel; false if at/behind the near plane
    bool project(double wx, double wy, double wz, double* u, double* v, double* depth) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const double dx = wx - pos.x, dy = wy - pos.y;
        const double fwd = c * dx + s * dy;
        const double left = -s * dx + c * dy;
        const double up = wz - z;
        if (fwd < 1e-3) return false;
        if (u) *u = cx - fx * (left / fwd);
        if (v) *v = cy - fy * (up / fwd);
        if (depth) *depth = fwd;
        return true;
    }

    // pixel centre -> ground plane (z=0); false if the ray points at or
    // above the horizon
    bool unproject_ground(double u, double v, Vec2* gp, double* depth) const {
        const double lc = (cx - u) / fx;
        const double uc = (cy - v) / fy;
        if (uc >= -1e-9) return false;
        const double t = z / (-uc);
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Vec2 fwd{c, s};
        const Vec2 left{-s, c};
        if (gp) *gp = pos + (fwd + left * lc) * t;
        if (depth) *depth = t;
        return true;
    }
};

inline CameraModel make_camera_model(const EgoState& ego, const CameraSpec& cam) {
    cam.validate();
    CameraModel m;
    const double c = std::cos(ego.heading), s = std::sin(ego.heading);
    m.pos = {ego.x + c * cam.mount_dx - s * cam.mount_dy,
             ego.y + s * cam.mount_dx + c * cam.mount_dy};
    m.z = cam.mount_dz;
    m.yaw = geom::wrap_angle(ego.heading + cam.yaw_offset);
    m.width = cam.width;
    m.height = cam.height;
    m.cx = cam.width / 2.0;
    m.cy = cam.height / 2.0;
    m.fx = (cam.width / 2.0) / std::tan(cam.hfov / 2.0);
    m.fy = m.fx;
    return m;
}

namespace detail {

inline void put(Frame& f, int x, int y, palette::Rgb c) {
    f.at(x, y, 0) = c.r;
    f.at(x, y, 1) = c.g;
    f.at(x, y, 2) = c.b;
}

// Projection of a ground point onto the route, restricted to a window of
// segments near the camera (the full polyline scan is wasteful per pixel).
struct GroundClassifier {
    const World* world;
    const std::vector<Vec2>* pts;
    std::vector<double> cum;
    std::vector<std::size_t> window;    // segment indices near the camera
    std::vector<std::size_t> coarse;    // sparse waypoint indices for far pixels

    GroundClassifier(const World& w, Vec2 cam_pos) : world(&w), pts(&w.route.centerline.points()) {
        cum.resize(pts->size(), 0.0);
        for (std::size_t i = 1; i < pts->size(); ++i)
            cum[i] = cum[i - 1] + ((*pts)[i] - (*pts)[i - 1]).norm();
        const double win = 64.0;
        for (std::size_t i = 0; i + 1 < pts->size(); ++i) {
            if (((*pts)[i] - cam_pos).norm() <= win || ((*pts)[i + 1] - cam_pos).norm() <= win)
                window.push_back(i);
        }
        for (std::size_t i = 0; i < pts->size(); i += 4) coarse.push_back(i);
    }

    // nearest projection among window segments; false if window empty
    bool project(Vec2 p, double* lateral_abs, double* signed_lat, double* arc) const {
        double best_d2 = 1e300;
        double best_arc = 0.0;
        double best_sign = 1.0;
        for (std::size_t i : window) {
            const Vec2 a = (*pts)[i], b = (*pts)[i + 1];
            const Vec2 ab = b - a;
            const double len2 = ab.dot(ab);
            double t = ab.dot(p - a) / len2;
            t = std::clamp(t, 0.0, 1.0);
            const Vec2 q = a + ab * t;
            const double d2 = (p - q).dot(p - q);
            if (d2 < best_d2) {
                best_d2 = d2;
                best_arc = cum[i] + std::sqrt(len2) * t;
                best_sign = ab.cross(p - q) >= 0 ? 1.0 : -1.0;
            }
        }
        if (best_d2 >= 1e299) return false;
        const double d = std::sqrt(best_d2);
        if (lateral_abs) *lateral_abs = d;
        if (signed_lat) *signed_lat = best_sign * d;
        if (arc) *arc = best_arc;
        return true;
    }

    bool near_road_coarse(Vec2 p, double halfwidth) const {
        for (std::size_t i : coarse) {
            if (((*pts)[i] - p).norm() <= halfwidth + 4.0) return true;
        }
        return false;
    }

    palette::Rgb classify(Vec2 gp) const {
        const double lw2 = world->route.lane_width / 2.0;
        double d, sd, arc;
        if (!project(gp, &d, &sd, &arc)) {
            return near_road_coarse(gp, lw2) ? palette::road : palette::offroad;
        }
        if (std::abs(d - lw2) <= 0.09) return palette::boundary;
        if (d > lw2) return palette::offroad;
        for (const auto& ss : world->route.stop_signs) {
            if (std::abs(arc - ss.arc_s) <= 0.30) return palette::stop_marker;
        }
        for (const auto& sig : world->route.signals) {
            if (std::abs(arc - sig.arc_s) <= 0.25) return palette::boundary;
        }
        if (d <= 0.14) return palette::centerline;
        return palette::road;
    }
};

// Convex hull (monotonic chain) of projected points; used to draw box
// silhouettes with a single polygon fill.
inline std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> p) {
    if (p.size() < 3) return p;
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (p.size() < 3) return p;
    auto cross = [](const std::array<double, 2>& o, const std::array<double, 2>& a,
                    const std::array<double, 2>& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<std::array<double, 2>> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = p.size() - 1; i-- > 0;) {
        while (k >= lower && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    h.resize(k - 1);
    return h;
}

inline void fill_convex(Frame& f, const std::vector<std::array<double, 2>>& poly,
                        palette::Rgb color) {
    if (poly.size() < 3) return;
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& p : poly) {
        umin = std::min(umin, p[0]);
        umax = std::max(umax, p[0]);
        vmin = std::min(vmin, p[1]);
        vmax = std::max(vmax, p[1]);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(umin - 0.5)));
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(umax)));
    const int y0 = std::max(0, static_cast<int>(std::floor(vmin - 0.5)));
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(vmax)));
    for (int y = y0; y <= y1; ++y) {
        const double pv = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            const double pu = x + 0.5;
            bool pos = false, neg = false;
            for (std::size_t i = 0; i < poly.size(); ++i) {
                const auto& a = poly[i];
                const auto& b = poly[(i + 1) % poly.size()];
                const double c = (b[0] - a[0]) * (pv - a[1]) - (b[1] - a[1]) * (pu - a[0]);
                if (c > 0) pos = true;
                if (c < 0) neg = true;
            }
            if (!(pos && neg)) put(f, x, y, color);
        }
    }
}

struct Vec3 {
    double x, y, z;
};

// Projects a 3D box silhouette, clipping its edges against the near plane.
inline void draw_box(Frame& f, const CameraModel& cam, const geom::Obb& box, double height,
                     palette::Rgb color) {
    const auto corners2 = box.corners();
    std::array<Vec3, 8> corners;
    for (int i = 0; i < 4; ++i) {
        corners[static_cast<std::size_t>(i)] = {corners2[static_cast<std::size_t>(i)].x,
                                                corners2[static_cast<std::size_t>(i)].y, 0.0};
        corners[static_cast<std::size_t>(i + 4)] = {corners2[static_cast<std::size_t>(i)].x,
                                                    corners2[static_cast<std::size_t>(i)].y,
                                                    height};
    }
    const double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
    auto to_cam = [&](const Vec3& w) {
        const double dx = w.x - cam.pos.x, dy = w.y - cam.pos.y;
        return Vec3{c * dx + s * dy, -s * dx + c * dy, w.z - cam.z};
    };
    std::array<Vec3, 8> cc;
    for (std::size_t i = 0; i < 8; ++i) cc[i] = to_cam(corners[i]);

    const double near = 0.05;
    std::vector<std::array<double, 2>> proj;
    auto push = [&](const Vec3& p) {
        proj.push_back({cam.cx - cam.fx * (p.y / p.x), cam.cy - cam.fy * (p.z / p.x)});
    };
    for (const auto& p : cc) {
        if (p.x > near) push(p);
    }
    static const int edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    for (const auto& e : edges) {
        const Vec3 a = cc[static_cast<std::size_t>(e[0])];
        const Vec3 b = cc[static_cast<std::size_t>(e[1])];
        if ((a.x > near) != (b.x > near)) {
            const double t = (near - a.x) / (b.x - a.x);
            push({near, a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)});
        }
    }
    if (proj.size() < 3) return;
    fill_convex(f, convex_hull(std::move(proj)), color);
}

inline void draw_disc(Frame& f, const CameraModel& cam, Vec2 center, double z, double radius,
                      palette::Rgb color) {
    double u, v, depth;
    if (!cam.project(center.x, center.y, z, &u, &v, &depth)) return;
    const double r_px = cam.fx * radius / depth;
    if (r_px < 0.3) return;
    const int x0 = std::max(0, static_cast<int>(std::floor(u - r_px - 1)));
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(u + r_px + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(v - r_px - 1)));
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(v + r_px + 1)));
    const double r2 = r_px * r_px;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double du = x + 0.5 - u, dv = y + 0.5 - v;
            if (du * du + dv * dv <= r2) put(f, x, y, color);
        }
    }
}

}  // namespace detail

// Deterministic rasterization in depth order: ground (with road, markings,
// stop bands), then boxes and signal heads far-to-near, sky above the
// horizon. Pure function of (world, t, ego, cam).
inline Frame render_frame(const World& w, double t, const EgoState& ego, const CameraSpec& cam) {
    const CameraModel m = make_camera_model(ego, cam);
    Frame f(cam.width, cam.height);
    detail::GroundClassifier gc(w, m.pos);

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec2 gp;
            double depth;
            if (m.unproject_ground(x + 0.5, y + 0.5, &gp, &depth) && depth <= 260.0) {
                detail::put(f, x, y, gc.classify(gp));
            } else {
                detail::put(f, x, y, palette::sky);
            }
        }
    }

    // far-to-near obstacle silhouettes
    std::vector<std::size_t> order(w.obstacles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> dist(w.obstacles.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        dist[i] = (w.obstacles[i].pos_at(t) - m.pos).norm();
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    for (std::size_t i : order) {
        if (dist[i] > 120.0) continue;
        detail::draw_box(f, m, w.obstacles[i].box_at(t), w.obstacles[i].height(),
                         palette::obstacle_color(w.obstacles[i].kind));
    }

    for (const auto& sig : w.route.signals) {
        detail::draw_disc(f, m, sig.head_pos, kSignalHeadHeight, kSignalHeadRadius,
                          sig.red_at(t) ? palette::signal_red : palette::signal_green);
    }
    for (const auto& ss : w.route.stop_signs) {
        detail::draw_disc(f, m, ss.marker_pos, kStopMarkerHeight, kStopMarkerRadius,
                          palette::stop_marker);
    }
    return f;
}

inline std::array<Frame, 3> render_rig(const World& w, double t, const EgoState& ego,
                                       const CameraRig& rig) {
    rig.validate();
    return {render_frame(w, t, ego, rig.cameras[0]), render_frame(w, t, ego, rig.cameras[1]),
            render_frame(w, t, ego, rig.cameras[2])};
}

}  // namespace ad2::render
