#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ad2/errors.hpp"

namespace ad2::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
    Vec2 unit() const {
        const double n = norm();
        return n > 0 ? Vec2{x / n, y / n} : Vec2{1, 0};
    }
    Vec2 perp_left() const { return {-y, x}; }
};

inline double wrap_angle(double a) {
    while (a > 3.141592653589793) a -= 2 * 3.141592653589793;
    while (a <= -3.141592653589793) a += 2 * 3.141592653589793;
    return a;
}

struct PolylineProjection {
    double arc_s = 0.0;      // arc length of the nearest point
    double lateral = 0.0;    // signed offset, left of travel positive
    double distance = 0.0;   // unsigned distance to the polyline
    std::size_t segment = 0;
    Vec2 point{};            // nearest point on the polyline
    Vec2 dir{1, 0};          // travel direction of the nearest segment
};

class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
        if (pts_.size() < 2) throw ArgumentError("polyline: need at least 2 points");
        cum_.resize(pts_.size(), 0.0);
        for (std::size_t i = 1; i < pts_.size(); ++i) {
            const double len = (pts_[i] - pts_[i - 1]).norm();
            if (len <= 0.0) throw ArgumentError("polyline: consecutive points must be distinct");
            cum_[i] = cum_[i - 1] + len;
        }
    }

    const std::vector<Vec2>& points() const { return pts_; }
    double length() const { return cum_.back(); }

    PolylineProjection project(Vec2 p) const {
        PolylineProjection best;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
            const Vec2 a = pts_[i], b = pts_[i + 1];
            const Vec2 ab = b - a;
            const double len2 = ab.dot(ab);
            double t = ab.dot(p - a) / len2;
            t = std::clamp(t, 0.0, 1.0);
            const Vec2 q = a + ab * t;
            const double d2 = (p - q).dot(p - q);
            if (d2 < best_d2) {
                best_d2 = d2;
                best.segment = i;
                best.point = q;
                best.dir = ab.unit();
                best.arc_s = cum_[i] + ab.norm() * t;
            }
        }
        best.distance = std::sqrt(best_d2);
        const Vec2 off = p - best.point;
        // left of travel direction is positive
        best.lateral = best.dir.cross(off) >= 0 ? best.distance : -best.distance;
        return best;
    }

    // Position and direction at a given arc length (clamped to the ends).
    void at_arc(double s, Vec2* pos, Vec2* dir) const {
        s = std::clamp(s, 0.0, length());
        std::size_t i = std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin();
        if (i == 0) i = 1;
        if (i >= pts_.size()) i = pts_.size() - 1;
        const Vec2 a = pts_[i - 1], b = pts_[i];
        const double seg_len = cum_[i] - cum_[i - 1];
        const double t = seg_len > 0 ? (s - cum_[i - 1]) / seg_len : 0.0;
        if (pos) *pos = a + (b - a) * t;
        if (dir) *dir = (b - a).unit();
    }

private:
    std::vector<Vec2> pts_;
    std::vector<double> cum_;
};

// Oriented bounding box (center, heading, half extents).
struct Obb {
    Vec2 center{};
    double heading = 0.0;
    double half_len = 0.0;  // along heading
    double half_wid = 0.0;

    std::array<Vec2, 4> corners() const {
        const Vec2 fwd{std::cos(heading), std::sin(heading)};
        const Vec2 left = fwd.perp_left();
        return {center + fwd * half_len + left * half_wid,
                center + fwd * half_len - left * half_wid,
                center - fwd * half_len - left * half_wid,
                center - fwd * half_len + left * half_wid};
    }

    bool contains(Vec2 p) const {
        const Vec2 fwd{std::cos(heading), std::sin(heading)};
        const Vec2 d = p - center;
        return std::abs(d.dot(fwd)) <= half_len && std::abs(d.cross(fwd)) <= half_wid;
    }
};

// Separating-axis test for two oriented rectangles.
inline bool obb_overlap(const Obb& a, const Obb& b) {
    const auto ca = a.corners();
    const auto cb = b.corners();
    const std::array<Vec2, 4> axes = {
        Vec2{std::cos(a.heading), std::sin(a.heading)},
        Vec2{std::cos(a.heading), std::sin(a.heading)}.perp_left(),
        Vec2{std::cos(b.heading), std::sin(b.heading)},
        Vec2{std::cos(b.heading), std::sin(b.heading)}.perp_left()};
    for (const Vec2& ax : axes) {
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (const Vec2& c : ca) {
            const double p = c.dot(ax);
            amin = std::min(amin, p);
            amax = std::max(amax, p);
        }
        for (const Vec2& c : cb) {
            const double p = c.dot(ax);
            bmin = std::min(bmin, p);
            bmax = std::max(bmax, p);
        }
        if (amax < bmin || bmax < amin) return false;
    }
    return true;
}

// True if segment pq crosses segment ab (proper or touching).
inline bool segments_intersect(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
    auto orient = [](Vec2 u, Vec2 v, Vec2 w) {
        const double c = (v - u).cross(w - u);
        if (c > 1e-12) return 1;
        if (c < -1e-12) return -1;
        return 0;
    };
    const int o1 = orient(p, q, a), o2 = orient(p, q, b);
    const int o3 = orient(a, b, p), o4 = orient(a, b, q);
    if (o1 != o2 && o3 != o4) return true;
    auto on_seg = [](Vec2 u, Vec2 v, Vec2 w) {
        return std::min(u.x, v.x) - 1e-12 <= w.x && w.x <= std::max(u.x, v.x) + 1e-12 &&
               std::min(u.y, v.y) - 1e-12 <= w.y && w.y <= std::max(u.y, v.y) + 1e-12;
    };
    if (o1 == 0 && on_seg(p, q, a)) return true;
    if (o2 == 0 && on_seg(p, q, b)) return true;
    if (o3 == 0 && on_seg(a, b, p)) return true;
    if (o4 == 0 && on_seg(a, b, q)) return true;
    return false;
}

}  // namespace ad2::geom
