#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ad2/rng.hpp"
#include "ad2/world.hpp"

namespace ad2::routes {

using geom::Vec2;
using world::Obstacle;
using world::ObstacleKind;
using world::RouteSpec;
using world::SignalZone;
using world::StopSign;
using world::World;

enum class Family { train, test };

inline const char* family_name(Family f) { return f == Family::train ? "train" : "test"; }

inline Family family_from_name(const std::string& s) {
    if (s == "train") return Family::train;
    if (s == "test") return Family::test;
    throw ConfigError("route: unknown family \"" + s + "\" (expected train|test)");
}

namespace detail {

// Emits waypoints every ~2 m while walking straights and arcs.
struct PathBuilder {
    std::vector<Vec2> pts;
    Vec2 pos{0, 0};
    double heading = 0.0;

    void start() { pts.push_back(pos); }

    void straight(double len) {
        const double step = 2.0;
        const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int i = 1; i <= n; ++i) {
            const double d = len * i / n;
            pts.push_back(pos + Vec2{std::cos(heading), std::sin(heading)} * d);
        }
        pos = pts.back();
    }

    // positive angle turns left
    void arc(double radius, double angle) {
        const double arc_len = std::abs(angle) * radius;
        const double step = 2.0;
        const int n = std::max(2, static_cast<int>(std::ceil(arc_len / step)));
        const double sgn = angle >= 0 ? 1.0 : -1.0;
        const Vec2 center = pos + Vec2{std::cos(heading + sgn * 1.5707963267948966),
                                       std::sin(heading + sgn * 1.5707963267948966)} *
                                      radius;
        const double a0 = std::atan2(pos.y - center.y, pos.x - center.x);
        for (int i = 1; i <= n; ++i) {
            const double a = a0 + sgn * std::abs(angle) * i / n;
            pts.push_back(center + Vec2{std::cos(a), std::sin(a)} * radius);
        }
        pos = pts.back();
        heading = geom::wrap_angle(heading + angle);
    }
};

}  // namespace detail

struct RouteParams {
    Family family = Family::test;
    std::uint64_t seed = 2;
    double length_m = 300.0;
    double lane_width = 3.5;
};

// Bundled desk-scale worlds: two curves, one signal, one stop zone and four
// scripted obstacles over ~300 m. The train and test families use different
// base layouts so dataset splits are route-disjoint.
inline World build_world(const RouteParams& rp) {
    Rng rng(mix_seed(rp.family == Family::train ? 0xA11CEULL : 0xB0B5ULL, rp.seed));

    const double total = std::max(120.0, rp.length_m);
    const double sgn1 = rp.family == Family::train ? 1.0 : -1.0;  // first curve direction
    const double r1 = 38.0 + rng.uniform(-4.0, 4.0);
    const double r2 = 42.0 + rng.uniform(-4.0, 4.0);
    const double a1 = sgn1 * (0.85 + rng.uniform(-0.08, 0.08));
    const double a2 = -sgn1 * (0.8 + rng.uniform(-0.08, 0.08));
    const double arc1_len = std::abs(a1) * r1;
    const double arc2_len = std::abs(a2) * r2;
    const double straight_total = total - arc1_len - arc2_len;
    const double s0 = straight_total * 0.30;
    const double s1 = straight_total * 0.40;
    const double s2 = straight_total - s0 - s1;

    detail::PathBuilder pb;
    pb.start();
    pb.straight(s0);
    pb.arc(r1, a1);
    pb.straight(s1);
    pb.arc(r2, a2);
    pb.straight(s2);

    World w;
    w.route.id = std::string(family_name(rp.family)) + "-" + std::to_string(rp.seed);
    w.route.centerline = geom::Polyline(pb.pts);
    w.route.lane_width = rp.lane_width;

    const geom::Polyline& line = w.route.centerline;
    const double len = line.length();
    auto frame_at = [&](double s, Vec2* p, Vec2* d) { line.at_arc(s, p, d); };

    // one signal a little before the first curve's exit
    {
        SignalZone sig;
        sig.arc_s = s0 * 0.55 + rng.uniform(-4.0, 4.0);
        Vec2 p, d;
        frame_at(sig.arc_s, &p, &d);
        const Vec2 left = d.perp_left();
        sig.stop_a = p + left * (rp.lane_width / 2.0);
        sig.stop_b = p - left * (rp.lane_width / 2.0);
        sig.head_pos = p;
        sig.green_s = 10.0;
        sig.red_s = 5.0;
        sig.offset_s = rng.uniform(0.0, 15.0);
        w.route.signals.push_back(sig);
    }

    // one required stop zone in the middle straight
    {
        StopSign ss;
        ss.arc_s = arc1_len + s0 + s1 * 0.6 + rng.uniform(-3.0, 3.0);
        Vec2 p, d;
        frame_at(ss.arc_s, &p, &d);
        ss.zone = geom::Obb{p, std::atan2(d.y, d.x), 2.5, rp.lane_width / 2.0};
        ss.marker_pos = p;
        ss.required = true;
        w.route.stop_signs.push_back(ss);
    }

    // four scripted obstacles, all clear of the lane in benign runs
    auto lane_point = [&](double s, double lateral) {
        Vec2 p, d;
        frame_at(s, &p, &d);
        return std::pair<Vec2, double>{p + d.perp_left() * lateral, std::atan2(d.y, d.x)};
    };
    {
        Obstacle parked;
        parked.kind = ObstacleKind::vehicle;
        auto [p, h] = lane_point(total * 0.22 + rng.uniform(-6.0, 6.0),
                                 -(rp.lane_width / 2.0 + 1.6));
        parked.pos = p;
        parked.heading = h;
        parked.length = 4.4;
        parked.width = 1.8;
        w.obstacles.push_back(parked);
    }
    {
        Obstacle barrier;
        barrier.kind = ObstacleKind::static_prop;
        auto [p, h] = lane_point(total * 0.5 + rng.uniform(-6.0, 6.0),
                                 rp.lane_width / 2.0 + 1.3);
        barrier.pos = p;
        barrier.heading = h;
        barrier.length = 1.6;
        barrier.width = 0.9;
        w.obstacles.push_back(barrier);
    }
    {
        Obstacle walker;
        walker.kind = ObstacleKind::pedestrian;
        auto [p, h] = lane_point(total * 0.74 + rng.uniform(-5.0, 5.0),
                                 -(rp.lane_width / 2.0 + 1.8));
        walker.pos = p;
        walker.heading = h;
        walker.length = 0.5;
        walker.width = 0.5;
        Vec2 dummy, d;
        frame_at(total * 0.74, &dummy, &d);
        walker.vel = d * 1.0;  // strolls along the sidewalk
        walker.t_start = 0.0;
        walker.t_end = 25.0;
        w.obstacles.push_back(walker);
    }
    {
        // crossing vehicle: clears the lane long before the ego arrives
        Obstacle crosser;
        crosser.kind = ObstacleKind::vehicle;
        const double s = total * 0.9;
        Vec2 p, d;
        frame_at(s, &p, &d);
        const Vec2 left = d.perp_left();
        crosser.pos = p + left * 14.0;
        crosser.heading = std::atan2(-left.y, -left.x);
        crosser.length = 4.4;
        crosser.width = 1.8;
        crosser.vel = left * -4.0;
        crosser.t_start = 3.0;
        crosser.t_end = 10.5;  // ends up 16 m right of the lane
        w.obstacles.push_back(crosser);
    }
    (void)len;
    return w;
}

inline world::EgoState initial_ego(const World& w, double wheelbase = 2.7) {
    world::EgoState s;
    Vec2 p, d;
    w.route.centerline.at_arc(0.0, &p, &d);
    s.x = p.x;
    s.y = p.y;
    s.heading = std::atan2(d.y, d.x);
    s.speed = 0.0;
    s.wheelbase = wheelbase;
    return s;
}

}  // namespace ad2::routes
