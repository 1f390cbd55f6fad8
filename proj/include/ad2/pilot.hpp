#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "ad2/errors.hpp"
#include "ad2/imaging.hpp"
#include "ad2/render.hpp"
#include "ad2/world.hpp"

namespace ad2::pilot {

using imaging::Frame;
using world::Control;

struct Percepts {
    double lane_offset_est = 0.0;   // meters, left-positive (ego relative to lane centre)
    double heading_err_est = 0.0;   // radians, ego heading minus road heading
    bool obstacle_ahead = false;
    double obstacle_proximity = 0.0;  // [0,1]
    bool degraded = false;            // no usable marking pixels this frame
};

struct PilotConfig {
    double target_speed = 6.0;  // m/s
    double kp = 0.4;            // steer gain on lateral offset
    double kd = 2.0;            // steer gain on heading error
    double speed_gain = 0.6;    // throttle P gain
    double brake_threshold = 0.5;
    double color_tol = 60.0;    // Euclidean RGB match radius
    int hold_steps = 5;         // frames to hold last steer when perception degrades
    double steer_decay = 0.85;  // per-step decay after the hold expires
    double stop_cooldown_s = 12.0;
    double stop_margin_m = 1.2;       // rest this far before the stop-band centre
    double obstacle_area_ref = 60.0;  // corridor pixels ~= vehicle dead ahead at 10 m
    double signal_area_ref = 14.0;    // red-disc pixels ~= head at 13 m
};

struct StepInputs {
    const std::array<Frame, 3>* frames = nullptr;
    double speed = 0.0;
    long step = 0;
    double dt = 0.05;
    double t = 0.0;
    // ground truth, only consulted by the oracle pilot
    const world::World* truth_world = nullptr;
    const world::EgoState* truth_ego = nullptr;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual Control step(const StepInputs& in) = 0;
    virtual const char* name() const = 0;
};

namespace detail {

inline bool color_match(const Frame& f, int x, int y, render::palette::Rgb c, double tol) {
    const double dr = static_cast<double>(f.at(x, y, 0)) - c.r;
    const double dg = static_cast<double>(f.at(x, y, 1)) - c.g;
    const double db = static_cast<double>(f.at(x, y, 2)) - c.b;
    return dr * dr + dg * dg + db * db <= tol * tol;
}

}  // namespace detail

// Colour-threshold + PD reference pilot. Deliberately perception-coupled so
// image perturbations propagate to control, and simple enough to stay
// deterministic: state is a short steer-hold buffer plus a stop-zone latch.
class ReferencePilot : public Agent {
public:
    ReferencePilot(const PilotConfig& cfg, const render::CameraRig& rig)
        : cfg_(cfg), rig_(rig) {
        world::EgoState origin;
        origin.x = 0.0;
        origin.y = 0.0;
        origin.heading = 0.0;
        ego_cam_ = render::make_camera_model(origin, rig_.cameras[1]);
    }

    const char* name() const override { return "reference"; }

    Percepts perceive(const std::array<Frame, 3>& frames) const {
        const Frame& f = frames[1];  // centre camera
        Percepts p;

        // lane fit: per-row centroids of centerline-coloured pixels in the
        // lower third, inverse-projected to ego-frame ground points
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int rows_hit = 0;
        for (int y = f.height * 2 / 3; y < f.height; ++y) {
            double usum = 0.0;
            int n = 0;
            for (int x = 0; x < f.width; ++x) {
                if (detail::color_match(f, x, y, render::palette::centerline, cfg_.color_tol)) {
                    usum += x + 0.5;
                    ++n;
                }
            }
            if (n == 0) continue;
            geom::Vec2 gp;
            if (!ego_cam_.unproject_ground(usum / n, y + 0.5, &gp, nullptr)) continue;
            sx += gp.x;
            sy += gp.y;
            sxx += gp.x * gp.x;
            sxy += gp.x * gp.y;
            ++rows_hit;
        }
        if (rows_hit >= 3) {
            const double n = rows_hit;
            const double denom = n * sxx - sx * sx;
            const double b = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
            const double a = (sy - b * sx) / n;
            p.lane_offset_est = -a;
            p.heading_err_est = -std::atan(b);
        } else {
            p.degraded = true;
        }

        // obstacle corridor: kind-coded pixels dead ahead, below the horizon
        const int cx = f.width / 2, cy = f.height / 2;
        const int corr = f.width / 8;
        int obstacle_area = 0;
        for (int y = cy + 3; y < f.height; ++y) {
            for (int x = cx - corr; x <= cx + corr; ++x) {
                if (detail::color_match(f, x, y, render::palette::obstacle_vehicle, cfg_.color_tol) ||
                    detail::color_match(f, x, y, render::palette::obstacle_pedestrian, cfg_.color_tol) ||
                    detail::color_match(f, x, y, render::palette::obstacle_static, cfg_.color_tol)) {
                    ++obstacle_area;
                }
            }
        }
        double proximity = std::min(1.0, obstacle_area / cfg_.obstacle_area_ref);

        // red signal head anywhere above the horizon
        int red_area = 0;
        for (int y = 0; y < cy; ++y) {
            for (int x = 0; x < f.width; ++x) {
                if (detail::color_match(f, x, y, render::palette::signal_red, cfg_.color_tol)) {
                    ++red_area;
                }
            }
        }
        proximity = std::max(proximity, std::min(1.0, red_area / cfg_.signal_area_ref));

        p.obstacle_proximity = proximity;
        p.obstacle_ahead = proximity > 0.05;
        return p;
    }

    // Distance from the ego centre to the stop-zone marker, estimated from
    // the apparent size of its billboard disc (stays visible at close range
    // where ground markings leave the field of view). +inf when not seen.
    double stop_marker_distance(const std::array<Frame, 3>& frames) const {
        const Frame& f = frames[1];
        const int v_max = f.height / 2 + 4;  // disc sits above the horizon
        int area = 0;
        for (int y = 0; y < v_max; ++y) {
            for (int x = 0; x < f.width; ++x) {
                if (detail::color_match(f, x, y, render::palette::stop_marker, cfg_.color_tol))
                    ++area;
            }
        }
        if (area < 4) return std::numeric_limits<double>::infinity();
        const double d_cam = ego_cam_.fx * render::kStopMarkerRadius *
                             std::sqrt(3.141592653589793 / area);
        return d_cam + rig_.cameras[1].mount_dx;
    }

    Control act(const Percepts& p, double speed) {
        if (!std::isfinite(p.lane_offset_est) || !std::isfinite(p.heading_err_est) ||
            !std::isfinite(p.obstacle_proximity)) {
            throw NumericError("pilot: non-finite percepts");
        }
        Control u;
        if (!p.degraded) {
            u.steer = std::clamp(-cfg_.kp * p.lane_offset_est - cfg_.kd * p.heading_err_est,
                                 -1.0, 1.0);
            last_steer_ = u.steer;
            degraded_count_ = 0;
        } else {
            ++degraded_count_;
            if (degraded_count_ <= cfg_.hold_steps) {
                u.steer = last_steer_;
            } else {
                last_steer_ *= cfg_.steer_decay;
                u.steer = last_steer_;
            }
        }

        const bool brake_now = p.obstacle_proximity > cfg_.brake_threshold || stopping_;
        if (brake_now) {
            u.brake = 1.0;
            u.throttle = 0.0;
        } else {
            u.brake = 0.0;
            u.throttle = std::clamp(cfg_.speed_gain * (cfg_.target_speed - speed), 0.0, 1.0);
        }
        return u;
    }

    Control step(const StepInputs& in) override {
        if (!in.frames) throw ArgumentError("reference pilot: camera frames required");
        const Percepts p = perceive(*in.frames);

        if (cooldown_steps_ > 0) --cooldown_steps_;
        if (!stopping_ && cooldown_steps_ == 0) {
            const double d = stop_marker_distance(*in.frames);
            const double trigger = in.speed * in.speed / 16.0 + cfg_.stop_margin_m;
            if (d < trigger) stopping_ = true;
        }
        if (stopping_ && in.speed < 0.05) {
            stopping_ = false;
            cooldown_steps_ = static_cast<long>(cfg_.stop_cooldown_s / in.dt);
        }
        return act(p, in.speed);
    }

    const PilotConfig& config() const { return cfg_; }

private:
    PilotConfig cfg_;
    render::CameraRig rig_;
    render::CameraModel ego_cam_;
    double last_steer_ = 0.0;
    long degraded_count_ = 0;
    bool stopping_ = false;
    long cooldown_steps_ = 0;
};

// Drives from ground truth (no cameras). Bounds achievable route completion
// and isolates attack effects to perception.
class OraclePilot : public Agent {
public:
    explicit OraclePilot(const PilotConfig& cfg) : cfg_(cfg) {}

    const char* name() const override { return "oracle"; }

    Control step(const StepInputs& in) override {
        if (!in.truth_world || !in.truth_ego)
            throw ArgumentError("oracle pilot: ground-truth state required");
        const world::World& w = *in.truth_world;
        const world::EgoState& ego = *in.truth_ego;
        const auto proj = w.route.centerline.project({ego.x, ego.y});

        const double heading_err =
            geom::wrap_angle(ego.heading - std::atan2(proj.dir.y, proj.dir.x));
        Control u;
        u.steer = std::clamp(-cfg_.kp * proj.lateral - cfg_.kd * heading_err, -1.0, 1.0);

        double proximity = 0.0;
        for (const auto& ob : w.obstacles) {
            const auto op = ob.pos_at(in.t);
            const auto oproj = w.route.centerline.project(op);
            const double ds = oproj.arc_s - proj.arc_s;
            if (ds > 0 && ds < 15.0 && std::abs(oproj.lateral) < 1.5) {
                proximity = std::max(proximity, std::min(1.0, 12.0 / std::max(ds, 1.0) - 0.2));
            }
        }
        for (const auto& sig : w.route.signals) {
            const double ds = sig.arc_s - proj.arc_s;
            if (sig.red_at(in.t) && ds > 0 && ds < 14.0) proximity = 1.0;
        }

        if (cooldown_steps_ > 0) --cooldown_steps_;
        if (!stopping_ && cooldown_steps_ == 0) {
            for (const auto& ss : w.route.stop_signs) {
                const double ds = ss.arc_s - proj.arc_s;
                const double trigger = in.speed * in.speed / 16.0 + cfg_.stop_margin_m;
                if (ds > -1.0 && ds < trigger) stopping_ = true;
            }
        }
        if (stopping_ && in.speed < 0.05) {
            stopping_ = false;
            cooldown_steps_ = static_cast<long>(cfg_.stop_cooldown_s / in.dt);
        }

        if (proximity > cfg_.brake_threshold || stopping_) {
            u.brake = 1.0;
            u.throttle = 0.0;
        } else {
            u.throttle = std::clamp(cfg_.speed_gain * (cfg_.target_speed - in.speed), 0.0, 1.0);
        }
        return u;
    }

private:
    PilotConfig cfg_;
    bool stopping_ = false;
    long cooldown_steps_ = 0;
};

inline std::unique_ptr<Agent> make_pilot(const std::string& kind, const PilotConfig& cfg,
                                         const render::CameraRig& rig) {
    if (kind == "reference") return std::make_unique<ReferencePilot>(cfg, rig);
    if (kind == "oracle") return std::make_unique<OraclePilot>(cfg);
    throw ConfigError("pilot: unknown kind \"" + kind + "\" (expected reference|oracle)");
}

}  // namespace ad2::pilot
