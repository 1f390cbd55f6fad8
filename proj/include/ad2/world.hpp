#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ad2/errors.hpp"
#include "ad2/geometry.hpp"
#include "ad2/json_util.hpp"

namespace ad2::world {

using geom::Obb;
using geom::Polyline;
using geom::Vec2;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct SignalZone {
    Vec2 stop_a{};       // stop-line segment endpoints (across the lane)
    Vec2 stop_b{};
    Vec2 head_pos{};     // where the signal head is rendered
    double arc_s = 0.0;  // arc position along the route
    double green_s = 10.0;
    double red_s = 5.0;
    double offset_s = 0.0;

    bool red_at(double t) const {
        const double cycle = green_s + red_s;
        double m = std::fmod(t + offset_s, cycle);
        if (m < 0) m += cycle;
        return m >= green_s;
    }
};

struct StopSign {
    Obb zone{};          // zone the vehicle must come to rest inside
    Vec2 marker_pos{};   // rendered marker position (zone center on the lane)
    double arc_s = 0.0;
    bool required = true;
};

enum class ObstacleKind { pedestrian, vehicle, static_prop };

struct Obstacle {
    ObstacleKind kind = ObstacleKind::static_prop;
    Vec2 pos{};
    double heading = 0.0;
    double length = 1.0;
    double width = 1.0;
    // constant-velocity script, active on [t_start, t_end]
    Vec2 vel{};
    double t_start = 0.0;
    double t_end = 0.0;

    Vec2 pos_at(double t) const {
        const double dt = std::clamp(t, t_start, t_end) - t_start;
        return pos + vel * dt;
    }
    Obb box_at(double t) const {
        return Obb{pos_at(t), heading, length / 2.0, width / 2.0};
    }
    double height() const {
        switch (kind) {
            case ObstacleKind::pedestrian: return 1.8;
            case ObstacleKind::vehicle: return 1.5;
            case ObstacleKind::static_prop: return 1.1;
        }
        return 1.0;
    }
};

struct RouteSpec {
    std::string id;
    Polyline centerline;
    double lane_width = 3.5;
    std::vector<SignalZone> signals;
    std::vector<StopSign> stop_signs;

    double total_length() const { return centerline.length(); }
};

struct World {
    RouteSpec route;
    std::vector<Obstacle> obstacles;
};

struct EgoState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // radians, wrapped to (-pi, pi]
    double speed = 0.0;    // m/s, >= 0
    double wheelbase = 2.7;
};

struct Control {
    double steer = 0.0;     // [-1, 1], positive = left
    double throttle = 0.0;  // [0, 1]
    double brake = 0.0;     // [0, 1]

    bool finite() const {
        return std::isfinite(steer) && std::isfinite(throttle) && std::isfinite(brake);
    }
    Control clamped() const {
        return {std::clamp(steer, -1.0, 1.0), std::clamp(throttle, 0.0, 1.0),
                std::clamp(brake, 0.0, 1.0)};
    }
};

enum class InfractionKind { ped_collision, vehicle_collision, static_collision, red_light, stop_sign };

inline const char* infraction_name(InfractionKind k) {
    switch (k) {
        case InfractionKind::ped_collision: return "ped_collision";
        case InfractionKind::vehicle_collision: return "vehicle_collision";
        case InfractionKind::static_collision: return "static_collision";
        case InfractionKind::red_light: return "red_light";
        case InfractionKind::stop_sign: return "stop_sign";
    }
    return "?";
}

struct InfractionRecord {
    InfractionKind kind;
    long timestep = 0;
    Vec2 location{};
};

enum class TestResult { success, failure };

inline const char* test_result_name(TestResult r) {
    return r == TestResult::success ? "Success" : "Failure";
}

struct EpisodeTests {
    TestResult in_route = TestResult::success;
    TestResult blocked = TestResult::success;
    TestResult timeout = TestResult::success;
};

struct EpisodeReport {
    std::string route_id;
    std::uint64_t seed = 0;
    double R = 0.0;   // route completion, percent
    double P = 1.0;   // infraction penalty, (0, 1]
    double DS = 0.0;  // driving score, percent
    std::vector<double> ldev_trace;        // per-step signed meters
    std::vector<bool> attacked_trace;      // per-step attack flag
    std::vector<InfractionRecord> infractions;
    double outside_lane_pct = 0.0;
    EpisodeTests tests;
    long steps = 0;
    double sim_seconds = 0.0;
    double blocked_timeout_s = 180.0;
    std::string ended = "completed";
};

// ---------------------------------------------------------------------------
// Dynamics: kinematic bicycle with drag
// ---------------------------------------------------------------------------

struct DynamicsParams {
    double a_max = 3.0;       // m/s^2 at full throttle
    double b_max = 8.0;       // m/s^2 at full brake
    double c_drag = 0.25;     // 1/s, linear drag
    double delta_max = 35.0 * 3.141592653589793 / 180.0;  // max road-wheel angle
};

inline EgoState step_dynamics(const EgoState& s, const Control& u_in, double dt,
                              const DynamicsParams& dp = {}) {
    if (!(dt > 0.0 && dt <= 0.1)) throw ArgumentError("step_dynamics: need 0 < dt <= 0.1");
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.heading) ||
        !std::isfinite(s.speed) || !u_in.finite()) {
        throw NumericError("step_dynamics: non-finite state or control");
    }
    const Control u = u_in.clamped();
    const double a = dp.a_max * u.throttle - dp.b_max * u.brake - dp.c_drag * s.speed;
    const double v1 = std::max(0.0, s.speed + a * dt);
    const double v_mean = 0.5 * (s.speed + v1);
    const double dtheta = (s.speed / s.wheelbase) * std::tan(dp.delta_max * u.steer) * dt;
    const double h_mid = s.heading + 0.5 * dtheta;

    EgoState out = s;
    out.x = s.x + v_mean * dt * std::cos(h_mid);
    out.y = s.y + v_mean * dt * std::sin(h_mid);
    out.heading = geom::wrap_angle(s.heading + dtheta);
    out.speed = v1;
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double lane_deviation(const EgoState& s, const RouteSpec& route) {
    return route.centerline.project({s.x, s.y}).lateral;
}

inline double route_completion(double progress_m, const RouteSpec& route) {
    const double total = route.total_length();
    if (progress_m < 0.0 || progress_m > total + 1e-9) {
        throw ArgumentError("route_completion: progress outside [0, total_length]");
    }
    return 100.0 * std::clamp(progress_m, 0.0, total) / total;
}

inline double infraction_coefficient(InfractionKind k) {
    switch (k) {
        case InfractionKind::ped_collision: return 0.5;
        case InfractionKind::vehicle_collision: return 0.6;
        case InfractionKind::static_collision: return 0.65;
        case InfractionKind::red_light: return 0.7;
        case InfractionKind::stop_sign: return 0.8;
    }
    throw ArgumentError("infraction_coefficient: unknown infraction kind");
}

inline double infraction_penalty(const std::vector<InfractionRecord>& infractions) {
    double p = 1.0;
    for (const auto& rec : infractions) p *= infraction_coefficient(rec.kind);
    return p;
}

inline double infraction_penalty(const std::map<InfractionKind, int>& counts) {
    double p = 1.0;
    for (const auto& [kind, n] : counts) {
        if (n < 0) throw ArgumentError("infraction_penalty: negative count");
        p *= std::pow(infraction_coefficient(kind), n);
    }
    return p;
}

inline double driving_score(double r, double p) {
    if (!(r >= 0.0 && r <= 100.0)) throw ArgumentError("driving_score: R must be in [0,100]");
    if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("driving_score: P must be in (0,1]");
    return r * p;
}

// ---------------------------------------------------------------------------
// Infraction detection (stateful; one record per contact episode)
// ---------------------------------------------------------------------------

class InfractionMonitor {
public:
    explicit InfractionMonitor(const World& w)
        : world_(&w), in_contact_(w.obstacles.size(), false), stop_state_(w.route.stop_signs.size()) {}

    // Call once per step after dynamics; prev/now are ego states before and
    // after the step, t is the sim time at the end of the step.
    void update(const EgoState& prev, const EgoState& now, double t, long step,
                double ego_length, double ego_width, std::vector<InfractionRecord>& out) {
        const Obb ego_box{{now.x, now.y}, now.heading, ego_length / 2.0, ego_width / 2.0};

        for (std::size_t i = 0; i < world_->obstacles.size(); ++i) {
            const Obstacle& ob = world_->obstacles[i];
            const bool hit = geom::obb_overlap(ego_box, ob.box_at(t));
            if (hit && !in_contact_[i]) {
                InfractionKind kind = InfractionKind::static_collision;
                if (ob.kind == ObstacleKind::pedestrian) kind = InfractionKind::ped_collision;
                if (ob.kind == ObstacleKind::vehicle) kind = InfractionKind::vehicle_collision;
                out.push_back({kind, step, {now.x, now.y}});
            }
            in_contact_[i] = hit;
        }

        const Vec2 p0{prev.x, prev.y}, p1{now.x, now.y};
        for (const auto& sig : world_->route.signals) {
            if (sig.red_at(t) && geom::segments_intersect(p0, p1, sig.stop_a, sig.stop_b)) {
                out.push_back({InfractionKind::red_light, step, p1});
            }
        }

        for (std::size_t i = 0; i < world_->route.stop_signs.size(); ++i) {
            const StopSign& ss = world_->route.stop_signs[i];
            StopState& st = stop_state_[i];
            const bool inside = ss.zone.contains(p1);
            if (inside) {
                if (!st.inside) {
                    st.inside = true;
                    st.min_speed = now.speed;
                } else {
                    st.min_speed = std::min(st.min_speed, now.speed);
                }
            } else if (st.inside) {
                st.inside = false;
                if (ss.required && st.min_speed > 0.1) {
                    out.push_back({InfractionKind::stop_sign, step, p1});
                }
            }
        }
    }

private:
    struct StopState {
        bool inside = false;
        double min_speed = 0.0;
    };

    const World* world_;
    std::vector<bool> in_contact_;
    std::vector<StopState> stop_state_;
};

// ---------------------------------------------------------------------------
// Report serialization (stable key order; the ldev trace goes to CSV)
// ---------------------------------------------------------------------------

inline ordered_json report_to_json(const EpisodeReport& rep) {
    ordered_json j;
    j["route_id"] = rep.route_id;
    j["seed"] = rep.seed;
    j["R"] = rep.R;
    j["P"] = rep.P;
    j["DS"] = rep.DS;
    j["outside_lane_pct"] = rep.outside_lane_pct;

    double sum = 0.0, sum2 = 0.0;
    for (double d : rep.ldev_trace) {
        sum += std::abs(d);
        sum2 += d * d;
    }
    const double n = rep.ldev_trace.empty() ? 1.0 : static_cast<double>(rep.ldev_trace.size());
    const double mean_abs = sum / n;
    const double var = std::max(0.0, sum2 / n - mean_abs * mean_abs);
    j["ldev_mean_abs"] = mean_abs;
    j["ldev_std_abs"] = std::sqrt(var);

    ordered_json infra = ordered_json::array();
    std::map<std::string, int> counts;
    for (const auto& rec : rep.infractions) {
        ordered_json r;
        r["kind"] = infraction_name(rec.kind);
        r["timestep"] = rec.timestep;
        r["x"] = rec.location.x;
        r["y"] = rec.location.y;
        infra.push_back(r);
        counts[infraction_name(rec.kind)]++;
    }
    j["infractions"] = infra;
    j["infraction_counts"] = ordered_json(counts);

    ordered_json tests;
    tests["in_route"] = test_result_name(rep.tests.in_route);
    tests["blocked"] = test_result_name(rep.tests.blocked);
    tests["timeout"] = test_result_name(rep.tests.timeout);
    j["tests"] = tests;

    j["steps"] = rep.steps;
    j["sim_seconds"] = rep.sim_seconds;
    j["blocked_timeout_s"] = rep.blocked_timeout_s;
    j["attacked_steps"] = static_cast<long>(std::count(rep.attacked_trace.begin(),
                                                       rep.attacked_trace.end(), true));
    j["ended"] = rep.ended;
    return j;
}

inline std::string ldev_csv(const EpisodeReport& rep, double dt) {
    std::string out = "step,t_seconds,ldev_m,attacked\n";
    char line[96];
    for (std::size_t i = 0; i < rep.ldev_trace.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%d\n", i, static_cast<double>(i) * dt,
                      rep.ldev_trace[i],
                      i < rep.attacked_trace.size() && rep.attacked_trace[i] ? 1 : 0);
        out += line;
    }
    return out;
}

}  // namespace ad2::world
