#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "ad2/attacks.hpp"
#include "ad2/pilot.hpp"
#include "ad2/render.hpp"
#include "ad2/world.hpp"

namespace ad2::episode {

using attacks::AttackConfig;
using imaging::Frame;
using world::EpisodeReport;
using world::World;

struct SimConfig {
    double dt = 0.05;                // 20 Hz control
    double blocked_timeout_s = 180.0;
    double timeout_s = 240.0;        // simulated-time budget
    double off_route_m = 30.0;
    double ego_length = 4.5;
    double ego_width = 1.8;
    double wheelbase = 2.7;
    world::DynamicsParams dynamics;
    render::CameraRig rig = render::default_rig();
    std::string dump_dir;            // when set, writes "<step>_<cam>.ppm"
};

// Receives the benign (pre-attack) frames of every step; used for recording.
using FrameSink = std::function<void(long step, const std::array<Frame, 3>& frames)>;

inline EpisodeReport run_episode(const World& w, pilot::Agent& agent,
                                 const std::optional<AttackConfig>& attack, const SimConfig& sim,
                                 std::uint64_t seed, const FrameSink& sink = nullptr) {
    EpisodeReport rep;
    rep.route_id = w.route.id;
    rep.seed = seed;
    rep.blocked_timeout_s = sim.blocked_timeout_s;

    world::EgoState ego;
    {
        geom::Vec2 p, d;
        w.route.centerline.at_arc(0.0, &p, &d);
        ego.x = p.x;
        ego.y = p.y;
        ego.heading = std::atan2(d.y, d.x);
        ego.speed = 0.0;
        ego.wheelbase = sim.wheelbase;
    }

    world::InfractionMonitor monitor(w);
    const double total = w.route.total_length();
    double progress = 0.0;
    double blocked_time = 0.0;
    double driven = 0.0;
    double driven_outside = 0.0;
    const double outside_lat = w.route.lane_width / 2.0 - sim.ego_width / 2.0;
    static const char* cam_names[3] = {"left", "centre", "right"};

    for (long step = 0;; ++step) {
        const double t = step * sim.dt;
        if (t >= sim.timeout_s - 1e-9) {
            rep.tests.timeout = world::TestResult::failure;
            rep.ended = "timeout";
            break;
        }

        std::array<Frame, 3> frames = render_rig(w, t, ego, sim.rig);
        if (sink) sink(step, frames);

        bool attacked = false;
        if (attack) frames = attacks::apply_rig(frames, *attack, step, &attacked);

        if (!sim.dump_dir.empty()) {
            for (int c = 0; c < 3; ++c) {
                imaging::save_ppm(frames[static_cast<std::size_t>(c)],
                                  sim.dump_dir + "/" + std::to_string(step) + "_" + cam_names[c] +
                                      ".ppm");
            }
        }

        pilot::StepInputs in;
        in.frames = &frames;
        in.speed = ego.speed;
        in.step = step;
        in.dt = sim.dt;
        in.t = t;
        in.truth_world = &w;
        in.truth_ego = &ego;
        const world::Control u = agent.step(in);
        if (!u.finite()) {
            throw NumericError("episode: agent returned non-finite control at step " +
                               std::to_string(step));
        }

        const world::EgoState prev = ego;
        ego = world::step_dynamics(ego, u, sim.dt, sim.dynamics);
        monitor.update(prev, ego, (step + 1) * sim.dt, step, sim.ego_length, sim.ego_width,
                       rep.infractions);

        const auto proj = w.route.centerline.project({ego.x, ego.y});
        rep.ldev_trace.push_back(proj.lateral);
        rep.attacked_trace.push_back(attacked);
        rep.steps = step + 1;
        rep.sim_seconds = (step + 1) * sim.dt;

        const double step_arc = std::hypot(ego.x - prev.x, ego.y - prev.y);
        driven += step_arc;
        if (std::abs(proj.lateral) >= outside_lat) driven_outside += step_arc;

        if (proj.distance > sim.off_route_m) {
            rep.tests.in_route = world::TestResult::failure;
            rep.ended = "off_route";
            break;  // progress stays frozen at the furthest on-route projection
        }
        progress = std::max(progress, proj.arc_s);

        if (ego.speed < 0.1) {
            blocked_time += sim.dt;
            if (blocked_time > sim.blocked_timeout_s) {
                rep.tests.blocked = world::TestResult::failure;
                rep.ended = "blocked";
                break;
            }
        } else {
            blocked_time = 0.0;
        }

        if (progress >= total - 1e-9) {
            rep.ended = "completed";
            break;
        }
    }

    rep.R = world::route_completion(std::min(progress, total), w.route);
    rep.P = world::infraction_penalty(rep.infractions);
    rep.DS = rep.R * rep.P;
    rep.outside_lane_pct = driven > 0.0 ? 100.0 * driven_outside / driven : 0.0;
    return rep;
}

}  // namespace ad2::episode
