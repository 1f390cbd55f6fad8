// Scratch harness for closed-loop tuning; not part of the installed tooling.
#include <cstdio>
#include <optional>

#include "ad2/episode.hpp"
#include "ad2/pilot.hpp"
#include "ad2/routes.hpp"

using namespace ad2;

namespace {

struct TracingPilot : pilot::Agent {
    pilot::ReferencePilot inner;
    const world::World* w;
    explicit TracingPilot(const render::CameraRig& rig, const world::World* ww)
        : inner(pilot::PilotConfig{}, rig), w(ww) {}
    world::Control step(const pilot::StepInputs& in) override {
        const auto u = inner.step(in);
        if (in.step % 10 == 0 || (in.truth_ego && in.truth_ego->speed < 0.3 && in.step > 50)) {
            const auto p = inner.perceive(*in.frames);
            const auto proj = w->route.centerline.project({in.truth_ego->x, in.truth_ego->y});
            std::printf(
                "step %5ld t=%6.2f arc=%7.2f speed=%5.2f ldev=%+6.3f off_est=%+6.3f hdg=%+6.3f "
                "prox=%4.2f deg=%d stopd=%6.2f steer=%+5.2f thr=%4.2f brk=%3.1f\n",
                in.step, in.t, proj.arc_s, in.truth_ego->speed, proj.lateral, p.lane_offset_est,
                p.heading_err_est, p.obstacle_proximity, p.degraded ? 1 : 0,
                inner.stop_marker_distance(*in.frames), u.steer, u.throttle, u.brake);
        }
        return u;
    }
    const char* name() const override { return "tracing"; }
};

}  // namespace

int main(int argc, char** argv) {
    routes::RouteParams rp;
    rp.family = (argc > 1 && std::string(argv[1]) == "train") ? routes::Family::train
                                                              : routes::Family::test;
    rp.seed = rp.family == routes::Family::train ? 1 : 2;
    const world::World w = routes::build_world(rp);
    std::printf("route %s len=%.1f signal@%.1f stop@%.1f\n", w.route.id.c_str(),
                w.route.total_length(), w.route.signals[0].arc_s, w.route.stop_signs[0].arc_s);

    episode::SimConfig sim;
    sim.blocked_timeout_s = 20.0;
    sim.timeout_s = 200.0;

    TracingPilot agent(sim.rig, &w);
    std::optional<attacks::AttackConfig> atk;
    if (argc > 2) {
        attacks::AttackConfig a;
        a.kind = attacks::kind_from_name(argv[2]);
        a.interval_d = argc > 3 ? std::atoi(argv[3]) : 1;
        a.seed = 100;
        atk = a;
    }
    const auto rep = episode::run_episode(w, agent, atk, sim, 7);
    std::printf("ended=%s R=%.3f P=%.3f DS=%.3f steps=%ld infractions=%zu\n", rep.ended.c_str(),
                rep.R, rep.P, rep.DS, rep.steps, rep.infractions.size());
    for (const auto& rec : rep.infractions) {
        std::printf("  infraction %s at step %ld (%.1f, %.1f)\n",
                    world::infraction_name(rec.kind), rec.timestep, rec.location.x,
                    rec.location.y);
    }
    return 0;
}
