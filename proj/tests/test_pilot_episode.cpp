#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>

#include "ad2/episode.hpp"
#include "ad2/pilot.hpp"
#include "ad2/routes.hpp"

using namespace ad2;
using episode::SimConfig;
using imaging::Frame;
using pilot::Percepts;
using pilot::PilotConfig;
using pilot::ReferencePilot;
using world::EpisodeReport;
using world::World;

namespace {

SimConfig ci_sim() {
    SimConfig sim;
    sim.blocked_timeout_s = 20.0;  // CI override of the 180 s default
    sim.timeout_s = 200.0;
    return sim;
}

EpisodeReport run(const World& w, const std::string& pilot_kind,
                  const std::optional<attacks::AttackConfig>& attack, std::uint64_t seed) {
    const SimConfig sim = ci_sim();
    auto agent = pilot::make_pilot(pilot_kind, PilotConfig{}, sim.rig);
    return episode::run_episode(w, *agent, attack, sim, seed);
}

double mean_abs(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s / static_cast<double>(v.size());
}

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

}  // namespace

TEST_CASE("act: nominal, sign convention and saturation") {
    const auto rig = render::default_rig();
    ReferencePilot p(PilotConfig{}, rig);

    Percepts straight;  // offset 0, no obstacle, slow
    const auto u0 = p.act(straight, 2.0);
    REQUIRE(u0.steer == Approx(0.0));
    REQUIRE(u0.throttle > 0.0);
    REQUIRE(u0.brake == 0.0);

    Percepts left;  // ego left of centre -> steer right (negative)
    left.lane_offset_est = 1.0;
    REQUIRE(p.act(left, 2.0).steer < 0.0);

    Percepts danger;
    danger.obstacle_ahead = true;
    danger.obstacle_proximity = 1.0;
    const auto ub = p.act(danger, 5.0);
    REQUIRE(ub.brake == 1.0);
    REQUIRE(ub.throttle == 0.0);
}

TEST_CASE("act: steering is monotone in lane offset and always bounded") {
    const auto rig = render::default_rig();
    ReferencePilot p(PilotConfig{}, rig);
    double prev_steer = 2.0;
    for (double off = -8.0; off <= 8.0; off += 0.25) {
        Percepts pc;
        pc.lane_offset_est = off;
        const auto u = p.act(pc, 4.0);
        REQUIRE(u.steer <= 1.0);
        REQUIRE(u.steer >= -1.0);
        REQUIRE(u.steer <= prev_steer + 1e-12);
        prev_steer = u.steer;
    }
}

TEST_CASE("act rejects non-finite percepts") {
    const auto rig = render::default_rig();
    ReferencePilot p(PilotConfig{}, rig);
    Percepts bad;
    bad.lane_offset_est = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(p.act(bad, 3.0), NumericError);
}

TEST_CASE("perceive: on-centreline offset estimate is small; degenerate input is safe") {
    World w;
    w.route.id = "straight";
    w.route.centerline = geom::Polyline({{0, 0}, {150, 0}, {300, 0}});
    w.route.lane_width = 3.5;

    const auto rig = render::default_rig();
    ReferencePilot p(PilotConfig{}, rig);

    world::EgoState ego;
    ego.x = 20.0;
    const auto frames = render::render_rig(w, 0.0, ego, rig);
    const Percepts pc = p.perceive(frames);
    REQUIRE_FALSE(pc.degraded);
    REQUIRE(std::abs(pc.lane_offset_est) <= 0.2);

    // large vehicle dead ahead at 8 m
    World wob = w;
    world::Obstacle ob;
    ob.kind = world::ObstacleKind::vehicle;
    ob.pos = {ego.x + 8.0, 0.0};
    ob.length = 4.4;
    ob.width = 1.8;
    wob.obstacles.push_back(ob);
    const Percepts pob = p.perceive(render::render_rig(wob, 0.0, ego, rig));
    REQUIRE(pob.obstacle_ahead);
    REQUIRE(pob.obstacle_proximity > 0.5);

    // all-black frames: degraded, offset zero, no crash
    std::array<Frame, 3> black = {Frame(96, 64), Frame(96, 64), Frame(96, 64)};
    const Percepts pd = p.perceive(black);
    REQUIRE(pd.degraded);
    REQUIRE(pd.lane_offset_est == 0.0);
}

TEST_CASE("benign closed loop completes cleanly on both bundled families") {
    for (auto family : {routes::Family::train, routes::Family::test}) {
        routes::RouteParams rp;
        rp.family = family;
        rp.seed = family == routes::Family::train ? 1 : 2;
        const World w = routes::build_world(rp);

        const EpisodeReport rep = run(w, "reference", std::nullopt, 7);
        CAPTURE(w.route.id, rep.ended, rep.R, rep.P, rep.DS, rep.steps);
        REQUIRE(rep.ended == "completed");
        REQUIRE(rep.R == Approx(100.0));
        REQUIRE(rep.P == Approx(1.0));
        REQUIRE(rep.DS >= 90.0);
        REQUIRE(rep.infractions.empty());
        REQUIRE(rep.tests.in_route == world::TestResult::success);
        REQUIRE(rep.tests.blocked == world::TestResult::success);
        REQUIRE(rep.tests.timeout == world::TestResult::success);

        double worst = 0.0;
        for (double d : rep.ldev_trace) worst = std::max(worst, std::abs(d));
        REQUIRE(worst < w.route.lane_width / 2.0);
        REQUIRE(rep.outside_lane_pct == 0.0);
    }
}

TEST_CASE("oracle pilot also completes the bundled test route") {
    routes::RouteParams rp;
    const World w = routes::build_world(rp);
    const EpisodeReport rep = run(w, "oracle", std::nullopt, 7);
    CAPTURE(rep.ended, rep.R, rep.DS);
    REQUIRE(rep.ended == "completed");
    REQUIRE(rep.DS >= 90.0);
    REQUIRE(rep.infractions.empty());
}

TEST_CASE("an always-left-steering agent fails the in-route test with frozen R") {
    struct AlwaysLeft : pilot::Agent {
        // moderate steer: a wide enough circle to drift past the 30 m fence
        world::Control step(const pilot::StepInputs&) override { return {0.18, 1.0, 0.0}; }
        const char* name() const override { return "always-left"; }
    } agent;

    routes::RouteParams rp;
    const World w = routes::build_world(rp);
    const EpisodeReport rep = episode::run_episode(w, agent, std::nullopt, ci_sim(), 7);
    REQUIRE(rep.tests.in_route == world::TestResult::failure);
    REQUIRE(rep.ended == "off_route");
    REQUIRE(rep.R < 20.0);  // never got far along the route
}

TEST_CASE("a NaN-control agent aborts the episode with a diagnostic") {
    struct Broken : pilot::Agent {
        world::Control step(const pilot::StepInputs&) override {
            return {std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
        }
        const char* name() const override { return "broken"; }
    } agent;

    routes::RouteParams rp;
    const World w = routes::build_world(rp);
    REQUIRE_THROWS_AS(episode::run_episode(w, agent, std::nullopt, ci_sim(), 7), NumericError);
}

TEST_CASE("poltergeist d=1 halves the driving score and raises lane deviation") {
    routes::RouteParams rp;  // bundled test route
    const World w = routes::build_world(rp);

    double benign_ds[3], polt_ds[3], benign_ldev[3], polt_ldev[3];
    for (int i = 0; i < 3; ++i) {
        const std::uint64_t seed = 100 + static_cast<std::uint64_t>(i);
        const EpisodeReport base = run(w, "reference", std::nullopt, seed);
        attacks::AttackConfig atk;
        atk.kind = attacks::AttackKind::poltergeist;
        atk.interval_d = 1;
        atk.seed = seed;
        const EpisodeReport hit = run(w, "reference", atk, seed);
        benign_ds[i] = base.DS;
        polt_ds[i] = hit.DS;
        benign_ldev[i] = mean_abs(base.ldev_trace);
        polt_ldev[i] = mean_abs(hit.ldev_trace);
        CAPTURE(i, base.DS, hit.DS, hit.ended, hit.R, hit.P);
    }
    const double b = median3(benign_ds[0], benign_ds[1], benign_ds[2]);
    const double a = median3(polt_ds[0], polt_ds[1], polt_ds[2]);
    CAPTURE(b, a);
    REQUIRE(a <= 0.5 * b);
    REQUIRE(median3(polt_ldev[0], polt_ldev[1], polt_ldev[2]) >
            median3(benign_ldev[0], benign_ldev[1], benign_ldev[2]));
}

TEST_CASE("poltergeist driving score is non-decreasing in the attack interval") {
    routes::RouteParams rp;
    const World w = routes::build_world(rp);

    double med[3];
    int di = 0;
    for (int d : {1, 4, 11}) {
        double ds[3];
        for (int i = 0; i < 3; ++i) {
            attacks::AttackConfig atk;
            atk.kind = attacks::AttackKind::poltergeist;
            atk.interval_d = d;
            atk.seed = 200 + static_cast<std::uint64_t>(i);
            ds[i] = run(w, "reference", atk, atk.seed).DS;
        }
        med[di++] = median3(ds[0], ds[1], ds[2]);
    }
    CAPTURE(med[0], med[1], med[2]);
    REQUIRE(med[0] <= med[1] + 1e-9);
    REQUIRE(med[1] <= med[2] + 1e-9);
}

TEST_CASE("episodes are deterministic given (route, agent, attack, seed)") {
    routes::RouteParams rp;
    const World w = routes::build_world(rp);
    attacks::AttackConfig atk;
    atk.kind = attacks::AttackKind::esia;
    atk.esia.severity = attacks::EsiaSeverity::med;
    atk.interval_d = 4;
    atk.seed = 31;

    const EpisodeReport a = run(w, "reference", atk, 31);
    const EpisodeReport b = run(w, "reference", atk, 31);
    REQUIRE(world::report_to_json(a).dump(2) == world::report_to_json(b).dump(2));
    REQUIRE(a.ldev_trace == b.ldev_trace);
}

TEST_CASE("episode report DS identity and outside-lane bounds") {
    routes::RouteParams rp;
    const World w = routes::build_world(rp);
    attacks::AttackConfig atk;
    atk.kind = attacks::AttackKind::snal;
    atk.interval_d = 4;
    atk.seed = 5;
    const EpisodeReport rep = run(w, "reference", atk, 5);
    REQUIRE(rep.DS == Approx(rep.R * rep.P).margin(1e-9));
    REQUIRE(rep.outside_lane_pct >= 0.0);
    REQUIRE(rep.outside_lane_pct <= 100.0);
}
