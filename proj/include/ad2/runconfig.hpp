#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ad2/attacks.hpp"
#include "ad2/datakit.hpp"
#include "ad2/episode.hpp"
#include "ad2/json_util.hpp"
#include "ad2/pilot.hpp"
#include "ad2/routes.hpp"

namespace ad2::cli {

// Fully-resolved run configuration. Every field has a documented default;
// unknown keys anywhere in the document are rejected with all offenders named.
struct RunConfig {
    std::uint64_t seed = 7;

    routes::RouteParams route;
    std::string pilot_kind = "reference";
    pilot::PilotConfig pilot_cfg;
    std::optional<attacks::AttackConfig> attack;
    episode::SimConfig sim;
    bool plot = true;
    bool dump_frames = false;

    // dataset section
    datakit::DatasetSpec dataset;
    int dataset_episode_s = 70;       // recording episode budget per run
    bool keep_archives = false;
    std::string dataset_dir = "dataset";

    // train section
    std::string train_method = "ad2";
    int train_epochs = 16;
    int train_batch = 16;
    double train_lr = 1.5e-3;
    int diffnet_epochs = 2;
    std::string model_name = "model";

    // eval section
    std::vector<std::string> eval_methods = {"ad2", "diffnet", "lap4", "cop", "corp"};
    std::string ad2_model_path;
    std::string diffnet_model_path;
    int kpca_q = 12;
    int rff_m = 256;
    double rff_gamma = 1.0;
    int bench_repeats = 5;
    int bench_count = 100;
};

namespace detail {

inline void parse_route(const json& j, RunConfig& cfg) {
    check_keys(j, {"family", "seed", "length_m", "lane_width"}, "route");
    cfg.route.family = routes::family_from_name(json_get<std::string>(j, "family", "test"));
    cfg.route.seed = json_get<std::uint64_t>(j, "seed", cfg.route.family == routes::Family::train ? 1 : 2);
    cfg.route.length_m = json_get<double>(j, "length_m", 300.0);
    cfg.route.lane_width = json_get<double>(j, "lane_width", 3.5);
    if (cfg.route.length_m < 120.0) throw ConfigError("route.length_m must be >= 120");
    if (cfg.route.lane_width <= 1.8) throw ConfigError("route.lane_width must exceed the vehicle width");
}

inline void parse_pilot(const json& j, RunConfig& cfg) {
    check_keys(j,
               {"kind", "target_speed", "kp", "kd", "speed_gain", "brake_threshold", "color_tol",
                "hold_steps", "steer_decay", "stop_cooldown_s", "stop_margin_m"},
               "pilot");
    cfg.pilot_kind = json_get<std::string>(j, "kind", "reference");
    if (cfg.pilot_kind != "reference" && cfg.pilot_kind != "oracle") {
        throw ConfigError("pilot.kind must be \"reference\" or \"oracle\"");
    }
    auto& p = cfg.pilot_cfg;
    p.target_speed = json_get<double>(j, "target_speed", p.target_speed);
    p.kp = json_get<double>(j, "kp", p.kp);
    p.kd = json_get<double>(j, "kd", p.kd);
    p.speed_gain = json_get<double>(j, "speed_gain", p.speed_gain);
    p.brake_threshold = json_get<double>(j, "brake_threshold", p.brake_threshold);
    p.color_tol = json_get<double>(j, "color_tol", p.color_tol);
    p.hold_steps = json_get<int>(j, "hold_steps", p.hold_steps);
    p.steer_decay = json_get<double>(j, "steer_decay", p.steer_decay);
    p.stop_cooldown_s = json_get<double>(j, "stop_cooldown_s", p.stop_cooldown_s);
    p.stop_margin_m = json_get<double>(j, "stop_margin_m", p.stop_margin_m);
    if (p.kp < 0 || p.kd < 0) throw ConfigError("pilot gains must be >= 0");
    if (p.target_speed <= 0) throw ConfigError("pilot.target_speed must be > 0");
}

inline void parse_sim(const json& j, RunConfig& cfg) {
    check_keys(j,
               {"dt", "blocked_timeout_s", "timeout_s", "off_route_m", "image_width",
                "image_height", "plot", "dump_frames"},
               "sim");
    auto& s = cfg.sim;
    s.dt = json_get<double>(j, "dt", s.dt);
    if (!(s.dt > 0.0 && s.dt <= 0.1)) throw ConfigError("sim.dt must be in (0, 0.1]");
    s.blocked_timeout_s = json_get<double>(j, "blocked_timeout_s", s.blocked_timeout_s);
    s.timeout_s = json_get<double>(j, "timeout_s", s.timeout_s);
    s.off_route_m = json_get<double>(j, "off_route_m", s.off_route_m);
    const int w = json_get<int>(j, "image_width", 96);
    const int h = json_get<int>(j, "image_height", 64);
    s.rig = render::default_rig(w, h);
    cfg.plot = json_get<bool>(j, "plot", cfg.plot);
    cfg.dump_frames = json_get<bool>(j, "dump_frames", cfg.dump_frames);
}

inline void parse_dataset(const json& j, RunConfig& cfg) {
    check_keys(j,
               {"train_total", "test_total", "record_hz", "pair_interval_s", "episode_s",
                "keep_archives", "dir", "snal_epsilon", "esia_severity"},
               "dataset");
    auto& d = cfg.dataset;
    d.train_total = json_get<int>(j, "train_total", d.train_total);
    d.test_total = json_get<int>(j, "test_total", d.test_total);
    d.record_hz = json_get<int>(j, "record_hz", d.record_hz);
    d.pair_interval_s = json_get<double>(j, "pair_interval_s", d.pair_interval_s);
    d.snal.epsilon = json_get<int>(j, "snal_epsilon", d.snal.epsilon);
    if (j.contains("esia_severity")) {
        d.esia.severity = attacks::severity_from_name(j.at("esia_severity").get<std::string>());
    }
    cfg.dataset_episode_s = json_get<int>(j, "episode_s", cfg.dataset_episode_s);
    cfg.keep_archives = json_get<bool>(j, "keep_archives", cfg.keep_archives);
    cfg.dataset_dir = json_get<std::string>(j, "dir", cfg.dataset_dir);
    if (d.train_total < 5 || d.test_total < 5) throw ConfigError("dataset totals must be >= 5");
}

inline void parse_train(const json& j, RunConfig& cfg) {
    check_keys(j, {"method", "epochs", "batch", "lr", "diffnet_epochs", "model_name"}, "train");
    cfg.train_method = json_get<std::string>(j, "method", cfg.train_method);
    if (cfg.train_method != "ad2" && cfg.train_method != "diffnet") {
        throw ConfigError("train.method must be \"ad2\" or \"diffnet\"");
    }
    cfg.train_epochs = json_get<int>(j, "epochs", cfg.train_epochs);
    cfg.train_batch = json_get<int>(j, "batch", cfg.train_batch);
    cfg.train_lr = json_get<double>(j, "lr", cfg.train_lr);
    cfg.diffnet_epochs = json_get<int>(j, "diffnet_epochs", cfg.diffnet_epochs);
    cfg.model_name = json_get<std::string>(j, "model_name", cfg.model_name);
    if (cfg.train_epochs < 1 || cfg.train_batch < 1) throw ConfigError("train.epochs and train.batch must be >= 1");
}

inline void parse_eval(const json& j, RunConfig& cfg) {
    check_keys(j,
               {"methods", "ad2_model", "diffnet_model", "kpca_q", "rff_m", "rff_gamma",
                "bench_repeats", "bench_count"},
               "eval");
    if (j.contains("methods")) cfg.eval_methods = j.at("methods").get<std::vector<std::string>>();
    for (const auto& m : cfg.eval_methods) {
        if (m != "ad2" && m != "diffnet" && m != "lap4" && m != "cop" && m != "corp") {
            throw ConfigError("eval.methods: unknown method \"" + m + "\"");
        }
    }
    cfg.ad2_model_path = json_get<std::string>(j, "ad2_model", cfg.ad2_model_path);
    cfg.diffnet_model_path = json_get<std::string>(j, "diffnet_model", cfg.diffnet_model_path);
    cfg.kpca_q = json_get<int>(j, "kpca_q", cfg.kpca_q);
    cfg.rff_m = json_get<int>(j, "rff_m", cfg.rff_m);
    cfg.rff_gamma = json_get<double>(j, "rff_gamma", cfg.rff_gamma);
    cfg.bench_repeats = json_get<int>(j, "bench_repeats", cfg.bench_repeats);
    cfg.bench_count = json_get<int>(j, "bench_count", cfg.bench_count);
}

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
    check_keys(doc, {"seed", "route", "pilot", "attack", "sim", "dataset", "train", "eval"},
               "config");
    RunConfig cfg;
    cfg.seed = json_get<std::uint64_t>(doc, "seed", cfg.seed);
    if (doc.contains("route")) detail::parse_route(doc.at("route"), cfg);
    if (doc.contains("pilot")) detail::parse_pilot(doc.at("pilot"), cfg);
    if (doc.contains("sim")) detail::parse_sim(doc.at("sim"), cfg);
    if (doc.contains("attack") && !doc.at("attack").is_null()) {
        cfg.attack = attacks::attack_from_json(doc.at("attack"));
    }
    if (doc.contains("dataset")) detail::parse_dataset(doc.at("dataset"), cfg);
    if (doc.contains("train")) detail::parse_train(doc.at("train"), cfg);
    if (doc.contains("eval")) detail::parse_eval(doc.at("eval"), cfg);

    // the attack schedule seed defaults to the run seed unless set explicitly
    if (cfg.attack && cfg.attack->seed == 0) cfg.attack->seed = cfg.seed;
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

// dotted-path override, e.g. "attack.interval_d=4"
inline void apply_override(json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: \"" + spec + "\"");
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // plain string
    }
    json* cur = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("override path has an empty segment: \"" + path + "\"");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            break;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

}  // namespace ad2::cli
