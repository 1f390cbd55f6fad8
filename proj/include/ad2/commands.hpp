#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ad2/baselines.hpp"
#include "ad2/datakit.hpp"
#include "ad2/detector.hpp"
#include "ad2/methods.hpp"
#include "ad2/runconfig.hpp"
#include "ad2/svg.hpp"

namespace ad2::cli {

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("short write to '" + path + "'");
}

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline world::EpisodeReport run_one(const RunConfig& cfg, const std::string& out_dir,
                                    bool write_outputs) {
    const world::World w = routes::build_world(cfg.route);
    episode::SimConfig sim = cfg.sim;
    if (cfg.dump_frames && write_outputs) {
        sim.dump_dir = out_dir + "/frames";
        std::filesystem::create_directories(sim.dump_dir);
    }
    auto agent = pilot::make_pilot(cfg.pilot_kind, cfg.pilot_cfg, sim.rig);
    const auto rep = episode::run_episode(w, *agent, cfg.attack, sim, cfg.seed);
    if (write_outputs) {
        detail::write_text(out_dir + "/report.json", world::report_to_json(rep).dump(2) + "\n");
        detail::write_text(out_dir + "/ldev.csv", world::ldev_csv(rep, sim.dt));
        if (cfg.plot) detail::write_text(out_dir + "/ldev.svg", svg::ldev_plot(rep, sim.dt));
    }
    return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    detail::run_one(cfg, out_dir, true);
    return 0;  // a completed episode is success even when its tests failed
}

// ---------------------------------------------------------------------------
// sweep over d / epsilon / severity
// ---------------------------------------------------------------------------

inline int cmd_sweep(const RunConfig& base, const std::string& axis_spec,
                     const std::string& out_dir) {
    const auto eq = axis_spec.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("sweep axis must be axis=v1,v2,... (e.g. d=1,4,11), got \"" + axis_spec + "\"");
    }
    const std::string axis = axis_spec.substr(0, eq);
    std::vector<std::string> values;
    {
        std::string rest = axis_spec.substr(eq + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto comma = rest.find(',', pos);
            values.push_back(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (values.empty()) throw ConfigError("sweep: no axis values given");
    if (!base.attack) throw ConfigError("sweep: config must include an attack section");
    if (axis == "epsilon" && base.attack->kind != attacks::AttackKind::snal) {
        throw ConfigError("sweep: epsilon axis requires attack.kind = snal");
    }
    if (axis == "severity" && base.attack->kind != attacks::AttackKind::esia) {
        throw ConfigError("sweep: severity axis requires attack.kind = esia");
    }
    if (axis != "d" && axis != "epsilon" && axis != "severity") {
        throw ConfigError("sweep: axis must be d, epsilon or severity");
    }

    std::filesystem::create_directories(out_dir);
    std::string summary = "axis_value,DS,P,R,ldev_mean,ldev_std\n";
    for (const auto& value : values) {
        RunConfig cfg = base;
        if (axis == "d") {
            cfg.attack->interval_d = std::stoi(value);
        } else if (axis == "epsilon") {
            cfg.attack->snal.epsilon = std::stoi(value);
        } else {
            cfg.attack->esia.severity = attacks::severity_from_name(value);
        }
        cfg.attack->validate();
        const std::string sub = out_dir + "/" + axis + "=" + value;
        std::filesystem::create_directories(sub);
        const auto rep = detail::run_one(cfg, sub, true);

        double sum = 0.0, sum2 = 0.0;
        for (double d : rep.ldev_trace) {
            sum += std::abs(d);
            sum2 += d * d;
        }
        const double n = rep.ldev_trace.empty() ? 1.0 : static_cast<double>(rep.ldev_trace.size());
        const double mean_abs = sum / n;
        const double stddev = std::sqrt(std::max(0.0, sum2 / n - mean_abs * mean_abs));
        summary += value + "," + detail::fmt(rep.DS) + "," + detail::fmt(rep.P) + "," +
                   detail::fmt(rep.R) + "," + detail::fmt(mean_abs) + "," + detail::fmt(stddev) + "\n";
    }
    detail::write_text(out_dir + "/summary.csv", summary);
    return 0;
}

// ---------------------------------------------------------------------------
// gen-dataset
// ---------------------------------------------------------------------------

inline datakit::SplitPair generate_dataset(const RunConfig& cfg, const std::string& out_dir,
                                           bool persist) {
    const int offset = static_cast<int>(std::lround(cfg.dataset.record_hz * cfg.dataset.pair_interval_s));
    auto record_family = [&](routes::Family family, int needed) {
        std::vector<datakit::RecordedRun> runs;
        long candidates = 0;
        episode::SimConfig sim = cfg.sim;
        sim.dt = 1.0 / cfg.dataset.record_hz;
        sim.timeout_s = cfg.dataset_episode_s;
        sim.blocked_timeout_s = std::min(cfg.sim.blocked_timeout_s, 20.0);
        for (int i = 0; candidates < needed; ++i) {
            if (i > 512) throw Error("gen-dataset: recording did not reach the requested pair count");
            routes::RouteParams rp = cfg.route;
            rp.family = family;
            rp.seed = static_cast<std::uint64_t>(i + 1);
            const world::World w = routes::build_world(rp);
            auto agent = pilot::make_pilot(cfg.pilot_kind, cfg.pilot_cfg, sim.rig);
            runs.push_back(datakit::record_run(w, *agent, sim,
                                               mix_seed(cfg.seed, static_cast<std::uint64_t>(i),
                                                        family == routes::Family::train ? 1 : 2)));
            const long steps = static_cast<long>(runs.back().steps.size());
            candidates += steps >= offset ? (steps - offset) / offset + 0 : 0;
            if (persist && cfg.keep_archives) {
                datakit::save_archive(runs.back(), out_dir + "/archives/" + runs.back().route_id);
            }
        }
        return runs;
    };

    const auto train_runs = record_family(routes::Family::train, cfg.dataset.train_total);
    const auto test_runs = record_family(routes::Family::test, cfg.dataset.test_total);
    auto split = datakit::build_dataset(train_runs, test_runs, cfg.dataset, cfg.seed);

    if (persist) {
        const std::string dir = out_dir + "/" + cfg.dataset_dir;
        datakit::save_split(split.train, dir, "train");
        datakit::save_split(split.test, dir, "test");
        ordered_json info;
        info["seed"] = cfg.seed;
        info["train_total"] = split.train.size();
        info["test_total"] = split.test.size();
        const auto tc = dataset::class_counts(split.train);
        const auto sc = dataset::class_counts(split.test);
        info["train_counts"] = tc;
        info["test_counts"] = sc;
        info["record_hz"] = cfg.dataset.record_hz;
        info["pair_interval_s"] = cfg.dataset.pair_interval_s;
        detail::write_text(dir + "/dataset.json", info.dump(2) + "\n");
    }
    return split;
}

inline int cmd_gen_dataset(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    generate_dataset(cfg, out_dir, true);
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string data_dir = out_dir + "/" + cfg.dataset_dir;
    const dataset::Dataset train_set = datakit::load_split(data_dir, "train");

    if (cfg.train_method == "ad2") {
        detector::TrainConfig tc;
        tc.epochs = cfg.train_epochs;
        tc.batch = cfg.train_batch;
        tc.lr = cfg.train_lr;
        tc.seed = cfg.seed;
        auto [model, hist] = detector::train(train_set, tc);
        model.save(out_dir + "/" + cfg.model_name + ".bin");
        ordered_json h;
        h["epoch_loss"] = hist.epoch_loss;
        h["epoch_accuracy"] = hist.epoch_accuracy;
        h["loss_monotone"] = hist.loss_monotone;
        h["param_count"] = model.param_count();
        h["checksum"] = model.params.checksum();
        detail::write_text(out_dir + "/history.json", h.dump(2) + "\n");
    } else {
        baselines::DiffNetConfig dc;
        dc.epochs = cfg.diffnet_epochs;
        dc.batch = cfg.train_batch;
        dc.lr = cfg.train_lr;
        dc.seed = cfg.seed;
        dc.input_w = train_set[0].curr[0].width;
        dc.input_h = train_set[0].curr[0].height;
        baselines::DiffNetModel model = baselines::DiffNetModel::make(dc);
        model.train(train_set);
        model.params.save(out_dir + "/" + cfg.model_name + "_diffnet.bin");
        ordered_json side;
        side["input_dims"] = {dc.input_w, dc.input_h};
        side["k"] = dc.k;
        side["pool"] = dc.pool;
        detail::write_text(out_dir + "/" + cfg.model_name + "_diffnet.bin.json", side.dump(2) + "\n");
        ordered_json h;
        h["param_count"] = model.param_count();
        h["checksum"] = model.params.checksum();
        detail::write_text(out_dir + "/history.json", h.dump(2) + "\n");
    }
    return 0;
}

inline baselines::DiffNetModel load_diffnet(const std::string& path_bin) {
    std::ifstream side_in(path_bin + ".json");
    if (!side_in) throw IoError("diffnet: missing sidecar '" + path_bin + ".json'");
    const json side = json::parse(side_in);
    baselines::DiffNetConfig dc;
    const auto dims = side.at("input_dims").get<std::vector<int>>();
    dc.input_w = dims.at(0);
    dc.input_h = dims.at(1);
    dc.k = side.value("k", 1);
    dc.pool = side.value("pool", 2);
    baselines::DiffNetModel model = baselines::DiffNetModel::make(dc);
    model.params = nn::ParamStore::load(path_bin);
    return model;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline int cmd_eval(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string data_dir = out_dir + "/" + cfg.dataset_dir;
    const dataset::Dataset train_set = datakit::load_split(data_dir, "train");
    const dataset::Dataset test_set = datakit::load_split(data_dir, "test");

    std::string csv =
        "method,accuracy,auc_benign,auc_polt,auc_snal,auc_esia,"
        "tpr_benign,tpr_polt,tpr_snal,tpr_esia,fpr_benign,fpr_polt,fpr_snal,fpr_esia\n";

    std::optional<detector::Ad2Model> ad2_model;
    std::optional<baselines::DiffNetModel> diffnet_model;
    std::optional<baselines::Lap4Model> lap4_model;
    std::optional<baselines::KpcaModel> cop_model;
    std::optional<baselines::KpcaModel> corp_model;

    for (const auto& name : cfg.eval_methods) {
        std::unique_ptr<datakit::Method> method;
        if (name == "ad2") {
            const std::string path = cfg.ad2_model_path.empty() ? out_dir + "/" + cfg.model_name + ".bin"
                                                                : cfg.ad2_model_path;
            ad2_model = detector::Ad2Model::load(path);
            method = std::make_unique<methods::Ad2Method>(*ad2_model);
        } else if (name == "diffnet") {
            const std::string path = cfg.diffnet_model_path.empty()
                                         ? out_dir + "/" + cfg.model_name + "_diffnet.bin"
                                         : cfg.diffnet_model_path;
            diffnet_model = load_diffnet(path);
            method = std::make_unique<methods::DiffNetMethod>(*diffnet_model);
        } else if (name == "lap4") {
            lap4_model = baselines::Lap4Model::fit(train_set);
            method = std::make_unique<methods::Lap4Method>(*lap4_model);
        } else if (name == "cop") {
            cop_model = baselines::KpcaModel::fit(train_set, baselines::KpcaVariant::cop,
                                                  cfg.kpca_q, cfg.seed, cfg.rff_m, cfg.rff_gamma);
            method = std::make_unique<methods::KpcaMethod>(*cop_model);
        } else {
            corp_model = baselines::KpcaModel::fit(train_set, baselines::KpcaVariant::corp,
                                                   cfg.kpca_q, cfg.seed, cfg.rff_m, cfg.rff_gamma);
            method = std::make_unique<methods::KpcaMethod>(*corp_model);
        }
        const auto rep = datakit::evaluate(*method, test_set);
        detail::write_text(out_dir + "/eval_" + name + ".json",
                           datakit::eval_report_to_json(rep).dump(2) + "\n");
        csv += name + "," + detail::fmt(rep.accuracy);
        for (int c = 0; c < 4; ++c) csv += "," + detail::fmt(rep.auc[static_cast<std::size_t>(c)]);
        for (int c = 0; c < 4; ++c) csv += "," + detail::fmt(rep.tpr[static_cast<std::size_t>(c)]);
        for (int c = 0; c < 4; ++c) csv += "," + detail::fmt(rep.fpr[static_cast<std::size_t>(c)]);
        csv += "\n";
    }
    detail::write_text(out_dir + "/eval.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

inline int cmd_bench(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string data_dir = out_dir + "/" + cfg.dataset_dir;
    dataset::Dataset test_set = datakit::load_split(data_dir, "test");
    if (static_cast<int>(test_set.size()) > cfg.bench_count) {
        test_set.resize(static_cast<std::size_t>(cfg.bench_count));
    }

    const std::string ad2_path =
        cfg.ad2_model_path.empty() ? out_dir + "/" + cfg.model_name + ".bin" : cfg.ad2_model_path;
    detector::Ad2Model ad2_model = detector::Ad2Model::load(ad2_path);
    methods::Ad2Method ad2_method(ad2_model);

    const std::string dn_path = cfg.diffnet_model_path.empty()
                                    ? out_dir + "/" + cfg.model_name + "_diffnet.bin"
                                    : cfg.diffnet_model_path;
    baselines::DiffNetModel diffnet_model = load_diffnet(dn_path);
    methods::DiffNetMethod diffnet_method(diffnet_model);

    std::string csv = "method,median_ms,params\n";
    const double ad2_ms = datakit::bench(ad2_method, test_set, cfg.bench_repeats);
    csv += "ad2," + detail::fmt(ad2_ms) + "," + std::to_string(ad2_model.param_count()) + "\n";
    const double dn_ms = datakit::bench(diffnet_method, test_set, cfg.bench_repeats);
    csv += "diffnet," + detail::fmt(dn_ms) + "," + std::to_string(diffnet_model.param_count()) + "\n";
    detail::write_text(out_dir + "/bench.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// entry point shared by the binary and the tests
// ---------------------------------------------------------------------------

inline int run_command(const std::string& command, json config_doc, std::string out_dir,
                       const std::vector<std::string>& overrides, const std::string& axis = "") {
    try {
        if (const char* env_out = std::getenv("OUT_DIR"); env_out && out_dir.empty()) {
            out_dir = env_out;
        }
        if (out_dir.empty()) throw ConfigError("output directory required (--out or OUT_DIR)");
        for (const auto& ov : overrides) apply_override(config_doc, ov);
        if (const char* env_seed = std::getenv("SEED"); env_seed && !config_doc.contains("seed")) {
            config_doc["seed"] = std::strtoull(env_seed, nullptr, 10);
        }
        const RunConfig cfg = parse_config(config_doc);

        if (command == "simulate") return cmd_simulate(cfg, out_dir);
        if (command == "sweep") return cmd_sweep(cfg, axis, out_dir);
        if (command == "gen-dataset") return cmd_gen_dataset(cfg, out_dir);
        if (command == "train") return cmd_train(cfg, out_dir);
        if (command == "eval") return cmd_eval(cfg, out_dir);
        if (command == "bench") return cmd_bench(cfg, out_dir);
        throw ConfigError("unknown command \"" + command + "\"");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace ad2::cli
