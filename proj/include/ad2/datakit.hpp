#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ad2/attacks.hpp"
#include "ad2/dataset.hpp"
#include "ad2/episode.hpp"
#include "ad2/errors.hpp"
#include "ad2/json_util.hpp"
#include "ad2/pilot.hpp"
#include "ad2/routes.hpp"

namespace ad2::datakit {

using attacks::AttackConfig;
using attacks::AttackKind;
using dataset::Combo;
using dataset::Dataset;
using dataset::Label;
using dataset::LabeledPair;
using imaging::Frame;

// ---------------------------------------------------------------------------
// Recording: benign episodes archived as per-step camera triples
// ---------------------------------------------------------------------------

struct RecordedRun {
    std::string route_id;
    int record_hz = 20;
    std::uint64_t seed = 0;
    std::vector<std::array<Frame, 3>> steps;
};

inline RecordedRun record_run(const world::World& w, pilot::Agent& agent,
                              const episode::SimConfig& sim, std::uint64_t seed) {
    RecordedRun run;
    run.route_id = w.route.id;
    run.record_hz = static_cast<int>(std::lround(1.0 / sim.dt));
    run.seed = seed;
    episode::run_episode(w, agent, std::nullopt, sim, seed,
                         [&run](long, const std::array<Frame, 3>& frames) {
                             run.steps.push_back(frames);
                         });
    return run;
}

inline void save_archive(const RecordedRun& run, const std::string& dir) {
    std::filesystem::create_directories(dir);
    static const char* cams[3] = {"left", "centre", "right"};
    ordered_json index;
    index["route_id"] = run.route_id;
    index["record_hz"] = run.record_hz;
    index["seed"] = run.seed;
    ordered_json steps = ordered_json::array();
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
        ordered_json entry;
        entry["step"] = t;
        ordered_json paths = ordered_json::array();
        for (int c = 0; c < 3; ++c) {
            const std::string name = std::to_string(t) + "_" + cams[c] + ".ppm";
            imaging::save_ppm(run.steps[t][static_cast<std::size_t>(c)], dir + "/" + name);
            paths.push_back(name);
        }
        entry["paths"] = paths;
        steps.push_back(entry);
    }
    index["steps"] = steps;
    std::ofstream out(dir + "/index.json");
    if (!out) throw IoError("save_archive: cannot write index in '" + dir + "'");
    out << index.dump(2) << "\n";
}

inline RecordedRun load_archive(const std::string& dir) {
    std::ifstream in(dir + "/index.json");
    if (!in) throw IoError("load_archive: missing index in '" + dir + "'");
    const json index = json::parse(in);
    RecordedRun run;
    run.route_id = index.at("route_id").get<std::string>();
    run.record_hz = index.at("record_hz").get<int>();
    run.seed = index.value("seed", std::uint64_t{0});
    for (const auto& entry : index.at("steps")) {
        std::array<Frame, 3> triple;
        const auto paths = entry.at("paths").get<std::vector<std::string>>();
        if (paths.size() != 3) throw DecodeError("load_archive: step needs 3 camera paths");
        for (int c = 0; c < 3; ++c) {
            triple[static_cast<std::size_t>(c)] = imaging::load_ppm(dir + "/" + paths[static_cast<std::size_t>(c)]);
        }
        run.steps.push_back(std::move(triple));
    }
    return run;
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

struct DatasetSpec {
    int train_total = 2000;
    int test_total = 800;
    int record_hz = 20;
    double pair_interval_s = 1.0;  // prev-to-curr gap and sampling stride
    attacks::PoltergeistParams poltergeist;
    attacks::SnalParams snal;
    attacks::EsiaParams esia;
};

namespace detail {

struct Candidate {
    const RecordedRun* run;
    long t;  // curr step index; prev is t - offset
};

inline std::array<Frame, 3> attack_triple(const std::array<Frame, 3>& frames, AttackKind kind,
                                          const DatasetSpec& spec, std::uint64_t event_seed) {
    AttackConfig cfg;
    cfg.kind = kind;
    cfg.interval_d = 1;
    cfg.phase = 0;
    cfg.seed = event_seed;
    cfg.poltergeist = spec.poltergeist;
    cfg.snal = spec.snal;
    cfg.esia = spec.esia;
    return attacks::apply_rig(frames, cfg, 0);
}

}  // namespace detail

// Samples pairs (prev = curr - 1 s) from benign archives, applies attack
// operators per combo, and enforces the 2:1:1:1 class ratio. The label is
// the attack status of the frames at timestep t.
inline Dataset build_split(const std::vector<RecordedRun>& runs, const DatasetSpec& spec,
                           int total, std::uint64_t seed) {
    const int offset = static_cast<int>(std::lround(spec.record_hz * spec.pair_interval_s));
    if (offset < 1) throw ArgumentError("build_dataset: pair interval too small");

    std::vector<detail::Candidate> candidates;
    for (const auto& run : runs) {
        for (long t = offset; t < static_cast<long>(run.steps.size()); t += offset) {
            candidates.push_back({&run, t});
        }
    }
    if (static_cast<int>(candidates.size()) < total) {
        throw ArgumentError("build_dataset: need " + std::to_string(total) +
                            " pairs but archives provide only " +
                            std::to_string(candidates.size()) +
                            " (add recording runs or lower the totals)");
    }

    Rng rng(mix_seed(seed, 0xDA7A));
    for (std::size_t i = candidates.size(); i > 1; --i) {
        std::swap(candidates[i - 1],
                  candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }

    const int k = total / 5;  // each attack class; benign gets the rest (2:1:1:1)
    const int benign_n = total - 3 * k;
    std::array<int, 4> want = {benign_n, k, k, k};

    Dataset out;
    out.reserve(static_cast<std::size_t>(total));
    std::size_t ci = 0;
    static const AttackKind kinds[3] = {AttackKind::poltergeist, AttackKind::snal, AttackKind::esia};
    for (int cls = 0; cls < 4; ++cls) {
        for (int i = 0; i < want[static_cast<std::size_t>(cls)]; ++i, ++ci) {
            const auto& cand = candidates[ci];
            LabeledPair pair;
            pair.label = dataset::label_from_int(cls);
            pair.provenance.route_id = cand.run->route_id;
            pair.provenance.step_t = cand.t;
            pair.prev = cand.run->steps[static_cast<std::size_t>(cand.t - offset)];
            pair.curr = cand.run->steps[static_cast<std::size_t>(cand.t)];

            const std::uint64_t pair_seed = mix_seed(seed, ci, 0xEE);
            if (cls == 0) {
                // benign: even split between (clean,clean) and (attack,clean)
                if (i % 2 == 0) {
                    pair.provenance.combo = Combo::clean_clean;
                } else {
                    pair.provenance.combo = Combo::attack_clean;
                    const AttackKind kind = kinds[i / 2 % 3];
                    pair.prev = detail::attack_triple(pair.prev, kind, spec, mix_seed(pair_seed, 1));
                    pair.provenance.attack_kind = attacks::kind_name(kind);
                }
            } else {
                const AttackKind kind = kinds[cls - 1];
                pair.provenance.attack_kind = attacks::kind_name(kind);
                pair.curr = detail::attack_triple(pair.curr, kind, spec, mix_seed(pair_seed, 2));
                if (i % 2 == 0) {
                    pair.provenance.combo = Combo::clean_attack;
                } else {
                    pair.provenance.combo = Combo::attack_attack;
                    pair.prev = detail::attack_triple(pair.prev, kind, spec, mix_seed(pair_seed, 3));
                }
            }
            out.push_back(std::move(pair));
        }
    }
    // deterministic shuffle so classes are interleaved
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    return out;
}

struct SplitPair {
    Dataset train;
    Dataset test;
};

inline SplitPair build_dataset(const std::vector<RecordedRun>& train_runs,
                               const std::vector<RecordedRun>& test_runs, const DatasetSpec& spec,
                               std::uint64_t seed) {
    for (const auto& r : train_runs) {
        for (const auto& q : test_runs) {
            if (r.route_id == q.route_id) {
                throw ArgumentError("build_dataset: route '" + r.route_id +
                                    "' appears in both splits");
            }
        }
    }
    SplitPair out;
    out.train = build_split(train_runs, spec, spec.train_total, mix_seed(seed, 0x7EA1));
    out.test = build_split(test_runs, spec, spec.test_total, mix_seed(seed, 0x7E57));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset persistence: PPM frames + JSON-lines index
// ---------------------------------------------------------------------------

inline void save_split(const Dataset& ds, const std::string& dir, const std::string& split) {
    std::filesystem::create_directories(dir + "/" + split);
    std::ofstream index(dir + "/" + split + "/index.jsonl");
    if (!index) throw IoError("save_split: cannot write index in '" + dir + "'");
    static const char* cams[3] = {"l", "c", "r"};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const LabeledPair& p = ds[i];
        ordered_json line;
        line["route"] = p.provenance.route_id;
        line["t"] = p.provenance.step_t;
        line["combo"] = dataset::combo_name(p.provenance.combo);
        line["label"] = static_cast<int>(p.label);
        ordered_json prev_paths = ordered_json::array();
        ordered_json curr_paths = ordered_json::array();
        for (int c = 0; c < 3; ++c) {
            const std::string prev_name = std::to_string(i) + "_prev_" + cams[c] + ".ppm";
            const std::string curr_name = std::to_string(i) + "_curr_" + cams[c] + ".ppm";
            imaging::save_ppm(p.prev[static_cast<std::size_t>(c)], dir + "/" + split + "/" + prev_name);
            imaging::save_ppm(p.curr[static_cast<std::size_t>(c)], dir + "/" + split + "/" + curr_name);
            prev_paths.push_back(prev_name);
            curr_paths.push_back(curr_name);
        }
        line["prev_paths"] = prev_paths;
        line["curr_paths"] = curr_paths;
        line["attack_params"] = p.provenance.attack_kind;
        index << line.dump() << "\n";
    }
}

inline Dataset load_split(const std::string& dir, const std::string& split) {
    std::ifstream index(dir + "/" + split + "/index.jsonl");
    if (!index) throw IoError("load_split: missing index in '" + dir + "/" + split + "'");
    Dataset out;
    std::string line;
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        LabeledPair p;
        p.provenance.route_id = j.at("route").get<std::string>();
        p.provenance.step_t = j.at("t").get<long>();
        const std::string combo = j.at("combo").get<std::string>();
        for (int c = 0; c < 4; ++c) {
            if (combo == dataset::combo_name(static_cast<Combo>(c))) p.provenance.combo = static_cast<Combo>(c);
        }
        p.label = dataset::label_from_int(j.at("label").get<int>());
        p.provenance.attack_kind = j.value("attack_params", std::string{});
        const auto prev_paths = j.at("prev_paths").get<std::vector<std::string>>();
        const auto curr_paths = j.at("curr_paths").get<std::vector<std::string>>();
        for (int c = 0; c < 3; ++c) {
            p.prev[static_cast<std::size_t>(c)] = imaging::load_ppm(dir + "/" + split + "/" + prev_paths[static_cast<std::size_t>(c)]);
            p.curr[static_cast<std::size_t>(c)] = imaging::load_ppm(dir + "/" + split + "/" + curr_paths[static_cast<std::size_t>(c)]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// A detector under evaluation: 4-class decision plus per-class ranking
// scores for one-vs-rest ROC curves.
class Method {
public:
    virtual ~Method() = default;
    virtual const char* name() const = 0;
    virtual int classify(const LabeledPair& p) = 0;
    virtual std::array<double, 4> class_scores(const LabeledPair& p) = 0;
    virtual long param_count() const { return 0; }
};

// trapezoidal one-vs-rest AUC with tie handling (ties grouped per threshold)
inline double auc_one_vs_rest(const std::vector<double>& scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size() || scores.empty()) {
        throw ArgumentError("auc: empty or mismatched inputs");
    }
    long P = 0, N = 0;
    for (bool b : positive) (b ? P : N)++;
    if (P == 0 || N == 0) throw ArgumentError("auc: need both positive and negative samples");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double tp = 0, fp = 0;
    double prev_tpr = 0.0, prev_fpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (positive[order[k]] ? tp : fp)++;
        const double tpr = tp / static_cast<double>(P);
        const double fpr = fp / static_cast<double>(N);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
        i = j;
    }
    return area;
}

struct EvalReport {
    std::string method;
    double accuracy = 0.0;
    std::array<double, 4> tpr{};
    std::array<double, 4> fpr{};
    std::array<double, 4> auc{};
    std::array<std::array<long, 4>, 4> confusion{};  // [true][predicted]
    double median_ms = 0.0;
    long params = 0;
};

inline EvalReport evaluate(Method& method, const Dataset& test) {
    if (test.empty()) throw ArgumentError("evaluate: empty test set");
    const auto counts = dataset::class_counts(test);
    for (int c = 0; c < 4; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw ArgumentError(std::string("evaluate: class ") + dataset::label_name(static_cast<Label>(c)) +
                                " missing from the test set");
        }
    }

    EvalReport rep;
    rep.method = method.name();
    rep.params = method.param_count();
    std::array<std::vector<double>, 4> scores;
    std::array<std::vector<bool>, 4> positives;
    long correct = 0;
    for (const auto& p : test) {
        const int truth = static_cast<int>(p.label);
        const int pred = method.classify(p);
        if (pred < 0 || pred > 3) throw ArgumentError("evaluate: method returned bad class");
        rep.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)]++;
        if (pred == truth) ++correct;
        const auto sc = method.class_scores(p);
        for (int c = 0; c < 4; ++c) {
            scores[static_cast<std::size_t>(c)].push_back(sc[static_cast<std::size_t>(c)]);
            positives[static_cast<std::size_t>(c)].push_back(truth == c);
        }
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    for (int c = 0; c < 4; ++c) {
        const long support = counts[static_cast<std::size_t>(c)];
        long predicted_c = 0;
        for (int t = 0; t < 4; ++t) predicted_c += rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
        const long tp = rep.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        rep.tpr[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(support);
        rep.fpr[static_cast<std::size_t>(c)] =
            static_cast<double>(predicted_c - tp) / static_cast<double>(test.size() - support);
        rep.auc[static_cast<std::size_t>(c)] =
            auc_one_vs_rest(scores[static_cast<std::size_t>(c)], positives[static_cast<std::size_t>(c)]);
    }
    return rep;
}

// median per-instance wall-clock milliseconds, warm-up pass excluded
inline double bench(Method& method, const Dataset& test, int repeats) {
    if (test.empty()) throw ArgumentError("bench: empty test set");
    if (repeats < 1) throw ArgumentError("bench: repeats must be >= 1");
    for (const auto& p : test) method.classify(p);  // warm-up
    std::vector<double> per_instance;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& p : test) method.classify(p);
        const auto t1 = std::chrono::steady_clock::now();
        per_instance.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                               static_cast<double>(test.size()));
    }
    std::sort(per_instance.begin(), per_instance.end());
    return per_instance[per_instance.size() / 2];
}

inline ordered_json eval_report_to_json(const EvalReport& rep) {
    ordered_json j;
    j["method"] = rep.method;
    j["accuracy"] = rep.accuracy;
    static const char* cls[4] = {"benign", "poltergeist", "snal", "esia"};
    ordered_json auc, tpr, fpr;
    for (int c = 0; c < 4; ++c) {
        auc[cls[c]] = rep.auc[static_cast<std::size_t>(c)];
        tpr[cls[c]] = rep.tpr[static_cast<std::size_t>(c)];
        fpr[cls[c]] = rep.fpr[static_cast<std::size_t>(c)];
    }
    j["auc"] = auc;
    j["tpr"] = tpr;
    j["fpr"] = fpr;
    ordered_json conf = ordered_json::array();
    for (int t = 0; t < 4; ++t) {
        ordered_json row = ordered_json::array();
        for (int p = 0; p < 4; ++p) row.push_back(rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
        conf.push_back(row);
    }
    j["confusion"] = conf;
    j["median_ms"] = rep.median_ms;
    j["params"] = rep.params;
    return j;
}

}  // namespace ad2::datakit
