#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ad2/autodiff.hpp"
#include "ad2/dataset.hpp"
#include "ad2/errors.hpp"
#include "ad2/imaging.hpp"
#include "ad2/json_util.hpp"
#include "ad2/rng.hpp"

namespace ad2::detector {

using dataset::Dataset;
using dataset::Label;
using dataset::LabeledPair;
using imaging::Frame;
using nn::Graph;
using nn::ParamStore;
using nn::Shape;
using nn::Tensor;

struct Ad2Config {
    int input_w = 96;
    int input_h = 64;
    int pool = 2;               // optional average-pool before the stem
    bool share_backbone = true; // one backbone for all 6 images
    int heads = 4;
    int feat_dim = 64;
    int arch_version = 1;
};

struct Normalization {
    std::array<double, 3> mean = {0.5, 0.5, 0.5};
    std::array<double, 3> std = {0.25, 0.25, 0.25};
};

struct TrainConfig {
    int epochs = 16;   // the benign/snal boundary emerges late (around epoch 10)
    int batch = 16;
    double lr = 1.5e-3;  // cosine-decayed
    std::uint64_t seed = 7;
    // per-class loss weights (benign, poltergeist, snal, esia)
    std::vector<double> class_weights = {1.0, 1.0, 1.0, 1.0};
};

struct TrainHistory {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
    bool loss_monotone = true;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Ad2Model {
public:
    Ad2Config cfg;
    Normalization norm;
    ParamStore params;

    static Ad2Model make(const Ad2Config& cfg, std::uint64_t init_seed) {
        Ad2Model m;
        m.cfg = cfg;
        Rng rng(mix_seed(0xAD2u, init_seed));
        if (cfg.share_backbone) {
            m.add_backbone("backbone.", rng);
        } else {
            for (int i = 0; i < 6; ++i) m.add_backbone("backbone" + std::to_string(i) + ".", rng);
        }
        m.add_attention_block("spatial.", 3, rng);
        m.add_attention_block("temporal.", 2, rng);
        // head: 64 -> 64 -> 4
        auto& f1w = m.params.add("head.fc1.w", {cfg.feat_dim, cfg.feat_dim});
        nn::init_kaiming(f1w, rng, cfg.feat_dim);
        m.params.add("head.fc1.b", {cfg.feat_dim});
        auto& f2w = m.params.add("head.fc2.w", {cfg.feat_dim, dataset::kNumClasses});
        nn::init_kaiming(f2w, rng, cfg.feat_dim);
        m.params.add("head.fc2.b", {dataset::kNumClasses});
        return m;
    }

    long param_count() const { return params.param_count(); }

    // tests use this to stand in for trained weights
    void randomize_all(std::uint64_t seed, double scale = 0.05) {
        Rng rng(seed);
        for (auto& [name, p] : params.all()) {
            for (auto& v : p.value) v = rng.normal() * scale;
        }
    }

    // ---- graph builders ----

    Tensor normalize(const Frame& f) const {
        if (f.width != cfg.input_w || f.height != cfg.input_h) {
            throw ShapeError("detector: frame " + std::to_string(f.width) + "x" +
                             std::to_string(f.height) + " does not match trained input " +
                             std::to_string(cfg.input_w) + "x" + std::to_string(cfg.input_h));
        }
        Tensor t({1, 3, cfg.input_h, cfg.input_w});
        const std::size_t hw = static_cast<std::size_t>(cfg.input_h) * cfg.input_w;
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < hw; ++i) {
                const double raw = f.data[i * 3 + static_cast<std::size_t>(c)] / 255.0;
                t.v[static_cast<std::size_t>(c) * hw + i] =
                    (raw - norm.mean[static_cast<std::size_t>(c)]) / norm.std[static_cast<std::size_t>(c)];
            }
        }
        return t;
    }

    // six frames of one pair, order [prev L,C,R, curr L,C,R], into one tensor
    Tensor normalize_pair(const LabeledPair& p) const {
        Tensor t({6, 3, cfg.input_h, cfg.input_w});
        const std::size_t stride = static_cast<std::size_t>(3) * cfg.input_h * cfg.input_w;
        for (int i = 0; i < 6; ++i) {
            const Frame& f = i < 3 ? p.prev[static_cast<std::size_t>(i)]
                                   : p.curr[static_cast<std::size_t>(i - 3)];
            const Tensor one = normalize(f);
            std::copy(one.v.begin(), one.v.end(), t.v.begin() + static_cast<std::size_t>(i) * stride);
        }
        return t;
    }

    // Spatial cells after the stride-2 stem and two stride-2 blocks.
    int feat_cells_h() const { return cfg.input_h / cfg.pool / 8; }
    int feat_cells_w() const { return cfg.input_w / cfg.pool / 8; }

    // backbone over x[N,3,H,W] -> features [N,64]. The stem stays
    // unnormalized: per-sample channel normalization is scale-invariant, and
    // the epsilon-bounded attack class lives in small-amplitude texture that
    // must reach the blocks (their projected skips carry it past the norms).
    // The final linear reads the flattened feature map rather than a pooled
    // average: pooling averages localized patch evidence into nothing.
    Graph::V backbone(Graph& g, Graph::V x, const std::string& prefix) {
        ParamStore& ps = params;
        Graph::V h = x;
        if (cfg.pool > 1) h = g.avg_pool2d(h, cfg.pool);
        h = g.conv2d(h, g.param(ps, prefix + "stem.w"), g.param(ps, prefix + "stem.b"), 2, 1);
        h = g.relu(h);
        h = res_block(g, h, prefix + "b1.");
        h = res_block(g, h, prefix + "b2.");
        const Shape& s = g.shape(h);
        h = g.reshape(h, {s[0], s[1] * s[2] * s[3]});
        return g.linear(h, g.param(ps, prefix + "fc.w"), g.param(ps, prefix + "fc.b"));
    }

    // conv-norm-ReLU-conv-norm with a projected stride-2 skip, ReLU after add
    Graph::V res_block(Graph& g, Graph::V x, const std::string& prefix) {
        ParamStore& ps = params;
        Graph::V h = g.conv2d(x, g.param(ps, prefix + "conv1.w"), g.param(ps, prefix + "conv1.b"), 2, 1);
        h = g.channel_norm(h, g.param(ps, prefix + "n1.g"), g.param(ps, prefix + "n1.beta"));
        h = g.relu(h);
        h = g.conv2d(h, g.param(ps, prefix + "conv2.w"), g.param(ps, prefix + "conv2.b"), 1, 1);
        h = g.channel_norm(h, g.param(ps, prefix + "n2.g"), g.param(ps, prefix + "n2.beta"));
        Graph::V skip = g.conv2d(x, g.param(ps, prefix + "skip.w"), g.param(ps, prefix + "skip.b"), 2, 0);
        return g.relu(g.add(h, skip));
    }

    // one 4-head self-attention layer with residual + layer norm around it
    Graph::V mha_block(Graph& g, Graph::V tokens, const std::string& prefix) {
        ParamStore& ps = params;
        const Shape& s = g.shape(tokens);
        const int B = s[0], T = s[1], D = s[2];
        const int H = cfg.heads, dh = D / H;
        if (D % H != 0) throw ArgumentError("attention: width must be divisible by heads");
        Graph::V q = g.linear(tokens, g.param(ps, prefix + "wq"), g.param(ps, prefix + "bq"));
        Graph::V k = g.linear(tokens, g.param(ps, prefix + "wk"), g.param(ps, prefix + "bk"));
        Graph::V v = g.linear(tokens, g.param(ps, prefix + "wv"), g.param(ps, prefix + "bv"));
        auto heads_of = [&](Graph::V t) {
            return g.transpose_0213(g.reshape(t, {B, T, H, dh}));  // [B,H,T,dh]
        };
        Graph::V qh = heads_of(q), kh = heads_of(k), vh = heads_of(v);
        Graph::V att = g.softmax_lastdim(g.scale(g.bmm_bt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh))));
        Graph::V ctx = g.reshape(g.transpose_0213(g.bmm(att, vh)), {B, T, D});
        Graph::V out = g.linear(ctx, g.param(ps, prefix + "wo"), g.param(ps, prefix + "bo"));
        return g.layer_norm(g.add(tokens, out), g.param(ps, prefix + "ln.g"),
                            g.param(ps, prefix + "ln.beta"));
    }

    // spatial encoder over per-camera features [N,64] x3 -> summary [N,64]
    Graph::V spatial_encode(Graph& g, Graph::V v_left, Graph::V v_centre, Graph::V v_right) {
        const int B = g.shape(v_left)[0];
        std::vector<Graph::V> toks;
        toks.push_back(g.expand_batch(g.param(params, "spatial.cls"), B));
        toks.push_back(g.add(v_left, g.expand_batch(g.param(params, "spatial.pe1"), B)));
        toks.push_back(g.add(v_centre, g.expand_batch(g.param(params, "spatial.pe2"), B)));
        toks.push_back(g.add(v_right, g.expand_batch(g.param(params, "spatial.pe3"), B)));
        return g.select_token(mha_block(g, g.stack_tokens(toks), "spatial."), 0);
    }

    Graph::V temporal_encode(Graph& g, Graph::V s_prev, Graph::V s_curr) {
        const int B = g.shape(s_prev)[0];
        std::vector<Graph::V> toks;
        toks.push_back(g.expand_batch(g.param(params, "temporal.cls"), B));
        toks.push_back(g.add(s_prev, g.expand_batch(g.param(params, "temporal.pe1"), B)));
        toks.push_back(g.add(s_curr, g.expand_batch(g.param(params, "temporal.pe2"), B)));
        return g.select_token(mha_block(g, g.stack_tokens(toks), "temporal."), 0);
    }

    Graph::V head(Graph& g, Graph::V h) {
        Graph::V z = g.relu(g.linear(h, g.param(params, "head.fc1.w"), g.param(params, "head.fc1.b")));
        return g.linear(z, g.param(params, "head.fc2.w"), g.param(params, "head.fc2.b"));
    }

    // full pipeline over a batch tensor [6N,3,H,W] (pair-interleaved)
    Graph::V forward(Graph& g, Graph::V x, int n_pairs) {
        Graph::V feats;
        if (cfg.share_backbone) {
            feats = backbone(g, x, "backbone.");
        } else {
            throw ArgumentError("detector: unshared backbone requires forward_unshared");
        }
        Graph::V grouped = g.reshape(feats, {n_pairs, 6, cfg.feat_dim});
        std::array<Graph::V, 6> streams;
        for (int i = 0; i < 6; ++i) streams[static_cast<std::size_t>(i)] = g.select_token(grouped, i);
        Graph::V s_prev = spatial_encode(g, streams[0], streams[1], streams[2]);
        Graph::V s_curr = spatial_encode(g, streams[3], streams[4], streams[5]);
        Graph::V h = temporal_encode(g, s_prev, s_curr);
        return head(g, h);
    }

    // unshared-backbone variant: x6 stream tensors, each [N,3,H,W]
    Graph::V forward_unshared(Graph& g, const std::array<Graph::V, 6>& xs, int n_pairs) {
        (void)n_pairs;
        std::array<Graph::V, 6> streams;
        for (int i = 0; i < 6; ++i) {
            streams[static_cast<std::size_t>(i)] =
                backbone(g, xs[static_cast<std::size_t>(i)], "backbone" + std::to_string(i) + ".");
        }
        Graph::V s_prev = spatial_encode(g, streams[0], streams[1], streams[2]);
        Graph::V s_curr = spatial_encode(g, streams[3], streams[4], streams[5]);
        return head(g, temporal_encode(g, s_prev, s_curr));
    }

    // ---- inference ----

    std::vector<double> extract_features(const Frame& f) {
        Graph g;
        Graph::V x = g.input(normalize(f));
        Graph::V v = backbone(g, x, cfg.share_backbone ? "backbone." : "backbone0.");
        return g.value(v);
    }

    std::pair<std::array<double, 4>, Label> classify(const LabeledPair& p) {
        Graph g;
        Graph::V x = g.input(normalize_pair(p));
        Graph::V logits;
        if (cfg.share_backbone) {
            logits = forward(g, x, 1);
        } else {
            std::array<Graph::V, 6> xs;
            const Tensor all = normalize_pair(p);
            const std::size_t stride = static_cast<std::size_t>(3) * cfg.input_h * cfg.input_w;
            for (int i = 0; i < 6; ++i) {
                Tensor one({1, 3, cfg.input_h, cfg.input_w});
                std::copy_n(all.v.begin() + static_cast<std::size_t>(i) * stride, stride, one.v.begin());
                xs[static_cast<std::size_t>(i)] = g.input(one);
            }
            logits = forward_unshared(g, xs, 1);
        }
        const auto& lv = g.value(logits);
        std::array<double, 4> out{lv[0], lv[1], lv[2], lv[3]};
        // ties break toward the lower class index
        int best = 0;
        for (int i = 1; i < 4; ++i) {
            if (out[static_cast<std::size_t>(i)] > out[static_cast<std::size_t>(best)]) best = i;
        }
        return {out, dataset::label_from_int(best)};
    }

    std::array<double, 4> posterior(const LabeledPair& p) {
        const auto [logits, label] = classify(p);
        (void)label;
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        std::array<double, 4> post{};
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            post[static_cast<std::size_t>(i)] = std::exp(logits[static_cast<std::size_t>(i)] - mx);
            sum += post[static_cast<std::size_t>(i)];
        }
        for (auto& v : post) v /= sum;
        return post;
    }

    // ---- persistence: ParamStore binary + JSON sidecar ----

    void save(const std::string& path_bin) const {
        params.save(path_bin);
        ordered_json side;
        side["input_dims"] = {cfg.input_w, cfg.input_h};
        ordered_json nrm;
        nrm["mean"] = norm.mean;
        nrm["std"] = norm.std;
        side["normalization"] = nrm;
        side["arch_version"] = cfg.arch_version;
        side["pool"] = cfg.pool;
        side["share_backbone"] = cfg.share_backbone;
        side["heads"] = cfg.heads;
        side["feat_dim"] = cfg.feat_dim;
        std::ofstream out(path_bin + ".json");
        if (!out) throw IoError("detector: cannot write sidecar for '" + path_bin + "'");
        out << side.dump(2) << "\n";
    }

    static Ad2Model load(const std::string& path_bin) {
        std::ifstream in(path_bin + ".json");
        if (!in) throw IoError("detector: missing sidecar '" + path_bin + ".json'");
        json side = json::parse(in, nullptr, true);
        Ad2Model m;
        const auto dims = side.at("input_dims").get<std::vector<int>>();
        m.cfg.input_w = dims.at(0);
        m.cfg.input_h = dims.at(1);
        m.cfg.pool = side.value("pool", 2);
        m.cfg.share_backbone = side.value("share_backbone", true);
        m.cfg.heads = side.value("heads", 4);
        m.cfg.feat_dim = side.value("feat_dim", 64);
        m.cfg.arch_version = side.value("arch_version", 1);
        const auto mean = side.at("normalization").at("mean").get<std::vector<double>>();
        const auto stdv = side.at("normalization").at("std").get<std::vector<double>>();
        for (int c = 0; c < 3; ++c) {
            m.norm.mean[static_cast<std::size_t>(c)] = mean.at(static_cast<std::size_t>(c));
            m.norm.std[static_cast<std::size_t>(c)] = stdv.at(static_cast<std::size_t>(c));
        }
        m.params = ParamStore::load(path_bin);
        return m;
    }

private:
    // The stem initializes as five zero-DC filters, each instantiated three
    // times with staggered negative biases, and the first block's conv gets
    // center-tap (+1,-2,+1) combinations over each triple. Three shifted
    // ReLUs of one response differenced this way form an amplitude band-pass
    // (zero on flat regions AND on strong scene edges, positive on
    // epsilon-scale texture). Gradient descent refines these filters but
    // does not reliably assemble the coupled triple from random init.
    void add_backbone(const std::string& prefix, Rng& rng) {
        auto conv = [&](const std::string& name, int f, int c, int k) {
            auto& w = params.add(prefix + name + ".w", {f, c, k, k});
            nn::init_kaiming(w, rng, c * k * k);
            params.add(prefix + name + ".b", {f});
        };
        auto norm_p = [&](const std::string& name, int c) {
            nn::init_const(params.add(prefix + name + ".g", {c}), 1.0);
            params.add(prefix + name + ".beta", {c});
        };

        // stem: 5 zero-DC bases x 3 bias-shifted copies + 1 free filter
        {
            auto& w = params.add(prefix + "stem.w", {16, 3, 3, 3});
            auto& b = params.add(prefix + "stem.b", {16});
            nn::init_kaiming_zero_dc(w, rng, 27, 5.0);
            const long per = 27;
            for (int base = 0; base < 5; ++base) {
                const double* src = w.value.data() + static_cast<std::size_t>(base * 3) * per;
                for (int rep = 1; rep < 3; ++rep) {
                    std::copy_n(src, per,
                                w.value.data() + static_cast<std::size_t>(base * 3 + rep) * per);
                }
                const double theta = rng.uniform(0.6, 1.4);
                b.value[static_cast<std::size_t>(base * 3 + 1)] = -theta;
                b.value[static_cast<std::size_t>(base * 3 + 2)] = -2.0 * theta;
            }
        }

        auto block = [&](const std::string& bp, int cin, int cout) {
            conv(bp + "conv1", cout, cin, 3);
            norm_p(bp + "n1", cout);
            conv(bp + "conv2", cout, cout, 3);
            norm_p(bp + "n2", cout);
            conv(bp + "skip", cout, cin, 1);
        };
        block("b1.", 16, 32);
        block("b2.", 32, 64);

        // band-pass readers in b1.conv1: centre-tap (+1,-2,+1) per triple
        {
            auto& w = params.at(prefix + "b1.conv1.w");  // [32,16,3,3]
            for (int base = 0; base < 5; ++base) {
                double* out = w.value.data() + static_cast<std::size_t>(base) * 16 * 9;
                std::fill(out, out + 16 * 9, 0.0);
                const int centre = 4;  // 3x3 centre tap
                out[(base * 3 + 0) * 9 + centre] = 1.0;
                out[(base * 3 + 1) * 9 + centre] = -2.0;
                out[(base * 3 + 2) * 9 + centre] = 1.0;
            }
        }

        const int flat = 64 * feat_cells_h() * feat_cells_w();
        auto& fw = params.add(prefix + "fc.w", {flat, cfg.feat_dim});
        nn::init_kaiming(fw, rng, flat);
        params.add(prefix + "fc.b", {cfg.feat_dim});
    }

    void add_attention_block(const std::string& prefix, int n_pos, Rng& rng) {
        const int D = cfg.feat_dim;
        for (const char* n : {"wq", "wk", "wv", "wo"}) {
            auto& w = params.add(prefix + n, {D, D});
            nn::init_kaiming(w, rng, D);
        }
        for (const char* n : {"bq", "bk", "bv", "bo"}) params.add(prefix + n, {D});
        params.add(prefix + "cls", {D});  // zero-initialized
        for (int i = 1; i <= n_pos; ++i) params.add(prefix + "pe" + std::to_string(i), {D});
        nn::init_const(params.add(prefix + "ln.g", {D}), 1.0);
        params.add(prefix + "ln.beta", {D});
    }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline Normalization compute_normalization(const Dataset& train) {
    Normalization norm;
    std::array<double, 3> sum{}, sum2{};
    std::size_t n = 0;
    for (const auto& pair : train) {
        for (const auto* side : {&pair.prev, &pair.curr}) {
            for (const auto& f : *side) {
                for (std::size_t i = 0; i < f.data.size(); i += 3) {
                    for (int c = 0; c < 3; ++c) {
                        const double v = f.data[i + static_cast<std::size_t>(c)] / 255.0;
                        sum[static_cast<std::size_t>(c)] += v;
                        sum2[static_cast<std::size_t>(c)] += v * v;
                    }
                }
                n += f.data.size() / 3;
            }
        }
    }
    if (n == 0) throw ArgumentError("normalization: empty training set");
    for (int c = 0; c < 3; ++c) {
        const double mean = sum[static_cast<std::size_t>(c)] / static_cast<double>(n);
        const double var = sum2[static_cast<std::size_t>(c)] / static_cast<double>(n) - mean * mean;
        norm.mean[static_cast<std::size_t>(c)] = mean;
        norm.std[static_cast<std::size_t>(c)] = std::max(1e-3, std::sqrt(std::max(0.0, var)));
    }
    return norm;
}

inline std::pair<Ad2Model, TrainHistory> train(const Dataset& data, const TrainConfig& tc,
                                               const Ad2Config& arch = {}, bool verbose = false) {
    if (data.empty()) throw ArgumentError("train: empty dataset");
    const auto counts = dataset::class_counts(data);
    int present = 0;
    for (int c : counts) present += c > 0 ? 1 : 0;
    if (present < 2) throw ArgumentError("train: dataset must contain at least two classes");
    if (!data[0].curr[0].width) throw ArgumentError("train: empty frames");

    Ad2Config cfg = arch;
    cfg.input_w = data[0].curr[0].width;
    cfg.input_h = data[0].curr[0].height;

    Ad2Model model = Ad2Model::make(cfg, tc.seed);
    model.norm = compute_normalization(data);

    TrainHistory hist;
    Rng shuffle_rng(mix_seed(tc.seed, 0x5AFEULL));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const long steps_per_epoch = static_cast<long>((data.size() + tc.batch - 1) / tc.batch);
    const long total_steps = steps_per_epoch * tc.epochs;
    long step = 0;

    const std::size_t frame_stride = static_cast<std::size_t>(3) * cfg.input_h * cfg.input_w;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        // Fisher-Yates with the seeded stream
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        long correct = 0;
        for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(tc.batch)) {
            const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(tc.batch));
            const int nb = static_cast<int>(end - start);
            Tensor batch({6 * nb, 3, cfg.input_h, cfg.input_w});
            std::vector<int> labels(static_cast<std::size_t>(nb));
            for (int i = 0; i < nb; ++i) {
                const LabeledPair& pair = data[order[start + static_cast<std::size_t>(i)]];
                const Tensor six = model.normalize_pair(pair);
                std::copy(six.v.begin(), six.v.end(),
                          batch.v.begin() + static_cast<std::size_t>(i) * 6 * frame_stride);
                labels[static_cast<std::size_t>(i)] = static_cast<int>(pair.label);
            }
            Graph g;
            Graph::V x = g.input(batch);
            Graph::V logits = model.forward(g, x, nb);
            Graph::V loss = g.cross_entropy(logits, labels, tc.class_weights);

            model.params.zero_grads();
            g.backward(loss);
            const double lr = tc.lr * 0.5 *
                              (1.0 + std::cos(3.141592653589793 * static_cast<double>(step) /
                                              static_cast<double>(std::max(1L, total_steps))));
            nn::adam_step(model.params, lr);
            ++step;

            loss_sum += g.scalar(loss) * nb;
            const auto& lv = g.value(logits);
            for (int i = 0; i < nb; ++i) {
                int best = 0;
                for (int k = 1; k < 4; ++k) {
                    if (lv[static_cast<std::size_t>(i) * 4 + k] > lv[static_cast<std::size_t>(i) * 4 + best]) best = k;
                }
                if (best == labels[static_cast<std::size_t>(i)]) ++correct;
            }
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
        hist.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(data.size()));
        if (verbose) {
            std::fprintf(stderr, "epoch %d/%d loss %.4f acc %.4f\n", epoch + 1, tc.epochs,
                         hist.epoch_loss.back(), hist.epoch_accuracy.back());
        }
        if (epoch > 0 && hist.epoch_loss[static_cast<std::size_t>(epoch)] >
                             hist.epoch_loss[static_cast<std::size_t>(epoch - 1)] + 1e-12) {
            hist.loss_monotone = false;
        }
    }
    if (!hist.loss_monotone) {
        std::fprintf(stderr, "warning: training loss was not non-increasing across epochs\n");
    }
    return {std::move(model), std::move(hist)};
}

}  // namespace ad2::detector
