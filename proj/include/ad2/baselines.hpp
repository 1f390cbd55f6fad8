#pragma once

#include <algorithm>
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
#include "ad2/rng.hpp"

namespace ad2::baselines {

using dataset::Dataset;
using dataset::LabeledPair;
using imaging::Frame;
using imaging::RealPlane;
using nn::Graph;
using nn::ParamStore;
using nn::Tensor;

// ---------------------------------------------------------------------------
// LAP4: variance of the 4-neighbour Laplacian over the whole image
// (luminance = mean of RGB). Blur suppresses it by orders of magnitude.
// ---------------------------------------------------------------------------

inline double lap4_score(const Frame& f) {
    if (f.width < 3 || f.height < 3) {
        throw ArgumentError("lap4: image must be at least 3x3, got " + std::to_string(f.width) +
                            "x" + std::to_string(f.height));
    }
    const RealPlane lap = imaging::laplacian_plane(imaging::luminance(f));
    double mean = 0.0;
    for (double v : lap.v) mean += v;
    mean /= static_cast<double>(lap.v.size());
    double var = 0.0;
    for (double v : lap.v) var += (v - mean) * (v - mean);
    return var / static_cast<double>(lap.v.size());
}

enum class CameraAgg { min, mean, max };

// camera-aggregated score of the pair's current side
inline double lap4_pair_score(const LabeledPair& p, CameraAgg agg = CameraAgg::min) {
    double s0 = lap4_score(p.curr[0]);
    double s1 = lap4_score(p.curr[1]);
    double s2 = lap4_score(p.curr[2]);
    switch (agg) {
        case CameraAgg::min: return std::min({s0, s1, s2});
        case CameraAgg::mean: return (s0 + s1 + s2) / 3.0;
        case CameraAgg::max: return std::max({s0, s1, s2});
    }
    return s0;
}

struct Lap4Model {
    CameraAgg agg = CameraAgg::min;
    // per-class statistics of log-scores, fitted on the train split
    std::array<double, 4> median{};
    std::array<double, 4> lo{};  // 10th percentile
    std::array<double, 4> hi{};  // 90th percentile

    static double log_score(double s) { return std::log(s + 1e-12); }

    static Lap4Model fit(const Dataset& train, CameraAgg agg = CameraAgg::min) {
        if (train.empty()) throw ArgumentError("lap4 fit: empty training set");
        std::array<std::vector<double>, 4> per_class;
        for (const auto& p : train) {
            per_class[static_cast<std::size_t>(static_cast<int>(p.label))].push_back(
                log_score(lap4_pair_score(p, agg)));
        }
        Lap4Model m;
        m.agg = agg;
        for (int c = 0; c < 4; ++c) {
            auto& v = per_class[static_cast<std::size_t>(c)];
            if (v.empty()) throw ArgumentError("lap4 fit: class " + std::to_string(c) + " missing");
            std::sort(v.begin(), v.end());
            m.median[static_cast<std::size_t>(c)] = v[v.size() / 2];
            m.lo[static_cast<std::size_t>(c)] = v[v.size() / 10];
            m.hi[static_cast<std::size_t>(c)] = v[v.size() - 1 - v.size() / 10];
        }
        return m;
    }

    int classify(const LabeledPair& p) const {
        const double s = log_score(lap4_pair_score(p, agg));
        // interval rule first, nearest median as the tie/fallback rule
        int best = -1;
        double best_d = 1e300;
        for (int c = 0; c < 4; ++c) {
            if (s >= lo[static_cast<std::size_t>(c)] && s <= hi[static_cast<std::size_t>(c)]) {
                const double d = std::abs(s - median[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
        }
        if (best >= 0) return best;
        for (int c = 0; c < 4; ++c) {
            const double d = std::abs(s - median[static_cast<std::size_t>(c)]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    std::array<double, 4> class_scores(const LabeledPair& p) const {
        const double s = log_score(lap4_pair_score(p, agg));
        std::array<double, 4> out{};
        for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(c)] = -std::abs(s - median[static_cast<std::size_t>(c)]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Kernel-PCA anomaly scoring (CoP / CoRP) on features from a small CNN
// trained on a camera-index pretext task over benign frames only.
// ---------------------------------------------------------------------------

inline std::vector<double> cop_map(const std::vector<double>& z) {
    double n2 = 0.0;
    for (double v : z) n2 += v * v;
    if (n2 <= 0.0) throw ArgumentError("cop_map: zero vector has no direction");
    const double inv = 1.0 / std::sqrt(n2);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * inv;
    return out;
}

struct RffParams {
    int M = 256;
    double gamma = 1.0;  // Gaussian kernel bandwidth
    std::vector<double> omega;  // M x d
    std::vector<double> u;      // M

    static RffParams make(int d, int M, double gamma, std::uint64_t seed) {
        RffParams r;
        r.M = M;
        r.gamma = gamma;
        r.omega.resize(static_cast<std::size_t>(M) * d);
        r.u.resize(static_cast<std::size_t>(M));
        Rng rng(mix_seed(seed, 0x52FFu));
        for (auto& w : r.omega) w = rng.normal() / gamma;
        for (auto& x : r.u) x = rng.uniform(0.0, 2.0 * 3.141592653589793);
        return r;
    }
};

inline std::vector<double> corp_map(const std::vector<double>& z, const RffParams& rff) {
    const std::vector<double> zhat = cop_map(z);
    const int d = static_cast<int>(zhat.size());
    std::vector<double> out(static_cast<std::size_t>(rff.M));
    const double scale = std::sqrt(2.0 / rff.M);
    for (int i = 0; i < rff.M; ++i) {
        double dot = 0.0;
        const double* wi = rff.omega.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) dot += wi[j] * zhat[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = scale * std::cos(dot + rff.u[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace detail {

// cyclic Jacobi eigendecomposition of a symmetric matrix; returns
// eigenvalues descending with matching orthonormal eigenvectors (rows)
inline void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigvals,
                         std::vector<double>& eigvecs_rows) {
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * n + j]; };

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
    eigvals.resize(static_cast<std::size_t>(n));
    eigvecs_rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int r = 0; r < n; ++r) {
        const int src = order[static_cast<std::size_t>(r)];
        eigvals[static_cast<std::size_t>(r)] = A(src, src);
        for (int k = 0; k < n; ++k) {
            eigvecs_rows[static_cast<std::size_t>(r) * n + k] = V(k, src);
        }
    }
}

}  // namespace detail

// PCA on mapped features: center, project on the top-q components,
// score = squared reconstruction residual.
struct Pca {
    int dim = 0;
    int q = 0;
    std::vector<double> mean;
    std::vector<double> components;  // q rows x dim

    static Pca fit(const std::vector<std::vector<double>>& samples, int q) {
        if (samples.empty()) throw ArgumentError("pca fit: no samples");
        const int d = static_cast<int>(samples[0].size());
        if (static_cast<int>(samples.size()) < q + 1) {
            throw ArgumentError("pca fit: need at least q+1 samples for q=" + std::to_string(q));
        }
        Pca p;
        p.dim = d;
        p.q = q;
        p.mean.assign(static_cast<std::size_t>(d), 0.0);
        for (const auto& s : samples) {
            for (int i = 0; i < d; ++i) p.mean[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i)];
        }
        for (auto& m : p.mean) m /= static_cast<double>(samples.size());

        std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
        for (const auto& s : samples) {
            for (int i = 0; i < d; ++i) {
                const double xi = s[static_cast<std::size_t>(i)] - p.mean[static_cast<std::size_t>(i)];
                for (int j = i; j < d; ++j) {
                    cov[static_cast<std::size_t>(i) * d + j] +=
                        xi * (s[static_cast<std::size_t>(j)] - p.mean[static_cast<std::size_t>(j)]);
                }
            }
        }
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) {
                const double v = cov[static_cast<std::size_t>(i) * d + j] / static_cast<double>(samples.size());
                cov[static_cast<std::size_t>(i) * d + j] = v;
                cov[static_cast<std::size_t>(j) * d + i] = v;
            }
        }
        std::vector<double> eigvals, eigvecs;
        detail::jacobi_eigen(cov, d, eigvals, eigvecs);
        int rank = 0;
        const double tol = std::max(1e-12, eigvals.empty() ? 0.0 : eigvals[0] * 1e-9);
        for (double ev : eigvals) rank += ev > tol ? 1 : 0;
        if (q > rank) {
            throw ArgumentError("pca fit: q=" + std::to_string(q) +
                                " exceeds achievable rank " + std::to_string(rank));
        }
        p.components.assign(eigvecs.begin(), eigvecs.begin() + static_cast<std::size_t>(q) * d);
        return p;
    }

    double reconstruction_error(const std::vector<double>& x) const {
        std::vector<double> centered(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) centered[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
        double err = 0.0;
        for (int i = 0; i < dim; ++i) err += centered[static_cast<std::size_t>(i)] * centered[static_cast<std::size_t>(i)];
        for (int r = 0; r < q; ++r) {
            double proj = 0.0;
            const double* row = components.data() + static_cast<std::size_t>(r) * dim;
            for (int i = 0; i < dim; ++i) proj += row[i] * centered[static_cast<std::size_t>(i)];
            err -= proj * proj;
        }
        return std::max(0.0, err);
    }
};

// Small CNN trained to predict the camera index (left/centre/right) from a
// single benign frame; its penultimate features feed the KPCA maps.
// Supervision never touches attack labels.
struct PretextNet {
    ParamStore params;
    int input_w = 96, input_h = 64;
    int pool = 2;
    int feat_dim = 16;

    static PretextNet make(int w, int h, std::uint64_t seed) {
        PretextNet n;
        n.input_w = w;
        n.input_h = h;
        Rng rng(mix_seed(0xFEA7, seed));
        nn::init_kaiming(n.params.add("c1.w", {8, 3, 3, 3}), rng, 27);
        n.params.add("c1.b", {8});
        nn::init_kaiming(n.params.add("c2.w", {16, 8, 3, 3}), rng, 72);
        n.params.add("c2.b", {16});
        nn::init_kaiming(n.params.add("fc.w", {16, 16}), rng, 16);
        n.params.add("fc.b", {16});
        nn::init_kaiming(n.params.add("cls.w", {16, 3}), rng, 16);
        n.params.add("cls.b", {3});
        return n;
    }

    Tensor to_tensor(const Frame& f) const {
        Tensor t({1, 3, input_h, input_w});
        const std::size_t hw = static_cast<std::size_t>(input_h) * input_w;
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < hw; ++i) {
                t.v[static_cast<std::size_t>(c) * hw + i] = f.data[i * 3 + static_cast<std::size_t>(c)] / 255.0 - 0.5;
            }
        }
        return t;
    }

    Graph::V trunk(Graph& g, Graph::V x) {
        Graph::V h = g.avg_pool2d(x, pool);
        h = g.relu(g.conv2d(h, g.param(params, "c1.w"), g.param(params, "c1.b"), 2, 1));
        h = g.relu(g.conv2d(h, g.param(params, "c2.w"), g.param(params, "c2.b"), 2, 1));
        h = g.gap(h);
        return g.relu(g.linear(h, g.param(params, "fc.w"), g.param(params, "fc.b")));
    }

    std::vector<double> features(const Frame& f) {
        Graph g;
        return g.value(trunk(g, g.input(to_tensor(f))));
    }

    // one pass over benign frames, camera index as the label
    void fit(const Dataset& benign_pairs, int epochs, std::uint64_t seed) {
        std::vector<const Frame*> frames;
        std::vector<int> labels;
        for (const auto& p : benign_pairs) {
            for (int cam = 0; cam < 3; ++cam) {
                frames.push_back(&p.curr[static_cast<std::size_t>(cam)]);
                labels.push_back(cam);
            }
        }
        if (frames.empty()) throw ArgumentError("pretext fit: no benign frames");
        Rng shuffle_rng(mix_seed(seed, 0x9));
        std::vector<std::size_t> order(frames.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        const int batch = 48;
        long step = 0;
        for (int e = 0; e < epochs; ++e) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1],
                          order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
            }
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const std::size_t end = std::min(order.size(), start + batch);
                const int nb = static_cast<int>(end - start);
                Tensor x({nb, 3, input_h, input_w});
                std::vector<int> y(static_cast<std::size_t>(nb));
                const std::size_t stride = static_cast<std::size_t>(3) * input_h * input_w;
                for (int k = 0; k < nb; ++k) {
                    const Tensor one = to_tensor(*frames[order[start + static_cast<std::size_t>(k)]]);
                    std::copy(one.v.begin(), one.v.end(), x.v.begin() + static_cast<std::size_t>(k) * stride);
                    y[static_cast<std::size_t>(k)] = labels[order[start + static_cast<std::size_t>(k)]];
                }
                Graph g;
                Graph::V feats = trunk(g, g.input(x));
                Graph::V logits = g.linear(feats, g.param(params, "cls.w"), g.param(params, "cls.b"));
                Graph::V loss = g.cross_entropy(logits, y);
                params.zero_grads();
                g.backward(loss);
                nn::adam_step(params, 1e-3 * 0.5 * (1.0 + std::cos(3.141592653589793 * step / 400.0)));
                ++step;
            }
        }
    }
};

enum class KpcaVariant { cop, corp };

struct KpcaModel {
    KpcaVariant variant = KpcaVariant::cop;
    PretextNet net;
    RffParams rff;  // used by corp only
    Pca pca;
    double tau = 0.0;                  // benign-vs-anomaly threshold (p95 of benign train)
    std::array<double, 4> median{};    // per-class train score medians

    // pair feature: concatenated pretext features of the three current frames
    std::vector<double> raw_features(const LabeledPair& p) {
        std::vector<double> z;
        for (int cam = 0; cam < 3; ++cam) {
            const auto f = net.features(p.curr[static_cast<std::size_t>(cam)]);
            z.insert(z.end(), f.begin(), f.end());
        }
        return z;
    }

    std::vector<double> mapped_features(const LabeledPair& p) {
        const auto z = raw_features(p);
        return variant == KpcaVariant::cop ? cop_map(z) : corp_map(z, rff);
    }

    double score(const LabeledPair& p) { return pca.reconstruction_error(mapped_features(p)); }

    static KpcaModel fit(const Dataset& train, KpcaVariant variant, int q = 12,
                         std::uint64_t seed = 7, int rff_m = 256, double gamma = 1.0) {
        Dataset benign;
        for (const auto& p : train) {
            if (p.label == dataset::Label::benign) benign.push_back(p);
        }
        if (static_cast<int>(benign.size()) < q + 1) {
            throw ArgumentError("kpca fit: need at least q+1 benign samples");
        }
        KpcaModel m;
        m.variant = variant;
        m.net = PretextNet::make(train[0].curr[0].width, train[0].curr[0].height, seed);
        m.net.fit(benign, 2, seed);
        if (variant == KpcaVariant::corp) {
            m.rff = RffParams::make(3 * m.net.feat_dim, rff_m, gamma, seed);
        }
        std::vector<std::vector<double>> mapped;
        mapped.reserve(benign.size());
        for (const auto& p : benign) mapped.push_back(m.mapped_features(const_cast<LabeledPair&>(p)));
        m.pca = Pca::fit(mapped, q);

        // benign threshold and per-class medians on the train split
        std::array<std::vector<double>, 4> per_class;
        for (const auto& p : train) {
            per_class[static_cast<std::size_t>(static_cast<int>(p.label))].push_back(
                m.score(const_cast<LabeledPair&>(p)));
        }
        auto& ben = per_class[0];
        std::sort(ben.begin(), ben.end());
        m.tau = ben[static_cast<std::size_t>(ben.size() * 95 / 100)];
        for (int c = 0; c < 4; ++c) {
            auto& v = per_class[static_cast<std::size_t>(c)];
            if (v.empty()) throw ArgumentError("kpca fit: class " + std::to_string(c) + " missing");
            std::sort(v.begin(), v.end());
            m.median[static_cast<std::size_t>(c)] = v[v.size() / 2];
        }
        return m;
    }

    // benign unless the reconstruction error is anomalous; anomalies get the
    // attack class with the nearest train-score median
    int classify(const LabeledPair& p) {
        const double s = score(p);
        if (s <= tau) return 0;
        int best = 1;
        double best_d = 1e300;
        for (int c = 1; c < 4; ++c) {
            const double d = std::abs(s - median[static_cast<std::size_t>(c)]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    std::array<double, 4> class_scores(const LabeledPair& p) {
        const double s = score(p);
        std::array<double, 4> out{};
        out[0] = -s;
        for (int c = 1; c < 4; ++c) out[static_cast<std::size_t>(c)] = -std::abs(s - median[static_cast<std::size_t>(c)]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// kth-order forward differences
// ---------------------------------------------------------------------------

struct DiffPlanes {
    imaging::RealPlanes horizontal;  // width reduced by k
    imaging::RealPlanes vertical;    // height reduced by k
};

inline RealPlane diff_once_h(const RealPlane& p) {
    RealPlane out(p.width - 1, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x + 1 < p.width; ++x) out.at(x, y) = p.at(x + 1, y) - p.at(x, y);
    }
    return out;
}

inline RealPlane diff_once_v(const RealPlane& p) {
    RealPlane out(p.width, p.height - 1);
    for (int y = 0; y + 1 < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) out.at(x, y) = p.at(x, y + 1) - p.at(x, y);
    }
    return out;
}

inline DiffPlanes kth_diff(const Frame& f, int k) {
    if (k < 1) throw ArgumentError("kth_diff: k must be >= 1");
    if (k >= f.width || k >= f.height) {
        throw ArgumentError("kth_diff: k=" + std::to_string(k) + " too large for " +
                            std::to_string(f.width) + "x" + std::to_string(f.height));
    }
    DiffPlanes out;
    const imaging::RealPlanes planes = imaging::to_real(f);
    out.horizontal.width = f.width - k;
    out.horizontal.height = f.height;
    out.vertical.width = f.width;
    out.vertical.height = f.height - k;
    for (int c = 0; c < 3; ++c) {
        RealPlane h = planes.ch[static_cast<std::size_t>(c)];
        RealPlane v = planes.ch[static_cast<std::size_t>(c)];
        for (int i = 0; i < k; ++i) h = diff_once_h(h);
        for (int i = 0; i < k; ++i) v = diff_once_v(v);
        out.horizontal.ch[static_cast<std::size_t>(c)] = std::move(h);
        out.vertical.ch[static_cast<std::size_t>(c)] = std::move(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Difference-CNN classifier: first-order luminance differences of the three
// current frames stacked as 6 channels, fed to a wider residual CNN.
// ---------------------------------------------------------------------------

struct DiffNetConfig {
    int k = 1;
    int input_w = 96, input_h = 64;
    int pool = 2;
    int epochs = 2;
    int batch = 16;
    double lr = 1.5e-3;
    std::uint64_t seed = 7;
};

struct DiffNetModel {
    DiffNetConfig cfg;
    ParamStore params;

    static DiffNetModel make(const DiffNetConfig& cfg) {
        DiffNetModel m;
        m.cfg = cfg;
        Rng rng(mix_seed(0xD1FF, cfg.seed));
        auto conv = [&](const std::string& name, int f, int c, int k) {
            auto& w = m.params.add(name + ".w", {f, c, k, k});
            nn::init_kaiming(w, rng, c * k * k);
            m.params.add(name + ".b", {f});
        };
        auto norm_p = [&](const std::string& name, int c) {
            nn::init_const(m.params.add(name + ".g", {c}), 1.0);
            m.params.add(name + ".beta", {c});
        };
        // stem: 16 bases x 3 bias-shifted copies; b1 gets centre-tap
        // (+1,-2,+1) band-pass readers over each triple (see the detector's
        // backbone init for the rationale)
        {
            auto& w = m.params.add("stem.w", {48, 6, 3, 3});
            auto& b = m.params.add("stem.b", {48});
            nn::init_kaiming(w, rng, 54);
            for (auto& x : w.value) x *= 3.0;
            const long per = 54;
            for (int base = 0; base < 16; ++base) {
                const double* src = w.value.data() + static_cast<std::size_t>(base * 3) * per;
                for (int rep = 1; rep < 3; ++rep) {
                    std::copy_n(src, per,
                                w.value.data() + static_cast<std::size_t>(base * 3 + rep) * per);
                }
                const double theta = rng.uniform(0.5, 1.2);
                b.value[static_cast<std::size_t>(base * 3 + 1)] = -theta;
                b.value[static_cast<std::size_t>(base * 3 + 2)] = -2.0 * theta;
            }
        }
        auto block = [&](const std::string& bp, int cin, int cout) {
            conv(bp + ".conv1", cout, cin, 3);
            norm_p(bp + ".n1", cout);
            conv(bp + ".conv2", cout, cout, 3);
            norm_p(bp + ".n2", cout);
            conv(bp + ".skip", cout, cin, 1);
        };
        block("b1", 48, 96);
        block("b2", 96, 192);
        block("b3", 192, 192);
        {
            auto& w = m.params.at("b1.conv1.w");  // [96,48,3,3]
            for (int base = 0; base < 16; ++base) {
                double* out = w.value.data() + static_cast<std::size_t>(base) * 48 * 9;
                std::fill(out, out + 48 * 9, 0.0);
                const int centre = 4;
                out[(base * 3 + 0) * 9 + centre] = 1.0;
                out[(base * 3 + 1) * 9 + centre] = -2.0;
                out[(base * 3 + 2) * 9 + centre] = 1.0;
            }
        }
        nn::init_kaiming(m.params.add("head.fc1.w", {192, 64}), rng, 192);
        m.params.add("head.fc1.b", {64});
        nn::init_kaiming(m.params.add("head.fc2.w", {64, 4}), rng, 64);
        m.params.add("head.fc2.b", {4});
        return m;
    }

    long param_count() const { return params.param_count(); }

    // 6-channel tensor of k-th order luminance differences (H and V planes
    // per camera), cropped to the common (H-k, W-k) grid and scaled to ~[-1,1]
    Tensor to_tensor(const LabeledPair& p) const {
        const int w = cfg.input_w - cfg.k, h = cfg.input_h - cfg.k;
        Tensor t({1, 6, h, w});
        for (int cam = 0; cam < 3; ++cam) {
            const Frame& f = p.curr[static_cast<std::size_t>(cam)];
            if (f.width != cfg.input_w || f.height != cfg.input_h) {
                throw ShapeError("diffnet: frame " + std::to_string(f.width) + "x" +
                                 std::to_string(f.height) + " does not match configured input");
            }
            RealPlane lum = imaging::luminance(f);
            RealPlane dh = lum, dv = lum;
            for (int i = 0; i < cfg.k; ++i) dh = diff_once_h(dh);
            for (int i = 0; i < cfg.k; ++i) dv = diff_once_v(dv);
            double* out_h = t.v.data() + static_cast<std::size_t>(cam * 2) * h * w;
            double* out_v = t.v.data() + static_cast<std::size_t>(cam * 2 + 1) * h * w;
            // scaled so an epsilon-sized difference sits at O(1); scene edges
            // saturate higher, which is fine for the classifier
            const double scale = 1.0 / 8.0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    out_h[static_cast<std::size_t>(y) * w + x] = dh.at(x, y) * scale;
                    out_v[static_cast<std::size_t>(y) * w + x] = dv.at(x, y) * scale;
                }
            }
        }
        return t;
    }

    Graph::V forward(Graph& g, Graph::V x) {
        auto block = [&](Graph::V in, const std::string& bp, int stride) {
            Graph::V h = g.conv2d(in, g.param(params, bp + ".conv1.w"), g.param(params, bp + ".conv1.b"), stride, 1);
            h = g.channel_norm(h, g.param(params, bp + ".n1.g"), g.param(params, bp + ".n1.beta"));
            h = g.relu(h);
            h = g.conv2d(h, g.param(params, bp + ".conv2.w"), g.param(params, bp + ".conv2.b"), 1, 1);
            h = g.channel_norm(h, g.param(params, bp + ".n2.g"), g.param(params, bp + ".n2.beta"));
            Graph::V skip = g.conv2d(in, g.param(params, bp + ".skip.w"), g.param(params, bp + ".skip.b"), stride, 0);
            return g.relu(g.add(h, skip));
        };
        Graph::V h = x;
        if (cfg.pool > 1) h = g.avg_pool2d(h, cfg.pool);
        h = g.conv2d(h, g.param(params, "stem.w"), g.param(params, "stem.b"), 2, 1);
        h = g.relu(h);
        h = block(h, "b1", 2);
        h = block(h, "b2", 2);
        h = block(h, "b3", 1);
        h = g.gap(h);
        h = g.relu(g.linear(h, g.param(params, "head.fc1.w"), g.param(params, "head.fc1.b")));
        return g.linear(h, g.param(params, "head.fc2.w"), g.param(params, "head.fc2.b"));
    }

    std::array<double, 4> logits(const LabeledPair& p) {
        Graph g;
        Graph::V out = forward(g, g.input(to_tensor(p)));
        const auto& v = g.value(out);
        return {v[0], v[1], v[2], v[3]};
    }

    int classify(const LabeledPair& p) {
        const auto l = logits(p);
        int best = 0;
        for (int i = 1; i < 4; ++i) {
            if (l[static_cast<std::size_t>(i)] > l[static_cast<std::size_t>(best)]) best = i;
        }
        return best;
    }

    std::array<double, 4> posterior(const LabeledPair& p) {
        const auto l = logits(p);
        double mx = l[0];
        for (double v : l) mx = std::max(mx, v);
        std::array<double, 4> post{};
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            post[static_cast<std::size_t>(i)] = std::exp(l[static_cast<std::size_t>(i)] - mx);
            sum += post[static_cast<std::size_t>(i)];
        }
        for (auto& v : post) v /= sum;
        return post;
    }

    void train(const Dataset& data, bool verbose = false) {
        if (data.empty()) throw ArgumentError("diffnet train: empty dataset");
        cfg.input_w = data[0].curr[0].width;
        cfg.input_h = data[0].curr[0].height;
        Rng shuffle_rng(mix_seed(cfg.seed, 0xD1FFBA11ULL));
        std::vector<std::size_t> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        const long steps_per_epoch = static_cast<long>((data.size() + cfg.batch - 1) / cfg.batch);
        const long total_steps = steps_per_epoch * cfg.epochs;
        long step = 0;
        const int w = cfg.input_w - cfg.k, h = cfg.input_h - cfg.k;
        const std::size_t stride = static_cast<std::size_t>(6) * h * w;
        for (int e = 0; e < cfg.epochs; ++e) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1],
                          order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
            }
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(cfg.batch)) {
                const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(cfg.batch));
                const int nb = static_cast<int>(end - start);
                Tensor x({nb, 6, h, w});
                std::vector<int> y(static_cast<std::size_t>(nb));
                for (int i = 0; i < nb; ++i) {
                    const LabeledPair& pair = data[order[start + static_cast<std::size_t>(i)]];
                    const Tensor one = to_tensor(pair);
                    std::copy(one.v.begin(), one.v.end(), x.v.begin() + static_cast<std::size_t>(i) * stride);
                    y[static_cast<std::size_t>(i)] = static_cast<int>(pair.label);
                }
                Graph g;
                Graph::V loss = g.cross_entropy(forward(g, g.input(x)), y);
                params.zero_grads();
                g.backward(loss);
                const double lr = cfg.lr * 0.5 *
                                  (1.0 + std::cos(3.141592653589793 * static_cast<double>(step) /
                                                  static_cast<double>(std::max(1L, total_steps))));
                nn::adam_step(params, lr);
                ++step;
                loss_sum += g.scalar(loss) * nb;
            }
            if (verbose) {
                std::fprintf(stderr, "diffnet epoch %d/%d loss %.4f\n", e + 1, cfg.epochs,
                             loss_sum / static_cast<double>(data.size()));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Feature export for external projection tools
// ---------------------------------------------------------------------------

inline void export_features(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const std::string& path) {
    if (features.size() != labels.size()) {
        throw ArgumentError("export_features: features/labels size mismatch");
    }
    std::ofstream out(path);
    if (!out) throw IoError("export_features: cannot open '" + path + "'");
    const std::size_t m = features.empty() ? 0 : features[0].size();
    out << "sample_id,label";
    for (std::size_t i = 0; i < m; ++i) out << ",f" << i;
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < features.size(); ++i) {
        out << i << "," << labels[i];
        for (double v : features[i]) {
            std::snprintf(buf, sizeof(buf), ",%.9f", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("export_features: short write to '" + path + "'");
}

}  // namespace ad2::baselines
