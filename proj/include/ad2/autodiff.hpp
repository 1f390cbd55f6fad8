#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ad2/errors.hpp"
#include "ad2/rng.hpp"

namespace ad2::nn {

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), v(static_cast<std::size_t>(numel(shape)), 0.0) {}
};

// ---------------------------------------------------------------------------
// Parameter store with adaptive-moment state
// ---------------------------------------------------------------------------

class ParamStore {
public:
    struct Param {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<double> m;
        std::vector<double> v;
        bool has_grad = false;
    };

    Param& add(const std::string& name, Shape shape) {
        auto [it, fresh] = params_.try_emplace(name);
        if (!fresh) throw ArgumentError("param store: duplicate parameter \"" + name + "\"");
        Param& p = it->second;
        p.shape = std::move(shape);
        const auto n = static_cast<std::size_t>(numel(p.shape));
        p.value.assign(n, 0.0);
        p.grad.assign(n, 0.0);
        p.m.assign(n, 0.0);
        p.v.assign(n, 0.0);
        return p;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }

    Param& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ArgumentError("param store: unknown parameter \"" + name + "\"");
        return it->second;
    }
    const Param& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }

    // deterministic iteration in name order
    std::map<std::string, Param>& all() { return params_; }
    const std::map<std::string, Param>& all() const { return params_; }

    void zero_grads() {
        for (auto& [name, p] : params_) {
            std::fill(p.grad.begin(), p.grad.end(), 0.0);
            p.has_grad = false;
        }
    }

    void mark_grads_ready() {
        for (auto& [name, p] : params_) p.has_grad = true;
    }

    long param_count() const {
        long n = 0;
        for (const auto& [name, p] : params_) n += numel(p.shape);
        return n;
    }

    long step_count() const { return step_; }
    void set_step_count(long s) { step_ = s; }

    // Flat binary layout: magic "AD2W", version u32, then per parameter in
    // name order: name length u32, name bytes, rank u32, dims u32 each,
    // 64-bit little-endian values.
    std::vector<std::uint8_t> serialize() const {
        std::vector<std::uint8_t> out;
        auto put_u32 = [&](std::uint32_t x) {
            for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
        };
        out.insert(out.end(), {'A', 'D', '2', 'W'});
        put_u32(1);
        for (const auto& [name, p] : params_) {
            put_u32(static_cast<std::uint32_t>(name.size()));
            out.insert(out.end(), name.begin(), name.end());
            put_u32(static_cast<std::uint32_t>(p.shape.size()));
            for (int d : p.shape) put_u32(static_cast<std::uint32_t>(d));
            for (double x : p.value) {
                std::uint64_t bits;
                std::memcpy(&bits, &x, 8);
                for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
            }
        }
        return out;
    }

    void save(const std::string& path) const {
        const auto bytes = serialize();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("param store: cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("param store: short write to '" + path + "'");
    }

    static ParamStore load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("param store: cannot open '" + path + "'");
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        std::size_t pos = 0;
        auto get_u32 = [&]() {
            if (pos + 4 > bytes.size()) throw DecodeError("param store: truncated at offset " +
                                                          std::to_string(pos));
            std::uint32_t x = 0;
            for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
            return x;
        };
        if (bytes.size() < 8 || bytes[0] != 'A' || bytes[1] != 'D' || bytes[2] != '2' ||
            bytes[3] != 'W') {
            throw DecodeError("param store: bad magic (expected AD2W)");
        }
        pos = 4;
        const std::uint32_t version = get_u32();
        if (version != 1) throw DecodeError("param store: unsupported version " +
                                            std::to_string(version));
        ParamStore store;
        while (pos < bytes.size()) {
            const std::uint32_t name_len = get_u32();
            if (pos + name_len > bytes.size()) throw DecodeError("param store: truncated name");
            std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
            pos += name_len;
            const std::uint32_t rank = get_u32();
            Shape shape(rank);
            for (auto& d : shape) d = static_cast<int>(get_u32());
            Param& p = store.add(name, shape);
            const std::size_t n = p.value.size();
            if (pos + 8 * n > bytes.size()) throw DecodeError("param store: truncated values of \"" +
                                                              name + "\"");
            for (std::size_t i = 0; i < n; ++i) {
                std::uint64_t bits = 0;
                for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * b);
                std::memcpy(&p.value[i], &bits, 8);
            }
        }
        return store;
    }

    std::uint64_t checksum() const {
        const auto bytes = serialize();
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (std::uint8_t b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    std::map<std::string, Param> params_;
    long step_ = 0;
};

// Bias-corrected adaptive-moment update.
inline void adam_step(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    store.set_step_count(store.step_count() + 1);
    const double t = static_cast<double>(store.step_count());
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& [name, p] : store.all()) {
        if (!p.has_grad) throw ArgumentError("adam_step: no gradient for parameter \"" + name + "\"");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
            p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
            const double mhat = p.m[i] / bc1;
            const double vhat = p.v[i] / bc2;
            p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Dense kernels (fixed summation order; single-threaded)
// ---------------------------------------------------------------------------

namespace detail {

// c[M,N] += a[M,K] * b[K,N]. The restrict qualifiers matter: without them
// the compiler must assume c aliases a/b and will not vectorize the inner
// accumulation.
inline void mm_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
                   int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* __restrict ai = a + static_cast<std::size_t>(i) * K;
        double* __restrict ci = c + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double av = ai[k];
            const double* __restrict bk = b + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) ci[j] += av * bk[j];
        }
    }
}

// c[M,N] += a[M,K] * b[N,K]^T. Materializes b^T once and reuses the fast
// kernel; the naive dot-product form runs ~5x slower (serial reduction
// chains defeat the vectorizer).
inline void mm_acc_bt(const double* __restrict a, const double* __restrict b,
                      double* __restrict c, int M, int K, int N) {
    thread_local std::vector<double> scratch;
    scratch.resize(static_cast<std::size_t>(K) * N);
    for (int j = 0; j < N; ++j) {
        const double* __restrict bj = b + static_cast<std::size_t>(j) * K;
        for (int k = 0; k < K; ++k) scratch[static_cast<std::size_t>(k) * N + j] = bj[k];
    }
    mm_acc(a, scratch.data(), c, M, K, N);
}

// c[K,N] += a[M,K]^T * b[M,N]
inline void mm_acc_at(const double* __restrict a, const double* __restrict b,
                      double* __restrict c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* __restrict ai = a + static_cast<std::size_t>(i) * K;
        const double* __restrict bi = b + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double av = ai[k];
            double* __restrict ck = c + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) ck[j] += av * bi[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reverse-mode graph. Creation order is a valid topological order, so the
// backward pass walks nodes in reverse creation order.
// ---------------------------------------------------------------------------

class Graph {
public:
    using V = int;

    struct Node {
        Shape shape;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void()> back;
        bool needs_grad = false;
        ParamStore::Param* writeback = nullptr;
    };

    V input(const Shape& shape, const double* data) {
        V id = fresh(shape, false);
        std::copy_n(data, node(id).val.size(), node(id).val.begin());
        return id;
    }

    V input(const Tensor& t) { return input(t.shape, t.v.data()); }

    V constant(const Shape& shape, double fill) {
        V id = fresh(shape, false);
        std::fill(node(id).val.begin(), node(id).val.end(), fill);
        return id;
    }

    V param(ParamStore& store, const std::string& name) {
        ParamStore::Param& p = store.at(name);
        V id = fresh(p.shape, true);
        node(id).val = p.value;
        node(id).writeback = &p;
        return id;
    }

    Node& node(V id) { return *nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(V id) const { return *nodes_[static_cast<std::size_t>(id)]; }
    const std::vector<double>& value(V id) const { return node(id).val; }
    const Shape& shape(V id) const { return node(id).shape; }

    double scalar(V id) const {
        if (numel(node(id).shape) != 1) throw ShapeError("scalar: node is not a scalar");
        return node(id).val[0];
    }

    // ---- elementwise ----

    V add(V a, V b) {
        require_same(a, b, "add");
        V out = fresh(shape(a), needs(a) || needs(b));
        auto& o = node(out);
        const auto& va = node(a).val;
        const auto& vb = node(b).val;
        for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = va[i] + vb[i];
        o.back = [this, a, b, out]() {
            const auto& g = node(out).grad;
            if (needs(a)) {
                auto& ga = node(a).grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (needs(b)) {
                auto& gb = node(b).grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        };
        return out;
    }

    V mul(V a, V b) {
        require_same(a, b, "mul");
        V out = fresh(shape(a), needs(a) || needs(b));
        auto& o = node(out);
        const auto& va = node(a).val;
        const auto& vb = node(b).val;
        for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = va[i] * vb[i];
        o.back = [this, a, b, out]() {
            const auto& g = node(out).grad;
            if (needs(a)) {
                auto& ga = node(a).grad;
                const auto& vb2 = node(b).val;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
            }
            if (needs(b)) {
                auto& gb = node(b).grad;
                const auto& va2 = node(a).val;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
            }
        };
        return out;
    }

    V scale(V a, double s) {
        V out = fresh(shape(a), needs(a));
        auto& o = node(out);
        const auto& va = node(a).val;
        for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = va[i] * s;
        o.back = [this, a, out, s]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            auto& ga = node(a).grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        };
        return out;
    }

    V relu(V a) {
        V out = fresh(shape(a), needs(a));
        auto& o = node(out);
        const auto& va = node(a).val;
        for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = va[i] > 0.0 ? va[i] : 0.0;
        o.back = [this, a, out]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            const auto& va2 = node(a).val;
            auto& ga = node(a).grad;
            // subgradient at 0 is 0
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += va2[i] > 0.0 ? g[i] : 0.0;
        };
        return out;
    }

    // ---- shape plumbing ----

    V reshape(V a, const Shape& to) {
        if (numel(to) != numel(shape(a))) {
            throw ShapeError("reshape: cannot view " + shape_str(shape(a)) + " as " + shape_str(to));
        }
        V out = fresh(to, needs(a));
        node(out).val = node(a).val;
        node(out).back = [this, a, out]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            auto& ga = node(a).grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
        return out;
    }

    // [A,B,C,D] -> [A,C,B,D]
    V transpose_0213(V a) {
        const Shape& s = shape(a);
        if (s.size() != 4) throw ShapeError("transpose_0213: expected rank 4, got " + shape_str(s));
        const int A = s[0], B = s[1], C = s[2], D = s[3];
        V out = fresh({A, C, B, D}, needs(a));
        auto& o = node(out);
        const auto& va = node(a).val;
        for (int i = 0; i < A; ++i) {
            for (int j = 0; j < B; ++j) {
                for (int k = 0; k < C; ++k) {
                    const double* src = va.data() + (((static_cast<std::size_t>(i) * B + j) * C + k) * D);
                    double* dst = o.val.data() + (((static_cast<std::size_t>(i) * C + k) * B + j) * D);
                    std::copy_n(src, D, dst);
                }
            }
        }
        o.back = [this, a, out, A, B, C, D]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            auto& ga = node(a).grad;
            for (int i = 0; i < A; ++i) {
                for (int k = 0; k < C; ++k) {
                    for (int j = 0; j < B; ++j) {
                        const double* src = g.data() + (((static_cast<std::size_t>(i) * C + k) * B + j) * D);
                        double* dst = ga.data() + (((static_cast<std::size_t>(i) * B + j) * C + k) * D);
                        for (int d = 0; d < D; ++d) dst[d] += src[d];
                    }
                }
            }
        };
        return out;
    }

    // [D] -> [B,D]
    V expand_batch(V a, int batch) {
        const Shape& s = shape(a);
        if (s.size() != 1) throw ShapeError("expand_batch: expected rank 1, got " + shape_str(s));
        const int D = s[0];
        V out = fresh({batch, D}, needs(a));
        auto& o = node(out);
        const auto& va = node(a).val;
        for (int b = 0; b < batch; ++b) std::copy_n(va.data(), D, o.val.data() + static_cast<std::size_t>(b) * D);
        o.back = [this, a, out, batch, D]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            auto& ga = node(a).grad;
            for (int b = 0; b < batch; ++b) {
                for (int d = 0; d < D; ++d) ga[static_cast<std::size_t>(d)] += g[static_cast<std::size_t>(b) * D + d];
            }
        };
        return out;
    }

    // k tensors of [B,D] -> [B,k,D]
    V stack_tokens(const std::vector<V>& tokens) {
        if (tokens.empty()) throw ShapeError("stack_tokens: empty token list");
        const Shape& s0 = shape(tokens[0]);
        if (s0.size() != 2) throw ShapeError("stack_tokens: expected rank-2 tokens");
        const int B = s0[0], D = s0[1];
        for (V t : tokens) {
            if (shape(t) != s0) {
                throw ShapeError("stack_tokens: mismatched token shapes " + shape_str(shape(t)) +
                                 " vs " + shape_str(s0));
            }
        }
        bool any = false;
        for (V t : tokens) any = any || needs(t);
        const int T = static_cast<int>(tokens.size());
        V out = fresh({B, T, D}, any);
        auto& o = node(out);
        for (int ti = 0; ti < T; ++ti) {
            const auto& vt = node(tokens[static_cast<std::size_t>(ti)]).val;
            for (int b = 0; b < B; ++b) {
                std::copy_n(vt.data() + static_cast<std::size_t>(b) * D, D,
                            o.val.data() + ((static_cast<std::size_t>(b) * T + ti) * D));
            }
        }
        std::vector<V> toks = tokens;
        o.back = [this, toks, out, B, T, D]() {
            const auto& g = node(out).grad;
            for (int ti = 0; ti < T; ++ti) {
                V t = toks[static_cast<std::size_t>(ti)];
                if (!needs(t)) continue;
                auto& gt = node(t).grad;
                for (int b = 0; b < B; ++b) {
                    const double* src = g.data() + ((static_cast<std::size_t>(b) * T + ti) * D);
                    double* dst = gt.data() + static_cast<std::size_t>(b) * D;
                    for (int d = 0; d < D; ++d) dst[d] += src[d];
                }
            }
        };
        return out;
    }

    // [B,T,D] -> [B,D] at token index t
    V select_token(V a, int t) {
        const Shape& s = shape(a);
        if (s.size() != 3) throw ShapeError("select_token: expected rank 3, got " + shape_str(s));
        const int B = s[0], T = s[1], D = s[2];
        if (t < 0 || t >= T) throw ShapeError("select_token: index out of range");
        V out = fresh({B, D}, needs(a));
        auto& o = node(out);
        const auto& va = node(a).val;
        for (int b = 0; b < B; ++b) {
            std::copy_n(va.data() + ((static_cast<std::size_t>(b) * T + t) * D), D,
                        o.val.data() + static_cast<std::size_t>(b) * D);
        }
        o.back = [this, a, out, t, B, T, D]() {
            if (!needs(a)) return;
            const auto& g = node(out).grad;
            auto& ga = node(a).grad;
            for (int b = 0; b < B; ++b) {
                const double* src = g.data() + static_cast<std::size_t>(b) * D;
                double* dst = ga.data() + ((static_cast<std::size_t>(b) * T + t) * D);
                for (int d = 0; d < D; ++d) dst[d] += src[d];
            }
        };
        return out;
    }

    // x[B,T,D] + pe[T,D], broadcast over batch
    V add_pos(V x, V pe) {
        const Shape& sx = shape(x);
        const Shape& sp = shape(pe);
        if (sx.size() != 3 || sp.size() != 2 || sx[1] != sp[0] || sx[2] != sp[1]) {
            throw ShapeError("add_pos: incompatible shapes " + shape_str(sx) + " and " +
                             shape_str(sp));
        }
        const int B = sx[0], T = sx[1], D = sx[2];
        V out = fresh(sx, needs(x) || needs(pe));
        auto& o = node(out);
        const auto& vx = node(x).val;
        const auto& vp = node(pe).val;
        for (int b = 0; b < B; ++b) {
            for (int t = 0; t < T; ++t) {
                const std::size_t xb = (static_cast<std::size_t>(b) * T + t) * D;
                const std::size_t pb = static_cast<std::size_t>(t) * D;
                for (int d = 0; d < D; ++d) o.val[xb + d] = vx[xb + d] + vp[pb + d];
            }
        }
        o.back = [this, x, pe, out, B, T, D]() {
            const auto& g = node(out).grad;
            if (needs(x)) {
                auto& gx = node(x).grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (needs(pe)) {
                auto& gp = node(pe).grad;
                for (int b = 0; b < B; ++b) {
                    for (int t = 0; t < T; ++t) {
                        const std::size_t xb = (static_cast<std::size_t>(b) * T + t) * D;
                        const std::size_t pb = static_cast<std::size_t>(t) * D;
                        for (int d = 0; d < D; ++d) gp[pb + d] += g[xb + d];
                    }
                }
            }
        };
        return out;
    }

    // ---- linear algebra ----

    // x[N,K] * w[K,M] + b[M]; also accepts x[...,K] flattened on leading dims
    V linear(V x, V w, V b) {
        const Shape& sx = shape(x);
        const Shape& sw = shape(w);
        const Shape& sb = shape(b);
        if (sw.size() != 2 || sb.size() != 1 || sw[1] != sb[0] || sx.empty() ||
            sx.back() != sw[0]) {
            throw ShapeError("linear: incompatible shapes x=" + shape_str(sx) +
                             " w=" + shape_str(sw) + " b=" + shape_str(sb));
        }
        const int K = sw[0], M = sw[1];
        const int N = static_cast<int>(numel(sx) / K);
        Shape out_shape = sx;
        out_shape.back() = M;
        V out = fresh(out_shape, needs(x) || needs(w) || needs(b));
        auto& o = node(out);
        std::fill(o.val.begin(), o.val.end(), 0.0);
        detail::mm_acc(node(x).val.data(), node(w).val.data(), o.val.data(), N, K, M);
        const auto& vb = node(b).val;
        for (int i = 0; i < N; ++i) {
            double* oi = o.val.data() + static_cast<std::size_t>(i) * M;
            for (int j = 0; j < M; ++j) oi[j] += vb[static_cast<std::size_t>(j)];
        }
        o.back = [this, x, w, b, out, N, K, M]() {
            const auto& g = node(out).grad;
            if (needs(x)) {
                detail::mm_acc_bt(g.data(), node(w).val.data(), node(x).grad.data(), N, M, K);
            }
            if (needs(w)) {
                detail::mm_acc_at(node(x).val.data(), g.data(), node(w).grad.data(), N, K, M);
            }
            if (needs(b)) {
                auto& gb = node(b).grad;
                for (int i = 0; i < N; ++i) {
                    const double* gi = g.data() + static_cast<std::size_t>(i) * M;
                    for (int j = 0; j < M; ++j) gb[static_cast<std::size_t>(j)] += gi[j];
                }
            }
        };
        return out;
    }

    // a[..,M,K] * b[..,K,N] with identical leading dims
    V bmm(V a, V b) { return bmm_impl(a, b, false); }
    // a[..,M,K] * b[..,N,K]^T
    V bmm_bt(V a, V b) { return bmm_impl(a, b, true); }

    // ---- normalization & activations ----

    // normalize over the last dim, then affine; gamma/beta shaped [D]
    V layer_norm(V x, V gamma, V beta, double eps = 1e-9) {
        const Shape& sx = shape(x);
        const int D = sx.back();
        if (shape(gamma) != Shape{D} || shape(beta) != Shape{D}) {
            throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(D) + "]");
        }
        const int N = static_cast<int>(numel(sx) / D);
        V out = fresh(sx, needs(x) || needs(gamma) || needs(beta));
        auto& o = node(out);
        auto* stats = new std::vector<double>(static_cast<std::size_t>(N) * 2);
        stats_.emplace_back(stats);
        const auto& vx = node(x).val;
        const auto& vg = node(gamma).val;
        const auto& vb = node(beta).val;
        for (int i = 0; i < N; ++i) {
            const double* xi = vx.data() + static_cast<std::size_t>(i) * D;
            double mu = 0.0;
            for (int d = 0; d < D; ++d) mu += xi[d];
            mu /= D;
            double var = 0.0;
            for (int d = 0; d < D; ++d) var += (xi[d] - mu) * (xi[d] - mu);
            var /= D;
            const double inv = 1.0 / std::sqrt(var + eps);
            (*stats)[static_cast<std::size_t>(i) * 2] = mu;
            (*stats)[static_cast<std::size_t>(i) * 2 + 1] = inv;
            double* oi = o.val.data() + static_cast<std::size_t>(i) * D;
            for (int d = 0; d < D; ++d) oi[d] = (xi[d] - mu) * inv * vg[static_cast<std::size_t>(d)] + vb[static_cast<std::size_t>(d)];
        }
        o.back = [this, x, gamma, beta, out, N, D, stats]() {
            const auto& g = node(out).grad;
            const auto& vx2 = node(x).val;
            const auto& vg2 = node(gamma).val;
            for (int i = 0; i < N; ++i) {
                const double mu = (*stats)[static_cast<std::size_t>(i) * 2];
                const double inv = (*stats)[static_cast<std::size_t>(i) * 2 + 1];
                const double* xi = vx2.data() + static_cast<std::size_t>(i) * D;
                const double* gi = g.data() + static_cast<std::size_t>(i) * D;
                if (needs(gamma) || needs(beta)) {
                    auto& gg = node(gamma).grad;
                    auto& gb = node(beta).grad;
                    for (int d = 0; d < D; ++d) {
                        const double xhat = (xi[d] - mu) * inv;
                        if (needs(gamma)) gg[static_cast<std::size_t>(d)] += gi[d] * xhat;
                        if (needs(beta)) gb[static_cast<std::size_t>(d)] += gi[d];
                    }
                }
                if (needs(x)) {
                    double sum_gy = 0.0, sum_gy_xhat = 0.0;
                    for (int d = 0; d < D; ++d) {
                        const double gy = gi[d] * vg2[static_cast<std::size_t>(d)];
                        const double xhat = (xi[d] - mu) * inv;
                        sum_gy += gy;
                        sum_gy_xhat += gy * xhat;
                    }
                    auto& gx = node(x).grad;
                    double* gxi = gx.data() + static_cast<std::size_t>(i) * D;
                    for (int d = 0; d < D; ++d) {
                        const double gy = gi[d] * vg2[static_cast<std::size_t>(d)];
                        const double xhat = (xi[d] - mu) * inv;
                        gxi[d] += inv * (gy - sum_gy / D - xhat * sum_gy_xhat / D);
                    }
                }
            }
        };
        return out;
    }

    // per-(sample, channel) normalization over the spatial extent of
    // x[N,C,H,W]; batch-independent so inference is deterministic
    V channel_norm(V x, V gamma, V beta, double eps = 1e-9) {
        const Shape& sx = shape(x);
        if (sx.size() != 4) throw ShapeError("channel_norm: expected [N,C,H,W], got " + shape_str(sx));
        const int N = sx[0], C = sx[1], HW = sx[2] * sx[3];
        if (shape(gamma) != Shape{C} || shape(beta) != Shape{C}) {
            throw ShapeError("channel_norm: gamma/beta must be [" + std::to_string(C) + "]");
        }
        V out = fresh(sx, needs(x) || needs(gamma) || needs(beta));
        auto& o = node(out);
        auto* stats = new std::vector<double>(static_cast<std::size_t>(N) * C * 2);
        stats_.emplace_back(stats);
        const auto& vx = node(x).val;
        const auto& vg = node(gamma).val;
        const auto& vb = node(beta).val;
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
                double mu = 0.0;
                for (int i = 0; i < HW; ++i) mu += vx[base + i];
                mu /= HW;
                double var = 0.0;
                for (int i = 0; i < HW; ++i) var += (vx[base + i] - mu) * (vx[base + i] - mu);
                var /= HW;
                const double inv = 1.0 / std::sqrt(var + eps);
                (*stats)[(static_cast<std::size_t>(n) * C + c) * 2] = mu;
                (*stats)[(static_cast<std::size_t>(n) * C + c) * 2 + 1] = inv;
                const double gc = vg[static_cast<std::size_t>(c)];
                const double bc = vb[static_cast<std::size_t>(c)];
                for (int i = 0; i < HW; ++i) o.val[base + i] = (vx[base + i] - mu) * inv * gc + bc;
            }
        }
        o.back = [this, x, gamma, beta, out, N, C, HW, stats]() {
            const auto& g = node(out).grad;
            const auto& vx2 = node(x).val;
            const auto& vg2 = node(gamma).val;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
                    const double mu = (*stats)[(static_cast<std::size_t>(n) * C + c) * 2];
                    const double inv = (*stats)[(static_cast<std::size_t>(n) * C + c) * 2 + 1];
                    if (needs(gamma) || needs(beta)) {
                        auto& gg = node(gamma).grad;
                        auto& gb = node(beta).grad;
                        double sg = 0.0, sb = 0.0;
                        for (int i = 0; i < HW; ++i) {
                            sg += g[base + i] * (vx2[base + i] - mu) * inv;
                            sb += g[base + i];
                        }
                        if (needs(gamma)) gg[static_cast<std::size_t>(c)] += sg;
                        if (needs(beta)) gb[static_cast<std::size_t>(c)] += sb;
                    }
                    if (needs(x)) {
                        const double gc = vg2[static_cast<std::size_t>(c)];
                        double sum_gy = 0.0, sum_gy_xhat = 0.0;
                        for (int i = 0; i < HW; ++i) {
                            const double gy = g[base + i] * gc;
                            const double xhat = (vx2[base + i] - mu) * inv;
                            sum_gy += gy;
                            sum_gy_xhat += gy * xhat;
                        }
                        auto& gx = node(x).grad;
                        for (int i = 0; i < HW; ++i) {
                            const double gy = g[base + i] * gc;
                            const double xhat = (vx2[base + i] - mu) * inv;
                            gx[base + i] += inv * (gy - sum_gy / HW - xhat * sum_gy_xhat / HW);
                        }
                    }
                }
            }
        };
        return out;
    }

    V softmax_lastdim(V x) {
        const Shape& sx = shape(x);
        const int D = sx.back();
        const int N = static_cast<int>(numel(sx) / D);
        V out = fresh(sx, needs(x));
        auto& o = node(out);
        const auto& vx = node(x).val;
        for (int i = 0; i < N; ++i) {
            const double* xi = vx.data() + static_cast<std::size_t>(i) * D;
            double* oi = o.val.data() + static_cast<std::size_t>(i) * D;
            double mx = xi[0];
            for (int d = 1; d < D; ++d) mx = std::max(mx, xi[d]);
            double sum = 0.0;
            for (int d = 0; d < D; ++d) {
                oi[d] = std::exp(xi[d] - mx);
                sum += oi[d];
            }
            for (int d = 0; d < D; ++d) oi[d] /= sum;
        }
        o.back = [this, x, out, N, D]() {
            if (!needs(x)) return;
            const auto& g = node(out).grad;
            const auto& vo = node(out).val;
            auto& gx = node(x).grad;
            for (int i = 0; i < N; ++i) {
                const double* gi = g.data() + static_cast<std::size_t>(i) * D;
                const double* oi = vo.data() + static_cast<std::size_t>(i) * D;
                double dot = 0.0;
                for (int d = 0; d < D; ++d) dot += gi[d] * oi[d];
                double* gxi = gx.data() + static_cast<std::size_t>(i) * D;
                for (int d = 0; d < D; ++d) gxi[d] += oi[d] * (gi[d] - dot);
            }
        };
        return out;
    }

    // ---- convolution & pooling ----

    // x[N,C,H,W], w[F,C,kh,kw], b[F]; standard cross-correlation
    V conv2d(V x, V w, V b, int stride = 1, int pad = 0) {
        const Shape& sx = shape(x);
        const Shape& sw = shape(w);
        if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1]) {
            throw ShapeError("conv2d: incompatible shapes x=" + shape_str(sx) +
                             " w=" + shape_str(sw));
        }
        const int N = sx[0], C = sx[1], H = sx[2], W = sx[3];
        const int F = sw[0], kh = sw[2], kw = sw[3];
        if (shape(b) != Shape{F}) throw ShapeError("conv2d: bias must be [" + std::to_string(F) + "]");
        const int OH = (H + 2 * pad - kh) / stride + 1;
        const int OW = (W + 2 * pad - kw) / stride + 1;
        if (OH <= 0 || OW <= 0) {
            throw ShapeError("conv2d: kernel " + shape_str(sw) + " does not fit input " +
                             shape_str(sx));
        }
        V out = fresh({N, F, OH, OW}, needs(x) || needs(w) || needs(b));
        auto& o = node(out);
        const int ckk = C * kh * kw;
        const int P = OH * OW;
        std::vector<double> col(static_cast<std::size_t>(ckk) * P);
        const auto& vx = node(x).val;
        const auto& vw = node(w).val;
        const auto& vb = node(b).val;
        for (int n = 0; n < N; ++n) {
            im2col(vx.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw, stride,
                   pad, OH, OW, col.data());
            double* on = o.val.data() + static_cast<std::size_t>(n) * F * P;
            std::fill(on, on + static_cast<std::size_t>(F) * P, 0.0);
            detail::mm_acc(vw.data(), col.data(), on, F, ckk, P);
            for (int f = 0; f < F; ++f) {
                const double bias = vb[static_cast<std::size_t>(f)];
                double* of = on + static_cast<std::size_t>(f) * P;
                for (int i = 0; i < P; ++i) of[i] += bias;
            }
        }
        o.back = [this, x, w, b, out, N, C, H, W, F, kh, kw, stride, pad, OH, OW]() {
            const int ckk2 = C * kh * kw;
            const int P2 = OH * OW;
            std::vector<double> col(static_cast<std::size_t>(ckk2) * P2);
            std::vector<double> dcol(static_cast<std::size_t>(ckk2) * P2);
            const auto& g = node(out).grad;
            const auto& vx2 = node(x).val;
            const auto& vw2 = node(w).val;
            for (int n = 0; n < N; ++n) {
                const double* gn = g.data() + static_cast<std::size_t>(n) * F * P2;
                if (needs(w)) {
                    im2col(vx2.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw,
                           stride, pad, OH, OW, col.data());
                    detail::mm_acc_bt(gn, col.data(), node(w).grad.data(), F, P2, ckk2);
                }
                if (needs(b)) {
                    auto& gb = node(b).grad;
                    for (int f = 0; f < F; ++f) {
                        const double* gf = gn + static_cast<std::size_t>(f) * P2;
                        double acc = 0.0;
                        for (int i = 0; i < P2; ++i) acc += gf[i];
                        gb[static_cast<std::size_t>(f)] += acc;
                    }
                }
                if (needs(x)) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    detail::mm_acc_at(vw2.data(), gn, dcol.data(), F, ckk2, P2);
                    col2im(dcol.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                           node(x).grad.data() + static_cast<std::size_t>(n) * C * H * W);
                }
            }
        };
        return out;
    }

    // non-overlapping average pooling, floor semantics
    V avg_pool2d(V x, int k) {
        const Shape& sx = shape(x);
        if (sx.size() != 4) throw ShapeError("avg_pool2d: expected [N,C,H,W]");
        if (k < 1) throw ArgumentError("avg_pool2d: k must be >= 1");
        const int N = sx[0], C = sx[1], H = sx[2], W = sx[3];
        const int OH = H / k, OW = W / k;
        if (OH == 0 || OW == 0) throw ShapeError("avg_pool2d: pool exceeds input");
        V out = fresh({N, C, OH, OW}, needs(x));
        auto& o = node(out);
        const auto& vx = node(x).val;
        const double inv = 1.0 / (k * k);
        for (int nc = 0; nc < N * C; ++nc) {
            const double* xp = vx.data() + static_cast<std::size_t>(nc) * H * W;
            double* op = o.val.data() + static_cast<std::size_t>(nc) * OH * OW;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    double acc = 0.0;
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            acc += xp[static_cast<std::size_t>(oy * k + dy) * W + (ox * k + dx)];
                        }
                    }
                    op[static_cast<std::size_t>(oy) * OW + ox] = acc * inv;
                }
            }
        }
        o.back = [this, x, out, N, C, H, W, OH, OW, k, inv]() {
            if (!needs(x)) return;
            const auto& g = node(out).grad;
            auto& gx = node(x).grad;
            for (int nc = 0; nc < N * C; ++nc) {
                const double* gp = g.data() + static_cast<std::size_t>(nc) * OH * OW;
                double* xp = gx.data() + static_cast<std::size_t>(nc) * H * W;
                for (int oy = 0; oy < OH; ++oy) {
                    for (int ox = 0; ox < OW; ++ox) {
                        const double gv = gp[static_cast<std::size_t>(oy) * OW + ox] * inv;
                        for (int dy = 0; dy < k; ++dy) {
                            for (int dx = 0; dx < k; ++dx) {
                                xp[static_cast<std::size_t>(oy * k + dy) * W + (ox * k + dx)] += gv;
                            }
                        }
                    }
                }
            }
        };
        return out;
    }

    // global average pool [N,C,H,W] -> [N,C]
    V gap(V x) {
        const Shape& sx = shape(x);
        if (sx.size() != 4) throw ShapeError("gap: expected [N,C,H,W], got " + shape_str(sx));
        const int N = sx[0], C = sx[1], HW = sx[2] * sx[3];
        V out = fresh({N, C}, needs(x));
        auto& o = node(out);
        const auto& vx = node(x).val;
        for (int nc = 0; nc < N * C; ++nc) {
            const double* xp = vx.data() + static_cast<std::size_t>(nc) * HW;
            double acc = 0.0;
            for (int i = 0; i < HW; ++i) acc += xp[i];
            o.val[static_cast<std::size_t>(nc)] = acc / HW;
        }
        o.back = [this, x, out, N, C, HW]() {
            if (!needs(x)) return;
            const auto& g = node(out).grad;
            auto& gx = node(x).grad;
            for (int nc = 0; nc < N * C; ++nc) {
                const double gv = g[static_cast<std::size_t>(nc)] / HW;
                double* xp = gx.data() + static_cast<std::size_t>(nc) * HW;
                for (int i = 0; i < HW; ++i) xp[i] += gv;
            }
        };
        return out;
    }

    V sum_all(V a) {
        V out = fresh({1}, needs(a));
        auto& o = node(out);
        double acc = 0.0;
        for (double v : node(a).val) acc += v;
        o.val[0] = acc;
        o.back = [this, a, out]() {
            if (!needs(a)) return;
            const double g = node(out).grad[0];
            auto& ga = node(a).grad;
            for (auto& v : ga) v += g;
        };
        return out;
    }

    // mean over batch of -log softmax(logits)[label]; optional per-class
    // weights rescale each sample's contribution (weighted mean)
    V cross_entropy(V logits, const std::vector<int>& labels,
                    const std::vector<double>& class_weights = {}) {
        const Shape& sx = shape(logits);
        if (sx.size() != 2) throw ShapeError("cross_entropy: expected [N,K] logits");
        const int N = sx[0], K = sx[1];
        if (static_cast<int>(labels.size()) != N) {
            throw ShapeError("cross_entropy: labels size " + std::to_string(labels.size()) +
                             " does not match batch " + std::to_string(N));
        }
        if (!class_weights.empty() && static_cast<int>(class_weights.size()) != K) {
            throw ShapeError("cross_entropy: class_weights must have K entries");
        }
        for (int l : labels) {
            if (l < 0 || l >= K) {
                throw ArgumentError("cross_entropy: label " + std::to_string(l) +
                                    " out of range [0," + std::to_string(K - 1) + "]");
            }
        }
        V out = fresh({1}, needs(logits));
        auto& o = node(out);
        const auto& vx = node(logits).val;
        auto* probs = new std::vector<double>(static_cast<std::size_t>(N) * K);
        stats_.emplace_back(probs);
        auto* w = new std::vector<double>(static_cast<std::size_t>(N), 1.0);
        stats_.emplace_back(w);
        double wsum = 0.0;
        for (int i = 0; i < N; ++i) {
            if (!class_weights.empty()) {
                (*w)[static_cast<std::size_t>(i)] =
                    class_weights[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
            }
            wsum += (*w)[static_cast<std::size_t>(i)];
        }
        double loss = 0.0;
        for (int i = 0; i < N; ++i) {
            const double* xi = vx.data() + static_cast<std::size_t>(i) * K;
            double mx = xi[0];
            for (int d = 1; d < K; ++d) mx = std::max(mx, xi[d]);
            double sum = 0.0;
            for (int d = 0; d < K; ++d) sum += std::exp(xi[d] - mx);
            const double lse = mx + std::log(sum);
            loss -= (*w)[static_cast<std::size_t>(i)] * (xi[labels[static_cast<std::size_t>(i)]] - lse);
            for (int d = 0; d < K; ++d) {
                (*probs)[static_cast<std::size_t>(i) * K + d] = std::exp(xi[d] - lse);
            }
        }
        o.val[0] = loss / wsum;
        std::vector<int> labels_copy = labels;
        o.back = [this, logits, out, N, K, probs, w, wsum, labels_copy]() {
            if (!needs(logits)) return;
            const double g = node(out).grad[0] / wsum;
            auto& gx = node(logits).grad;
            for (int i = 0; i < N; ++i) {
                const double wi = (*w)[static_cast<std::size_t>(i)];
                for (int d = 0; d < K; ++d) {
                    const double onehot = d == labels_copy[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    gx[static_cast<std::size_t>(i) * K + d] +=
                        g * wi * ((*probs)[static_cast<std::size_t>(i) * K + d] - onehot);
                }
            }
        };
        return out;
    }

    // Seeds d(loss)/d(loss) = 1 and walks nodes in reverse creation order,
    // then accumulates parameter-leaf gradients into their stores.
    void backward(V loss) {
        if (numel(shape(loss)) != 1) throw ShapeError("backward: loss must be scalar");
        for (auto& n : nodes_) {
            if (n->needs_grad) n->grad.assign(n->val.size(), 0.0);
        }
        node(loss).grad.assign(1, 1.0);
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i]->needs_grad && nodes_[i]->back) nodes_[i]->back();
        }
        for (auto& n : nodes_) {
            if (n->writeback) {
                for (std::size_t i = 0; i < n->grad.size(); ++i) n->writeback->grad[i] += n->grad[i];
                n->writeback->has_grad = true;
            }
        }
    }

private:
    V fresh(const Shape& shape, bool needs_grad) {
        auto n = std::make_unique<Node>();
        n->shape = shape;
        n->val.resize(static_cast<std::size_t>(numel(shape)));
        n->needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<V>(nodes_.size() - 1);
    }

    bool needs(V id) const { return node(id).needs_grad; }

    void require_same(V a, V b, const char* what) const {
        if (shape(a) != shape(b)) {
            throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(shape(a)) +
                             " vs " + shape_str(shape(b)));
        }
    }

    V bmm_impl(V a, V b, bool b_transposed) {
        const Shape& sa = shape(a);
        const Shape& sb = shape(b);
        if (sa.size() < 2 || sa.size() != sb.size()) {
            throw ShapeError("bmm: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
        }
        long batch = 1;
        for (std::size_t i = 0; i + 2 < sa.size(); ++i) {
            if (sa[i] != sb[i]) throw ShapeError("bmm: batch mismatch " + shape_str(sa) + " vs " + shape_str(sb));
            batch *= sa[i];
        }
        const int M = sa[sa.size() - 2], K = sa[sa.size() - 1];
        const int Kb = b_transposed ? sb[sb.size() - 1] : sb[sb.size() - 2];
        const int Nb = b_transposed ? sb[sb.size() - 2] : sb[sb.size() - 1];
        if (K != Kb) throw ShapeError("bmm: inner dim mismatch " + shape_str(sa) + " vs " + shape_str(sb));
        Shape out_shape(sa.begin(), sa.end() - 2);
        out_shape.push_back(M);
        out_shape.push_back(Nb);
        V out = fresh(out_shape, needs(a) || needs(b));
        auto& o = node(out);
        std::fill(o.val.begin(), o.val.end(), 0.0);
        const auto& va = node(a).val;
        const auto& vb = node(b).val;
        for (long bt = 0; bt < batch; ++bt) {
            const double* ap = va.data() + static_cast<std::size_t>(bt) * M * K;
            const double* bp = vb.data() + static_cast<std::size_t>(bt) * K * Nb;
            double* op = o.val.data() + static_cast<std::size_t>(bt) * M * Nb;
            if (b_transposed) {
                detail::mm_acc_bt(ap, bp, op, M, K, Nb);
            } else {
                detail::mm_acc(ap, bp, op, M, K, Nb);
            }
        }
        o.back = [this, a, b, out, batch, M, K, Nb, b_transposed]() {
            const auto& g = node(out).grad;
            const auto& va2 = node(a).val;
            const auto& vb2 = node(b).val;
            for (long bt = 0; bt < batch; ++bt) {
                const double* gp = g.data() + static_cast<std::size_t>(bt) * M * Nb;
                const double* ap = va2.data() + static_cast<std::size_t>(bt) * M * K;
                const double* bp = vb2.data() + static_cast<std::size_t>(bt) * K * Nb;
                if (needs(a)) {
                    double* gap2 = node(a).grad.data() + static_cast<std::size_t>(bt) * M * K;
                    if (b_transposed) {
                        // dA = dC * B
                        detail::mm_acc(gp, bp, gap2, M, Nb, K);
                    } else {
                        detail::mm_acc_bt(gp, bp, gap2, M, Nb, K);
                    }
                }
                if (needs(b)) {
                    double* gbp = node(b).grad.data() + static_cast<std::size_t>(bt) * K * Nb;
                    if (b_transposed) {
                        // dB = dC^T * A  (B stored as [Nb,K])
                        detail::mm_acc_at(gp, ap, gbp, M, Nb, K);
                    } else {
                        detail::mm_acc_at(ap, gp, gbp, M, K, Nb);
                    }
                }
            }
        };
        return out;
    }

    static void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad,
                       int OH, int OW, double* col) {
        std::size_t r = 0;
        for (int c = 0; c < C; ++c) {
            for (int ki = 0; ki < kh; ++ki) {
                for (int kj = 0; kj < kw; ++kj, ++r) {
                    double* dst = col + r * static_cast<std::size_t>(OH) * OW;
                    for (int oy = 0; oy < OH; ++oy) {
                        const int iy = oy * stride - pad + ki;
                        if (iy < 0 || iy >= H) {
                            for (int ox = 0; ox < OW; ++ox) dst[static_cast<std::size_t>(oy) * OW + ox] = 0.0;
                            continue;
                        }
                        for (int ox = 0; ox < OW; ++ox) {
                            const int ix = ox * stride - pad + kj;
                            dst[static_cast<std::size_t>(oy) * OW + ox] =
                                (ix >= 0 && ix < W)
                                    ? x[(static_cast<std::size_t>(c) * H + iy) * W + ix]
                                    : 0.0;
                        }
                    }
                }
            }
        }
    }

    static void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                       int OH, int OW, double* x) {
        std::size_t r = 0;
        for (int c = 0; c < C; ++c) {
            for (int ki = 0; ki < kh; ++ki) {
                for (int kj = 0; kj < kw; ++kj, ++r) {
                    const double* src = col + r * static_cast<std::size_t>(OH) * OW;
                    for (int oy = 0; oy < OH; ++oy) {
                        const int iy = oy * stride - pad + ki;
                        if (iy < 0 || iy >= H) continue;
                        for (int ox = 0; ox < OW; ++ox) {
                            const int ix = ox * stride - pad + kj;
                            if (ix >= 0 && ix < W) {
                                x[(static_cast<std::size_t>(c) * H + iy) * W + ix] +=
                                    src[static_cast<std::size_t>(oy) * OW + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::unique_ptr<std::vector<double>>> stats_;  // saved forward statistics
};

// ---------------------------------------------------------------------------
// Finite-difference verification harness
// ---------------------------------------------------------------------------

// loss_fn must rebuild the graph from the store's current values, run
// backward and return the loss. Central differences at h on a random
// subsample of at least min(min_coords, total) coordinates.
inline double grad_check(ParamStore& store, const std::function<double()>& loss_fn, Rng& rng,
                         int min_coords = 64, double h = 1e-5) {
    store.zero_grads();
    loss_fn();
    std::map<std::string, std::vector<double>> analytic;
    for (const auto& [name, p] : store.all()) analytic[name] = p.grad;

    std::vector<std::pair<std::string, std::size_t>> coords;
    for (const auto& [name, p] : store.all()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) coords.emplace_back(name, i);
    }
    if (static_cast<int>(coords.size()) > min_coords) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(min_coords); ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(coords.size() - 1 - i)));
            std::swap(coords[i], coords[j]);
        }
        coords.resize(static_cast<std::size_t>(min_coords));
    }

    double max_rel = 0.0;
    for (const auto& [name, idx] : coords) {
        auto& p = store.at(name);
        const double saved = p.value[idx];
        p.value[idx] = saved + h;
        store.zero_grads();
        const double lp = loss_fn();
        p.value[idx] = saved - h;
        store.zero_grads();
        const double lm = loss_fn();
        p.value[idx] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double a = analytic[name][idx];
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    store.zero_grads();
    return max_rel;
}

// Common initializers.
inline void init_kaiming(ParamStore::Param& p, Rng& rng, int fan_in) {
    const double s = std::sqrt(2.0 / fan_in);
    for (auto& x : p.value) x = rng.normal() * s;
}

// Kaiming draw with the per-filter DC component removed: each filter sums
// to zero over its receptive field, so flat image regions map to exactly
// zero response. Small-amplitude texture then stands out from step one.
inline void init_kaiming_zero_dc(ParamStore::Param& p, Rng& rng, int fan_in, double gain = 1.0) {
    if (p.shape.size() != 4) throw ArgumentError("init_kaiming_zero_dc: expected conv weights");
    init_kaiming(p, rng, fan_in);
    if (gain != 1.0) {
        for (auto& x : p.value) x *= gain;
    }
    const long per_filter = numel(p.shape) / p.shape[0];
    for (int f = 0; f < p.shape[0]; ++f) {
        double* w = p.value.data() + static_cast<std::size_t>(f) * per_filter;
        double mean = 0.0;
        for (long i = 0; i < per_filter; ++i) mean += w[i];
        mean /= static_cast<double>(per_filter);
        for (long i = 0; i < per_filter; ++i) w[i] -= mean;
    }
}

inline void init_uniform(ParamStore::Param& p, Rng& rng, double lo, double hi) {
    for (auto& x : p.value) x = rng.uniform(lo, hi);
}

inline void init_const(ParamStore::Param& p, double v) {
    std::fill(p.value.begin(), p.value.end(), v);
}

}  // namespace ad2::nn
