#pragma once

// Siamese permutation network at toy scale.
//
//   each item x_i (d) --shared encoder, ReLU--> e_i (h)
//   concat(e_0 .. e_{l-1}) (l*h) --head, ReLU--> g (h2)
//   g --score layer--> l*l scores, reshaped row-major to l x l
//   scores --exp + eps--> Sinkhorn --> doubly-stochastic Q
//
// The sigmoid head replaces the last step by an elementwise sigmoid and is
// trained with per-entry binary cross-entropy (the unnormalized baseline).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

struct ModelDims {
    std::size_t d = 0;   // item feature dimension
    std::size_t h = 0;   // encoder width
    std::size_t h2 = 0;  // head width
    std::size_t l = 0;   // sequence length

    void validate() const {
        if (d == 0 || h == 0 || h2 == 0 || l == 0) throw InvalidArgumentError("model dimensions must be positive");
    }
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class HeadKind { sinkhorn, sigmoid };

/// Loss used for training. sinkhorn_ce pairs with the Sinkhorn head,
/// naive_sigmoid_ce with the sigmoid head.
enum class LossKind { sinkhorn_ce, naive_sigmoid_ce };

inline HeadKind head_for(LossKind k) { return k == LossKind::sinkhorn_ce ? HeadKind::sinkhorn : HeadKind::sigmoid; }

inline std::string_view to_string(LossKind k) {
    return k == LossKind::sinkhorn_ce ? "sinkhorn_ce" : "naive_sigmoid_ce";
}

inline LossKind parse_loss_kind(std::string_view s) {
    if (s == "sinkhorn_ce" || s == "sinkhorn") return LossKind::sinkhorn_ce;
    if (s == "naive_sigmoid_ce" || s == "naive") return LossKind::naive_sigmoid_ce;
    throw InvalidArgumentError("unknown loss kind '" + std::string(s) + "'");
}

/// Weights of the encoder, head and score layers. Weight matrices are stored
/// row-major as (fan_in x fan_out). Also used to hold gradients.
struct ModelParams {
    ModelDims dims;
    std::vector<double> encoder_w;  // d x h
    std::vector<double> encoder_b;  // h
    std::vector<double> head_w;     // (l*h) x h2
    std::vector<double> head_b;     // h2
    std::vector<double> score_w;    // h2 x (l*l)
    std::vector<double> score_b;    // l*l

    static ModelParams zeros(const ModelDims& dims) {
        dims.validate();
        ModelParams p;
        p.dims = dims;
        p.encoder_w.assign(dims.d * dims.h, 0.0);
        p.encoder_b.assign(dims.h, 0.0);
        p.head_w.assign(dims.l * dims.h * dims.h2, 0.0);
        p.head_b.assign(dims.h2, 0.0);
        p.score_w.assign(dims.h2 * dims.l * dims.l, 0.0);
        p.score_b.assign(dims.l * dims.l, 0.0);
        return p;
    }

    /// Gaussian weights with standard deviation sqrt(2 / fan_in), zero biases.
    static ModelParams he_normal(const ModelDims& dims, Rng& rng) {
        ModelParams p = zeros(dims);
        auto fill = [&rng](std::vector<double>& w, std::size_t fan_in) {
            std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
            for (double& v : w) v = n(rng);
        };
        fill(p.encoder_w, dims.d);
        fill(p.head_w, dims.l * dims.h);
        fill(p.score_w, dims.h2);
        return p;
    }

    struct TensorInfo {
        std::string_view name;
        std::vector<std::size_t> shape;
    };

    /// Visits (name, shape, values) for each tensor in a fixed order.
    template <typename F>
    void for_each_tensor(F&& f) {
        const auto& d = dims;
        f(std::string_view("encoder.weight"), std::vector<std::size_t>{d.d, d.h}, encoder_w);
        f(std::string_view("encoder.bias"), std::vector<std::size_t>{d.h}, encoder_b);
        f(std::string_view("head.weight"), std::vector<std::size_t>{d.l * d.h, d.h2}, head_w);
        f(std::string_view("head.bias"), std::vector<std::size_t>{d.h2}, head_b);
        f(std::string_view("score.weight"), std::vector<std::size_t>{d.h2, d.l * d.l}, score_w);
        f(std::string_view("score.bias"), std::vector<std::size_t>{d.l * d.l}, score_b);
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<ModelParams*>(this)->for_each_tensor(
            [&f](std::string_view name, std::vector<std::size_t> shape, std::vector<double>& values) {
                f(name, std::move(shape), static_cast<const std::vector<double>&>(values));
            });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_tensor([&n](std::string_view, const std::vector<std::size_t>&, const std::vector<double>& v) {
            n += v.size();
        });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&ok](std::string_view, const std::vector<std::size_t>&, const std::vector<double>& v) {
            for (double x : v) ok = ok && std::isfinite(x);
        });
        return ok;
    }

    /// FNV-1a style hash over the bit patterns of every value (one 64-bit
    /// word per step). Used to detect forward caches from other parameters.
    std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ull;
        for_each_tensor([&h](std::string_view, const std::vector<std::size_t>&, const std::vector<double>& v) {
            for (double x : v) {
                std::uint64_t bits;
                std::memcpy(&bits, &x, sizeof bits);
                h = (h ^ bits) * 1099511628211ull;
            }
            h = (h ^ v.size()) * 1099511628211ull;
        });
        return h;
    }

    /// this += alpha * other.
    void axpy(double alpha, const ModelParams& other) {
        if (!(other.dims == dims)) throw ShapeError("ModelParams::axpy: dimension mismatch");
        auto add = [alpha](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += alpha * b[k];
        };
        add(encoder_w, other.encoder_w);
        add(encoder_b, other.encoder_b);
        add(head_w, other.head_w);
        add(head_b, other.head_b);
        add(score_w, other.score_w);
        add(score_b, other.score_b);
    }

    void scale(double alpha) {
        for_each_tensor([alpha](std::string_view, const std::vector<std::size_t>&, std::vector<double>& v) {
            for (double& x : v) x *= alpha;
        });
    }

    double squared_norm() const {
        double s = 0.0;
        for_each_tensor([&s](std::string_view, const std::vector<std::size_t>&, const std::vector<double>& v) {
            for (double x : v) s += x * x;
        });
        return s;
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Intermediates of one forward pass.
struct ForwardCache {
    ModelDims dims;
    HeadKind head = HeadKind::sinkhorn;
    std::uint64_t params_fingerprint = 0;
    SinkhornConfig sinkhorn;
    Matrix inputs;       // l x d
    Matrix encoder_pre;  // l x h
    Matrix encoder_out;  // l x h
    std::vector<double> head_pre;  // h2
    std::vector<double> head_out;  // h2
    Matrix scores;   // l x l
    Matrix positive; // l x l, Sinkhorn input (sinkhorn head only)
    TapeCache tape;
    Matrix output;   // Q: doubly-stochastic (sinkhorn) or sigmoid(scores)
};

namespace detail {

inline Matrix stack_items(const ModelDims& dims, std::span<const std::vector<double>> items) {
    if (items.size() != dims.l)
        throw ShapeError("model: sequence length " + std::to_string(items.size()) + " != " + std::to_string(dims.l));
    Matrix x(dims.l, dims.d);
    for (std::size_t i = 0; i < dims.l; ++i) {
        if (items[i].size() != dims.d)
            throw ShapeError("model: item " + std::to_string(i) + " has dimension " + std::to_string(items[i].size()) +
                             ", expected " + std::to_string(dims.d));
        std::copy(items[i].begin(), items[i].end(), x.row(i).begin());
    }
    return x;
}

inline double sigmoid(double s) {
    if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// y[j] += sum_k x[k] * w[k][j] for w stored (in x out) row-major.
inline void affine_accumulate(std::span<const double> x, const std::vector<double>& w, std::size_t out,
                              std::span<double> y) {
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* wk = w.data() + k * out;
        for (std::size_t j = 0; j < out; ++j) y[j] += xk * wk[j];
    }
}

}  // namespace detail

/// Runs the network on a shuffled sequence of l feature vectors.
inline ForwardCache forward(const ModelParams& params, std::span<const std::vector<double>> items,
                            const SinkhornConfig& cfg, HeadKind head = HeadKind::sinkhorn) {
    const ModelDims& dims = params.dims;
    ForwardCache c;
    c.dims = dims;
    c.head = head;
    c.sinkhorn = cfg;
    c.params_fingerprint = params.fingerprint();
    c.inputs = detail::stack_items(dims, items);

    c.encoder_pre = Matrix(dims.l, dims.h);
    c.encoder_out = Matrix(dims.l, dims.h);
    for (std::size_t i = 0; i < dims.l; ++i) {
        auto pre = c.encoder_pre.row(i);
        std::copy(params.encoder_b.begin(), params.encoder_b.end(), pre.begin());
        detail::affine_accumulate(c.inputs.row(i), params.encoder_w, dims.h, pre);
        auto out = c.encoder_out.row(i);
        for (std::size_t j = 0; j < dims.h; ++j) out[j] = std::max(0.0, pre[j]);
    }

    c.head_pre = params.head_b;
    detail::affine_accumulate(c.encoder_out.values(), params.head_w, dims.h2, c.head_pre);
    c.head_out.resize(dims.h2);
    for (std::size_t j = 0; j < dims.h2; ++j) c.head_out[j] = std::max(0.0, c.head_pre[j]);

    const std::size_t ll = dims.l * dims.l;
    c.scores = Matrix(dims.l, dims.l, params.score_b);
    detail::affine_accumulate(c.head_out, params.score_w, ll, c.scores.values());

    if (head == HeadKind::sinkhorn) {
        c.positive = to_positive(c.scores, cfg);
        auto [q, tape] = sinkhorn_forward(c.positive, cfg);
        c.output = std::move(q);
        c.tape = std::move(tape);
    } else {
        c.output = Matrix(dims.l, dims.l);
        for (std::size_t k = 0; k < ll; ++k) c.output.values()[k] = detail::sigmoid(c.scores.values()[k]);
    }
    return c;
}

inline ForwardCache forward(const ModelParams& params, const std::vector<std::vector<double>>& items,
                            const SinkhornConfig& cfg, HeadKind head = HeadKind::sinkhorn) {
    return forward(params, std::span<const std::vector<double>>(items), cfg, head);
}

struct LossValue {
    double value = 0.0;
    Matrix grad;  // gradient with respect to the loss input
};

/// Row-wise multi-class cross-entropy: L = -sum_ij P[i][j] log Q[i][j].
inline LossValue loss_sinkhorn_ce(const Matrix& q, const Permutation& p) {
    require_square(q, "loss_sinkhorn_ce");
    if (q.rows() != p.size()) throw ShapeError("loss_sinkhorn_ce: permutation length does not match matrix");
    LossValue out{0.0, Matrix(q.rows(), q.cols())};
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double qi = q(i, p[i]);
        if (!(qi > 0.0)) throw DomainError("loss_sinkhorn_ce: target entry must be positive");
        out.value -= std::log(qi);
        out.grad(i, p[i]) = -1.0 / qi;
    }
    return out;
}

inline LossValue loss_sinkhorn_ce(const DoublyStochasticMatrix& q, const Permutation& p) {
    return loss_sinkhorn_ce(q.matrix(), p);
}

/// Mean binary cross-entropy of sigmoid(scores) against the 0/1 entries of P.
inline LossValue loss_naive(const Matrix& scores, const Permutation& p) {
    require_square(scores, "loss_naive");
    if (scores.rows() != p.size()) throw ShapeError("loss_naive: permutation length does not match matrix");
    const std::size_t l = p.size();
    const double count = static_cast<double>(l * l);
    LossValue out{0.0, Matrix(l, l)};
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            const double s = scores(i, j);
            const double t = (p[i] == j) ? 1.0 : 0.0;
            // log(1 + exp(-|s|)) + max(s, 0) - s * t
            out.value += std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - s * t;
            out.grad(i, j) = (detail::sigmoid(s) - t) / count;
        }
    out.value /= count;
    return out;
}

/// Data loss for the configured head, with the gradient on the quantity
/// `backward` expects (Q for the Sinkhorn head, raw scores for the sigmoid head).
inline LossValue loss_for(const ForwardCache& cache, const Permutation& p) {
    return cache.head == HeadKind::sinkhorn ? loss_sinkhorn_ce(cache.output, p) : loss_naive(cache.scores, p);
}

struct Gradients {
    ModelParams params;
    Matrix inputs;  // l x d
};

/// Backpropagates `upstream` through the cached forward pass. For the
/// Sinkhorn head `upstream` is dL/dQ; for the sigmoid head it is dL/dscores.
/// Adds the weight-decay gradient 2 * weight_decay * theta.
inline Gradients backward(const ModelParams& params, const ForwardCache& cache, const Matrix& upstream,
                          double weight_decay = 0.0, bool want_input_grad = false) {
    const ModelDims& dims = params.dims;
    if (!(cache.dims == dims) || cache.params_fingerprint != params.fingerprint())
        throw InvariantViolation("backward: forward cache was produced with different parameters");
    if (upstream.rows() != dims.l || upstream.cols() != dims.l)
        throw ShapeError("backward: upstream gradient must be l x l");

    Gradients g{ModelParams::zeros(dims), Matrix()};
    const std::size_t ll = dims.l * dims.l;

    Matrix grad_scores;
    if (cache.head == HeadKind::sinkhorn) {
        const Matrix grad_positive = sinkhorn_backward(upstream, cache.tape);
        grad_scores = to_positive_backward(grad_positive, cache.scores, cache.sinkhorn);
    } else {
        grad_scores = upstream;
    }

    // score layer
    auto gs = grad_scores.values();
    std::copy(gs.begin(), gs.end(), g.params.score_b.begin());
    std::vector<double> grad_head_out(dims.h2, 0.0);
    for (std::size_t k = 0; k < dims.h2; ++k) {
        const double a = cache.head_out[k];
        const double* w = params.score_w.data() + k * ll;
        double* gw = g.params.score_w.data() + k * ll;
        double acc = 0.0;
        for (std::size_t j = 0; j < ll; ++j) {
            gw[j] = a * gs[j];
            acc += w[j] * gs[j];
        }
        grad_head_out[k] = acc;
    }

    // head layer
    std::vector<double> grad_head_pre(dims.h2);
    for (std::size_t j = 0; j < dims.h2; ++j) grad_head_pre[j] = cache.head_pre[j] > 0.0 ? grad_head_out[j] : 0.0;
    g.params.head_b = grad_head_pre;
    const auto z = cache.encoder_out.values();
    std::vector<double> grad_z(z.size(), 0.0);
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double* w = params.head_w.data() + k * dims.h2;
        double* gw = g.params.head_w.data() + k * dims.h2;
        double acc = 0.0;
        for (std::size_t j = 0; j < dims.h2; ++j) {
            gw[j] = z[k] * grad_head_pre[j];
            acc += w[j] * grad_head_pre[j];
        }
        grad_z[k] = acc;
    }

    // shared encoder: gradients from every item accumulate into one set of weights
    if (want_input_grad) g.inputs = Matrix(dims.l, dims.d);
    std::vector<double> grad_pre(dims.h);
    for (std::size_t i = 0; i < dims.l; ++i) {
        const auto pre = cache.encoder_pre.row(i);
        for (std::size_t j = 0; j < dims.h; ++j) grad_pre[j] = pre[j] > 0.0 ? grad_z[i * dims.h + j] : 0.0;
        for (std::size_t j = 0; j < dims.h; ++j) g.params.encoder_b[j] += grad_pre[j];
        const auto x = cache.inputs.row(i);
        for (std::size_t k = 0; k < dims.d; ++k) {
            const double xk = x[k];
            double* gw = g.params.encoder_w.data() + k * dims.h;
            if (xk != 0.0)
                for (std::size_t j = 0; j < dims.h; ++j) gw[j] += xk * grad_pre[j];
        }
        if (want_input_grad) {
            auto gx = g.inputs.row(i);
            for (std::size_t k = 0; k < dims.d; ++k) {
                const double* w = params.encoder_w.data() + k * dims.h;
                double acc = 0.0;
                for (std::size_t j = 0; j < dims.h; ++j) acc += w[j] * grad_pre[j];
                gx[k] = acc;
            }
        }
    }

    if (weight_decay != 0.0) g.params.axpy(2.0 * weight_decay, params);
    return g;
}

/// Per-item saliency: gradient of the sum of the selected entries of Q with
/// respect to each input item, reduced to magnitudes. Items are treated as
/// interleaved `channels`-channel pixels; each map entry is the largest
/// |gradient| across the channels of one pixel.
inline std::vector<std::vector<double>> saliency(const ModelParams& params, std::span<const std::vector<double>> items,
                                                 const SinkhornConfig& cfg,
                                                 std::span<const std::pair<std::size_t, std::size_t>> targets,
                                                 std::size_t channels = 1, HeadKind head = HeadKind::sinkhorn) {
    if (targets.empty()) throw InvalidArgumentError("saliency: target entry set is empty");
    const ModelDims& dims = params.dims;
    if (channels == 0 || dims.d % channels != 0)
        throw InvalidArgumentError("saliency: channel count must divide the feature dimension");
    const ForwardCache cache = forward(params, items, cfg, head);
    Matrix upstream(dims.l, dims.l);
    for (const auto& [i, j] : targets) {
        if (i >= dims.l || j >= dims.l) throw InvalidArgumentError("saliency: target entry out of range");
        upstream(i, j) = 1.0;
    }
    if (head == HeadKind::sigmoid) {
        // d sigmoid / d score
        for (std::size_t k = 0; k < upstream.size(); ++k) {
            const double s = cache.output.values()[k];
            upstream.values()[k] *= s * (1.0 - s);
        }
    }
    const Gradients g = backward(params, cache, upstream, 0.0, true);
    std::vector<std::vector<double>> maps(dims.l, std::vector<double>(dims.d / channels, 0.0));
    for (std::size_t i = 0; i < dims.l; ++i)
        for (std::size_t k = 0; k < dims.d; ++k) {
            double& m = maps[i][k / channels];
            m = std::max(m, std::abs(g.inputs(i, k)));
        }
    return maps;
}

}  // namespace permlearn
