#pragma once

// Mini-batch SGD with classical momentum, held-out evaluation and
// inference (forward -> nearest permutation -> recovered sequence).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "permlearn/assignment.hpp"
#include "permlearn/error.hpp"
#include "permlearn/model.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sequence.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

struct TrainConfig {
    double learning_rate = 1e-2;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t iterations = 2000;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    SinkhornConfig sinkhorn;
    LossKind loss_kind = LossKind::sinkhorn_ce;
    /// Evaluate every this many steps; 0 evaluates at the end of every epoch.
    std::size_t eval_every = 0;
    /// Threads used to compute per-sample gradients. Results do not depend on it.
    std::size_t workers = 1;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw InvalidArgumentError("learning_rate must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgumentError("momentum must lie in [0, 1)");
        if (batch_size == 0) throw InvalidArgumentError("batch_size must be positive");
        if (iterations == 0) throw InvalidArgumentError("iterations must be positive");
        if (!(weight_decay >= 0.0)) throw InvalidArgumentError("weight_decay must be >= 0");
        if (workers == 0) throw InvalidArgumentError("workers must be positive");
        sinkhorn.validate();
    }
};

/// v <- momentum * v - lr * g;  theta <- theta + v.
inline void sgd_step(ModelParams& params, const ModelParams& grads, const TrainConfig& cfg, ModelParams& velocity,
                     std::size_t iteration = 0) {
    if (!(grads.dims == params.dims) || !(velocity.dims == params.dims))
        throw ShapeError("sgd_step: parameter, gradient and velocity shapes differ");
    if (!grads.all_finite()) throw TrainingDivergenceError("non-finite gradient", iteration);
    auto update = [&](std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& v) {
        for (std::size_t k = 0; k < theta.size(); ++k) {
            v[k] = cfg.momentum * v[k] - cfg.learning_rate * g[k];
            theta[k] += v[k];
        }
    };
    update(params.encoder_w, grads.encoder_w, velocity.encoder_w);
    update(params.encoder_b, grads.encoder_b, velocity.encoder_b);
    update(params.head_w, grads.head_w, velocity.head_w);
    update(params.head_b, grads.head_b, velocity.head_b);
    update(params.score_w, grads.score_w, velocity.score_w);
    update(params.score_b, grads.score_b, velocity.score_b);
}

struct Prediction {
    Permutation perm;
    /// Doubly-stochastic output (Sinkhorn head) or entrywise sigmoid (naive head).
    Matrix q;
    std::vector<FeatureVector> recovered;
};

/// Forward with Sinkhorn iterated to convergence, round to the nearest
/// permutation, and undo the shuffle.
inline Prediction predict(const ModelParams& params, const std::vector<FeatureVector>& shuffled,
                          const SinkhornConfig& cfg, HeadKind head = HeadKind::sinkhorn) {
    const ForwardCache cache = forward(params, shuffled, cfg.inference(), head);
    AssignmentResult r = round_to_permutation(cache.output);
    auto recovered = recover(r.perm, shuffled);
    return {std::move(r.perm), cache.output, std::move(recovered)};
}

struct EvalMetrics {
    double loss = 0.0;
    double kt = 0.0;
    double hs = 0.0;
    double ne = 0.0;
    std::size_t count = 0;
};

/// Mean loss (training-mode forward) and KT/HS/NE (inference-mode
/// prediction) over samples whose `perm` fields hold the test shuffles.
inline EvalMetrics evaluate(const ModelParams& params, const std::vector<SequenceSample>& samples,
                            const SinkhornConfig& cfg, LossKind loss_kind) {
    EvalMetrics m;
    const HeadKind head = head_for(loss_kind);
    for (const auto& s : samples) {
        const auto shuffled = s.shuffled();
        const ForwardCache cache = forward(params, shuffled, cfg, head);
        m.loss += loss_for(cache, s.perm).value;
        const Prediction p = predict(params, shuffled, cfg, head);
        m.kt += kendall_tau(p.perm, s.perm);
        m.hs += hamming_similarity(p.perm, s.perm);
        m.ne += normalization_error(p.q);
        ++m.count;
    }
    if (m.count) {
        const double n = static_cast<double>(m.count);
        m.loss /= n;
        m.kt /= n;
        m.hs /= n;
        m.ne /= n;
    }
    return m;
}

/// Draws one fixed shuffle per sample for use as an evaluation set.
inline std::vector<SequenceSample> with_random_shuffles(std::vector<SequenceSample> samples, Rng& rng) {
    for (auto& s : samples) s.perm = sample_permutation(s.length(), rng);
    return samples;
}

struct LogEntry {
    std::size_t iteration = 0;
    double loss = 0.0;  // held-out loss
    double kt = 0.0;
    double hs = 0.0;
    double ne = 0.0;
    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void write_metrics_log(std::ostream& os, const std::vector<LogEntry>& log) {
    os << "iter,loss,kt,hs,ne\n";
    for (const auto& e : log)
        os << e.iteration << ',' << format_number(e.loss) << ',' << format_number(e.kt) << ','
           << format_number(e.hs) << ',' << format_number(e.ne) << '\n';
}

struct TrainResult {
    ModelParams params;
    std::vector<LogEntry> log;
    /// Mean training loss of each completed epoch.
    std::vector<double> epoch_train_loss;
};

using TrainProgress = std::function<void(const LogEntry&)>;

namespace detail {

struct SampleGrad {
    ModelParams grads;
    double loss = 0.0;
};

inline SampleGrad sample_gradient(const ModelParams& params, const std::vector<FeatureVector>& shuffled,
                                  const Permutation& perm, const TrainConfig& cfg) {
    const ForwardCache cache = forward(params, shuffled, cfg.sinkhorn, head_for(cfg.loss_kind));
    const LossValue lv = loss_for(cache, perm);
    return {backward(params, cache, lv.grad, 0.0).params, lv.value};
}

}  // namespace detail

/// Mini-batch training on freshly shuffled copies of `train_set`. The
/// held-out set is evaluated with its stored shuffles. Deterministic for a
/// given seed regardless of cfg.workers.
inline TrainResult train(const std::vector<SequenceSample>& train_set, const std::vector<SequenceSample>& heldout,
                         const ModelDims& dims, const TrainConfig& cfg, const TrainProgress& progress = {}) {
    cfg.validate();
    dims.validate();
    if (train_set.empty()) throw InvalidArgumentError("train: empty training set");
    for (const auto& s : train_set)
        if (s.length() != dims.l) throw ShapeError("train: sample length does not match model");

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = ModelParams::he_normal(dims, rng);
    ModelParams velocity = ModelParams::zeros(dims);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();  // forces a reshuffle on the first draw
    const std::size_t steps_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;

    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;

    auto run_eval = [&](std::size_t iteration) {
        const EvalMetrics m = evaluate(result.params, heldout, cfg.sinkhorn, cfg.loss_kind);
        LogEntry e{iteration, m.loss, m.kt, m.hs, m.ne};
        if (!std::isfinite(e.loss)) throw TrainingDivergenceError("non-finite held-out loss", iteration);
        result.log.push_back(e);
        if (progress) progress(e);
    };

    std::vector<std::size_t> batch;
    std::vector<Permutation> perms;
    std::vector<detail::SampleGrad> slots;
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        batch.clear();
        perms.clear();
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
            perms.push_back(sample_permutation(dims.l, rng));
        }

        slots.assign(batch.size(), {});
        auto work = [&](std::size_t begin, std::size_t stride) {
            for (std::size_t b = begin; b < batch.size(); b += stride) {
                const auto& s = train_set[batch[b]];
                slots[b] = detail::sample_gradient(result.params, apply_permutation(perms[b], s.items), perms[b], cfg);
            }
        };
        if (cfg.workers > 1) {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < cfg.workers; ++w) pool.emplace_back(work, w, cfg.workers);
        } else {
            work(0, 1);
        }

        // Reduction in batch order keeps the result independent of the worker count.
        ModelParams grads = ModelParams::zeros(dims);
        double batch_loss = 0.0;
        for (const auto& s : slots) {
            grads.axpy(1.0, s.grads);
            batch_loss += s.loss;
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        grads.scale(inv);
        batch_loss *= inv;
        if (!std::isfinite(batch_loss)) throw TrainingDivergenceError("non-finite training loss", it);
        if (cfg.weight_decay != 0.0) grads.axpy(2.0 * cfg.weight_decay, result.params);
        sgd_step(result.params, grads, cfg, velocity, it);
        epoch_loss += batch_loss;
        ++epoch_steps;

        const bool epoch_done = it % steps_per_epoch == 0;
        if (epoch_done) {
            result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));
            epoch_loss = 0.0;
            epoch_steps = 0;
        }
        const bool due = cfg.eval_every > 0 ? it % cfg.eval_every == 0 : epoch_done;
        if (due || it == cfg.iterations) run_eval(it);
    }
    return result;
}

}  // namespace permlearn
