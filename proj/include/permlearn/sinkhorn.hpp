#pragma once

// Sinkhorn normalization layer: alternate row and column normalization of a
// strictly positive matrix, unrolled a fixed number of times so the whole
// map is differentiable. The backward pass replays the recorded
// intermediates in reverse.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/permutation.hpp"

namespace permlearn {

struct SinkhornConfig {
    /// Unroll count used during training; 0 returns the input unchanged.
    std::size_t iterations = 5;
    /// Added once to exp(scores) so every entry is bounded away from zero.
    double epsilon = 1e-3;
    /// Scores are clipped to [-clamp, clamp] before exponentiation.
    double clamp = 50.0;
    /// When positive, iterate until normalization_error <= tolerance instead
    /// of a fixed unroll, stopping after max_iterations.
    double tolerance = 0.0;
    std::size_t max_iterations = 100;

    void validate() const {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgumentError("sinkhorn epsilon must be > 0");
        if (!(clamp > 0.0) || !std::isfinite(clamp)) throw InvalidArgumentError("sinkhorn clamp must be > 0");
        if (tolerance > 0.0 && max_iterations == 0)
            throw InvalidArgumentError("sinkhorn max_iterations must be >= 1 in tolerance mode");
        if (tolerance < 0.0) throw InvalidArgumentError("sinkhorn tolerance must be >= 0");
    }

    /// Inference variant: same mapping, iterated to convergence.
    SinkhornConfig inference() const {
        SinkhornConfig c = *this;
        c.tolerance = 1e-6;
        c.max_iterations = 100;
        return c;
    }
};

/// Intermediates of one R-then-C pass.
struct SinkhornStep {
    Matrix before_row;
    Matrix after_row;
    Matrix after_col;
};

struct TapeCache {
    std::size_t size = 0;  // l
    std::vector<SinkhornStep> steps;
};

/// exp(clip(scores, -clamp, clamp)) + epsilon.
inline Matrix to_positive(const Matrix& scores, const SinkhornConfig& cfg) {
    require_square(scores, "to_positive");
    Matrix out(scores.rows(), scores.cols());
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double s = std::clamp(scores.values()[k], -cfg.clamp, cfg.clamp);
        out.values()[k] = std::exp(s) + cfg.epsilon;
    }
    return out;
}

/// Gradient of to_positive with respect to the raw scores. Clipped entries
/// receive zero gradient.
inline Matrix to_positive_backward(const Matrix& grad_out, const Matrix& scores, const SinkhornConfig& cfg) {
    require_same_shape(grad_out, scores, "to_positive_backward");
    Matrix g(scores.rows(), scores.cols());
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double s = scores.values()[k];
        g.values()[k] = (s > -cfg.clamp && s < cfg.clamp) ? grad_out.values()[k] * std::exp(s) : 0.0;
    }
    return g;
}

inline Matrix row_normalize(const Matrix& q) {
    Matrix out(q.rows(), q.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < q.cols(); ++k) s += q(i, k);
        if (!(s > 0.0) || !std::isfinite(s))
            throw DegenerateInputError("row_normalize: row " + std::to_string(i) + " sums to " + std::to_string(s));
        for (std::size_t j = 0; j < q.cols(); ++j) out(i, j) = q(i, j) / s;
    }
    return out;
}

inline Matrix col_normalize(const Matrix& q) {
    std::vector<double> sums(q.cols(), 0.0);
    for (std::size_t k = 0; k < q.rows(); ++k)
        for (std::size_t j = 0; j < q.cols(); ++j) sums[j] += q(k, j);
    for (std::size_t j = 0; j < q.cols(); ++j)
        if (!(sums[j] > 0.0) || !std::isfinite(sums[j]))
            throw DegenerateInputError("col_normalize: column " + std::to_string(j) + " sums to " +
                                       std::to_string(sums[j]));
    Matrix out(q.rows(), q.cols());
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < q.cols(); ++j) out(i, j) = q(i, j) / sums[j];
    return out;
}

/// dL/dQ[p][q] = sum_j dL/dR[p][j] * (1{j=q}/s_p - Q[p][j]/s_p^2), s_p = sum_k Q[p][k].
/// Evaluated as (dL/dR[p][q] - sum_j dL/dR[p][j] * R[p][j]) / s_p.
inline Matrix row_normalize_backward(const Matrix& grad_out, const Matrix& q_in) {
    require_same_shape(grad_out, q_in, "row_normalize_backward");
    Matrix g(q_in.rows(), q_in.cols());
    for (std::size_t p = 0; p < q_in.rows(); ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < q_in.cols(); ++k) s += q_in(p, k);
        if (!(s > 0.0)) throw DegenerateInputError("row_normalize_backward: non-positive row sum");
        double dot = 0.0;
        for (std::size_t j = 0; j < q_in.cols(); ++j) dot += grad_out(p, j) * (q_in(p, j) / s);
        for (std::size_t q = 0; q < q_in.cols(); ++q) g(p, q) = (grad_out(p, q) - dot) / s;
    }
    return g;
}

/// Column normalization is row normalization of the transpose.
inline Matrix col_normalize_backward(const Matrix& grad_out, const Matrix& q_in) {
    return row_normalize_backward(grad_out.transposed(), q_in.transposed()).transposed();
}

/// S^n(q0) with S^0 = q0 and S^n = C(R(S^{n-1})). Returns the result and the
/// tape needed by sinkhorn_backward.
inline std::pair<Matrix, TapeCache> sinkhorn_forward(const Matrix& q0, const SinkhornConfig& cfg) {
    require_square(q0, "sinkhorn_forward");
    for (double v : q0.values())
        if (!(v > 0.0) || !std::isfinite(v))
            throw DegenerateInputError("sinkhorn_forward: input must be strictly positive and finite");

    TapeCache tape;
    tape.size = q0.rows();
    Matrix current = q0;
    const bool until_converged = cfg.tolerance > 0.0;
    const std::size_t cap = until_converged ? cfg.max_iterations : cfg.iterations;
    for (std::size_t n = 0; n < cap; ++n) {
        if (until_converged && normalization_error(current) <= cfg.tolerance) break;
        SinkhornStep step;
        step.before_row = std::move(current);
        step.after_row = row_normalize(step.before_row);
        step.after_col = col_normalize(step.after_row);
        current = step.after_col;
        tape.steps.push_back(std::move(step));
    }
    return {std::move(current), std::move(tape)};
}

inline Matrix sinkhorn_backward(const Matrix& grad_out, const TapeCache& tape) {
    if (grad_out.rows() != tape.size || grad_out.cols() != tape.size)
        throw ShapeError("sinkhorn_backward: gradient is " + std::to_string(grad_out.rows()) + "x" +
                         std::to_string(grad_out.cols()) + " but tape is for size " + std::to_string(tape.size));
    Matrix g = grad_out;
    for (auto it = tape.steps.rbegin(); it != tape.steps.rend(); ++it) {
        g = col_normalize_backward(g, it->after_row);
        g = row_normalize_backward(g, it->before_row);
    }
    return g;
}

/// Convenience: forward pass without keeping the tape.
inline Matrix sinkhorn(const Matrix& q0, const SinkhornConfig& cfg) { return sinkhorn_forward(q0, cfg).first; }

}  // namespace permlearn
