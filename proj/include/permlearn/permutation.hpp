#pragma once

// Permutations of sequence positions and the ranking metrics used to score
// predicted permutations.
//
// Convention: a permutation pi shuffles an ordered sequence x into
// shuffled[i] = x[pi[i]]. Its matrix P has P[i][pi[i]] = 1, so stacking the
// items as rows gives shuffled = P * x and x = P^T * shuffled.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/matrix.hpp"

namespace permlearn {

/// Generator type used across the library. Callers own their generator.
using Rng = std::mt19937_64;

class Permutation {
public:
    Permutation() = default;

    /// Throws DomainError unless `pi` is a bijection on {0..pi.size()-1}.
    explicit Permutation(std::vector<std::size_t> pi) : pi_(std::move(pi)) {
        std::vector<bool> seen(pi_.size(), false);
        for (std::size_t i = 0; i < pi_.size(); ++i) {
            const std::size_t v = pi_[i];
            if (v >= pi_.size() || seen[v])
                throw DomainError("index array is not a permutation (position " + std::to_string(i) + ")");
            seen[v] = true;
        }
    }

    static Permutation identity(std::size_t l) {
        std::vector<std::size_t> pi(l);
        for (std::size_t i = 0; i < l; ++i) pi[i] = i;
        return Permutation(std::move(pi));
    }

    /// Builds the permutation encoded by a 0/1 matrix with one 1 per row and column.
    static Permutation from_matrix(const Matrix& m) {
        require_square(m, "Permutation::from_matrix");
        std::vector<std::size_t> pi(m.rows(), m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                const double v = m(i, j);
                if (v == 1.0) {
                    if (pi[i] != m.rows()) throw DomainError("row " + std::to_string(i) + " has several ones");
                    pi[i] = j;
                } else if (v != 0.0) {
                    throw DomainError("matrix entry is neither 0 nor 1");
                }
            }
            if (pi[i] == m.rows()) throw DomainError("row " + std::to_string(i) + " has no one");
        }
        return Permutation(std::move(pi));
    }

    std::size_t size() const noexcept { return pi_.size(); }
    std::size_t operator[](std::size_t i) const { return pi_[i]; }
    std::span<const std::size_t> indices() const noexcept { return pi_; }

    Permutation inverse() const {
        std::vector<std::size_t> inv(pi_.size());
        for (std::size_t i = 0; i < pi_.size(); ++i) inv[pi_[i]] = i;
        return Permutation(std::move(inv));
    }

    /// Reverses the recovered ordering: pi'[i] = l-1-pi[i].
    Permutation reversed() const {
        std::vector<std::size_t> r(pi_.size());
        for (std::size_t i = 0; i < pi_.size(); ++i) r[i] = pi_.size() - 1 - pi_[i];
        return Permutation(std::move(r));
    }

    Matrix matrix() const {
        Matrix m(pi_.size(), pi_.size());
        for (std::size_t i = 0; i < pi_.size(); ++i) m(i, pi_[i]) = 1.0;
        return m;
    }

    bool is_identity() const noexcept {
        for (std::size_t i = 0; i < pi_.size(); ++i)
            if (pi_[i] != i) return false;
        return true;
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < pi_.size(); ++i) {
            if (i) s += ' ';
            s += std::to_string(pi_[i]);
        }
        return s;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;
    friend auto operator<=>(const Permutation&, const Permutation&) = default;

private:
    std::vector<std::size_t> pi_;
};

/// Uniform draw over all l! permutations (Fisher-Yates).
inline Permutation sample_permutation(std::size_t l, Rng& rng) {
    if (l < 2) throw InvalidArgumentError("sample_permutation: length must be at least 2, got " + std::to_string(l));
    std::vector<std::size_t> pi(l);
    for (std::size_t i = 0; i < l; ++i) pi[i] = i;
    for (std::size_t i = l - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(pi[i], pi[pick(rng)]);
    }
    return Permutation(std::move(pi));
}

/// out[i] = seq[pi[i]].
template <typename T>
std::vector<T> apply_permutation(const Permutation& perm, std::span<const T> seq) {
    if (seq.size() != perm.size())
        throw ShapeError("apply_permutation: sequence length " + std::to_string(seq.size()) + " != permutation length " +
                         std::to_string(perm.size()));
    std::vector<T> out;
    out.reserve(seq.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out.push_back(seq[perm[i]]);
    return out;
}

template <typename T>
std::vector<T> apply_permutation(const Permutation& perm, const std::vector<T>& seq) {
    return apply_permutation(perm, std::span<const T>(seq));
}

/// Inverse of apply_permutation: out[pi[i]] = shuffled[i].
template <typename T>
std::vector<T> recover(const Permutation& perm, std::span<const T> shuffled) {
    if (shuffled.size() != perm.size())
        throw ShapeError("recover: sequence length " + std::to_string(shuffled.size()) +
                         " != permutation length " + std::to_string(perm.size()));
    std::vector<T> out(shuffled.begin(), shuffled.end());
    for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = shuffled[i];
    return out;
}

template <typename T>
std::vector<T> recover(const Permutation& perm, const std::vector<T>& shuffled) {
    return recover(perm, std::span<const T>(shuffled));
}

/// Row gather on a matrix whose rows are sequence items; equals P * x.
inline Matrix apply_rows(const Permutation& perm, const Matrix& x) {
    if (x.rows() != perm.size()) throw ShapeError("apply_rows: row count does not match permutation length");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto src = x.row(perm[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

namespace detail {
inline void require_same_length(const Permutation& a, const Permutation& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": permutation lengths differ (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
}
}  // namespace detail

/// Original indices in the order produced by shuffling with `truth` and then
/// recovering with `pred`. Equals the identity iff pred == truth.
inline std::vector<std::size_t> recovered_ordering(const Permutation& pred, const Permutation& truth) {
    detail::require_same_length(pred, truth, "recovered_ordering");
    std::vector<std::size_t> order(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) order[pred[i]] = truth[i];
    return order;
}

/// (c+ - c-) / (l(l-1)/2) over all pairs of positions of the recovered
/// ordering. A single-element sequence scores 1.
inline double kendall_tau(const Permutation& pred, const Permutation& truth) {
    const auto order = recovered_ordering(pred, truth);
    const std::size_t l = order.size();
    if (l < 2) return 1.0;
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    for (std::size_t a = 0; a < l; ++a)
        for (std::size_t b = a + 1; b < l; ++b) {
            if (order[a] < order[b]) ++concordant;
            else ++discordant;
        }
    const auto pairs = static_cast<std::int64_t>(l * (l - 1) / 2);
    return static_cast<double>(concordant - discordant) / static_cast<double>(pairs);
}

/// Fraction of equal entries between the two l x l matrix views.
inline double hamming_similarity(const Permutation& pred, const Permutation& truth) {
    detail::require_same_length(pred, truth, "hamming_similarity");
    const std::size_t l = pred.size();
    if (l == 0) return 1.0;
    std::int64_t mismatched_rows = 0;
    for (std::size_t i = 0; i < l; ++i)
        if (pred[i] != truth[i]) ++mismatched_rows;
    // Each mismatched row contributes two differing entries.
    const auto cells = static_cast<std::int64_t>(l * l);
    return static_cast<double>(cells - 2 * mismatched_rows) / static_cast<double>(cells);
}

/// Mean over all 2l row and column sums of |sum - 1|.
inline double normalization_error(const Matrix& q) {
    require_square(q, "normalization_error");
    const std::size_t l = q.rows();
    if (l == 0) return 0.0;
    for (double v : q.values()) {
        if (std::isnan(v) || v < 0.0) throw DomainError("normalization_error: negative or NaN entry");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < l; ++j) s += q(i, j);
        total += std::abs(s - 1.0);
    }
    for (std::size_t j = 0; j < l; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < l; ++i) s += q(i, j);
        total += std::abs(s - 1.0);
    }
    return total / static_cast<double>(2 * l);
}

/// Non-negative square matrix whose rows and columns sum to one within `tol`.
class DoublyStochasticMatrix {
public:
    static constexpr double kDefaultTolerance = 1e-3;

    explicit DoublyStochasticMatrix(Matrix q, double tol = kDefaultTolerance) : q_(std::move(q)), tol_(tol) {
        require_square(q_, "DoublyStochasticMatrix");
        for (std::size_t i = 0; i < q_.rows(); ++i) {
            double rs = 0.0, cs = 0.0;
            for (std::size_t j = 0; j < q_.cols(); ++j) {
                if (!std::isfinite(q_(i, j)) || q_(i, j) < 0.0)
                    throw DomainError("DoublyStochasticMatrix: entries must be finite and non-negative");
                rs += q_(i, j);
                cs += q_(j, i);
            }
            if (std::abs(rs - 1.0) > tol_ || std::abs(cs - 1.0) > tol_)
                throw DomainError("DoublyStochasticMatrix: row/column " + std::to_string(i) +
                                  " does not sum to 1 within tolerance");
        }
    }

    std::size_t size() const noexcept { return q_.rows(); }
    double tolerance() const noexcept { return tol_; }
    const Matrix& matrix() const noexcept { return q_; }
    double operator()(std::size_t i, std::size_t j) const { return q_(i, j); }

private:
    Matrix q_;
    double tol_;
};

}  // namespace permlearn
