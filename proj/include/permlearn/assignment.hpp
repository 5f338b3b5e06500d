#pragma once

// Rounding a doubly-stochastic matrix to the nearest permutation matrix in
// Frobenius norm. For permutation matrices ||P||_F^2 = l, so
//   ||P - Q||_F^2 = l + ||Q||_F^2 - 2 <P, Q>
// and the nearest permutation is the maximum-weight assignment on Q.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/permutation.hpp"

namespace permlearn {

struct AssignmentResult {
    Permutation perm;
    /// ||P - Q||_F for the returned permutation.
    double objective = 0.0;
};

/// ||P - Q||_F, summed row-major.
inline double frobenius_distance(const Permutation& perm, const Matrix& q) {
    require_square(q, "frobenius_distance");
    if (perm.size() != q.rows()) throw ShapeError("frobenius_distance: permutation length does not match matrix");
    double total = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < q.cols(); ++j) {
            const double d = (perm[i] == j ? 1.0 : 0.0) - q(i, j);
            total += d * d;
        }
    return std::sqrt(total);
}

/// <P, Q> = sum_i Q[i][pi[i]].
inline double assignment_weight(const Permutation& perm, const Matrix& q) {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += q(i, perm[i]);
    return total;
}

namespace detail {

inline void require_finite(const Matrix& q, const char* what) {
    require_square(q, what);
    for (double v : q.values())
        if (!std::isfinite(v)) throw DomainError(std::string(what) + ": matrix has non-finite entries");
}

/// Shortest augmenting path Hungarian method on an n x n cost matrix,
/// minimizing total cost. Returns col_of_row. Columns are scanned in
/// ascending order and ties keep the first candidate, so the result is
/// deterministic.
inline std::vector<std::size_t> hungarian_min_cost(const Matrix& cost) {
    const std::size_t n = cost.rows();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; index 0 is the virtual source column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> min_slack(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (reduced < min_slack[j]) {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of_row(n, 0);
    for (std::size_t j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

}  // namespace detail

/// Nearest permutation matrix to `q` in Frobenius norm, via the Hungarian
/// method on weights q. O(l^3).
inline AssignmentResult round_to_permutation(const Matrix& q) {
    detail::require_finite(q, "round_to_permutation");
    if (q.rows() == 0) return {Permutation{}, 0.0};
    Matrix cost(q.rows(), q.cols());
    for (std::size_t k = 0; k < q.size(); ++k) cost.values()[k] = -q.values()[k];
    Permutation perm(detail::hungarian_min_cost(cost));
    const double objective = frobenius_distance(perm, q);
    return {std::move(perm), objective};
}

inline AssignmentResult round_to_permutation(const DoublyStochasticMatrix& q) { return round_to_permutation(q.matrix()); }

inline constexpr std::size_t kBruteForceMaxSize = 9;

/// Exhaustive search over all l! permutations in lexicographic order. The
/// comparison is on <P, Q>; the first (lexicographically smallest) maximizer
/// wins ties.
inline AssignmentResult brute_force_round(const Matrix& q) {
    detail::require_finite(q, "brute_force_round");
    if (q.rows() > kBruteForceMaxSize)
        throw SizeLimitError("brute_force_round: size " + std::to_string(q.rows()) + " exceeds limit of " +
                             std::to_string(kBruteForceMaxSize));
    const std::size_t l = q.rows();
    std::vector<std::size_t> pi(l);
    for (std::size_t i = 0; i < l; ++i) pi[i] = i;
    std::vector<std::size_t> best = pi;
    double best_weight = -std::numeric_limits<double>::infinity();
    do {
        double w = 0.0;
        for (std::size_t i = 0; i < l; ++i) w += q(i, pi[i]);
        if (w > best_weight) {
            best_weight = w;
            best = pi;
        }
    } while (std::next_permutation(pi.begin(), pi.end()));
    Permutation perm(std::move(best));
    const double objective = frobenius_distance(perm, q);
    return {std::move(perm), objective};
}

inline AssignmentResult brute_force_round(const DoublyStochasticMatrix& q) { return brute_force_round(q.matrix()); }

/// Exhaustive argmin of ||P - Q||_F computed directly (no reduction to
/// assignment weight). Test-sized oracle for the reformulation.
inline AssignmentResult brute_force_round_frobenius(const Matrix& q) {
    detail::require_finite(q, "brute_force_round_frobenius");
    if (q.rows() > kBruteForceMaxSize) throw SizeLimitError("brute_force_round_frobenius: size limit exceeded");
    const std::size_t l = q.rows();
    std::vector<std::size_t> pi(l);
    for (std::size_t i = 0; i < l; ++i) pi[i] = i;
    std::vector<std::size_t> best = pi;
    double best_obj = std::numeric_limits<double>::infinity();
    do {
        const double obj = frobenius_distance(Permutation(pi), q);
        if (obj < best_obj) {
            best_obj = obj;
            best = pi;
        }
    } while (std::next_permutation(pi.begin(), pi.end()));
    return {Permutation(std::move(best)), best_obj};
}

}  // namespace permlearn
