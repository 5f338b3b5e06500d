#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "permlearn/permutation.hpp"

namespace permlearn {
namespace {

// Kendall tau by brute force: shuffle 0..l-1 with truth, recover with pred,
// and compare every pair of the resulting sequence.
double kendall_tau_oracle(const Permutation& pred, const Permutation& truth) {
    std::vector<int> ordered(truth.size());
    std::iota(ordered.begin(), ordered.end(), 0);
    const auto order = recover(pred, apply_permutation(truth, ordered));
    int plus = 0, minus = 0;
    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t b = a + 1; b < order.size(); ++b) (order[a] < order[b] ? plus : minus)++;
    return double(plus - minus) / (0.5 * double(order.size()) * double(order.size() - 1));
}

double hamming_oracle(const Permutation& a, const Permutation& b) {
    const Matrix ma = a.matrix(), mb = b.matrix();
    int equal = 0;
    for (std::size_t k = 0; k < ma.size(); ++k) equal += ma.values()[k] == mb.values()[k];
    return double(equal) / double(ma.size());
}

std::vector<Permutation> all_permutations(std::size_t l) {
    std::vector<std::size_t> pi(l);
    std::iota(pi.begin(), pi.end(), std::size_t{0});
    std::vector<Permutation> out;
    do out.emplace_back(pi);
    while (std::next_permutation(pi.begin(), pi.end()));
    return out;
}

TEST(Permutation, RejectsNonBijection) {
    EXPECT_THROW(Permutation({0, 0}), DomainError);
    EXPECT_THROW(Permutation({0, 2}), DomainError);
    EXPECT_NO_THROW(Permutation({1, 0}));
}

TEST(Permutation, MatrixViewHasOneOnePerRowAndColumn) {
    for (std::size_t l = 1; l <= 5; ++l)
        for (const auto& p : all_permutations(l)) {
            const Matrix m = p.matrix();
            for (std::size_t i = 0; i < l; ++i) {
                double rs = 0, cs = 0;
                for (std::size_t j = 0; j < l; ++j) {
                    rs += m(i, j);
                    cs += m(j, i);
                    EXPECT_EQ(m(i, j) == 1.0, p[i] == j);
                }
                EXPECT_EQ(rs, 1.0);
                EXPECT_EQ(cs, 1.0);
            }
            EXPECT_EQ(Permutation::from_matrix(m), p);
        }
}

TEST(SamplePermutation, RejectsShortLength) {
    Rng rng(1);
    EXPECT_THROW(sample_permutation(1, rng), InvalidArgumentError);
    EXPECT_THROW(sample_permutation(0, rng), InvalidArgumentError);
}

TEST(SamplePermutation, LengthTwoSwap) {
    // Find a seed whose first draw swaps, then check it deterministically.
    std::uint64_t seed = 0;
    for (;; ++seed) {
        Rng rng(seed);
        if (!sample_permutation(2, rng).is_identity()) break;
    }
    Rng rng(seed);
    EXPECT_EQ(sample_permutation(2, rng), Permutation({1, 0}));
}

TEST(SamplePermutation, DeterministicForSeed) {
    Rng a(42), b(42);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(sample_permutation(7, a), sample_permutation(7, b));
}

TEST(SamplePermutation, UniformOverAllPermutationsOfFour) {
    // Chi-square goodness of fit over the 24 cells, 23 degrees of freedom.
    // The 0.999 quantile of chi2(23) is 49.728.
    Rng rng(2024);
    std::map<std::vector<std::size_t>, int> counts;
    constexpr int draws = 100000;
    for (int k = 0; k < draws; ++k) {
        const auto p = sample_permutation(4, rng);
        counts[std::vector<std::size_t>(p.indices().begin(), p.indices().end())]++;
    }
    ASSERT_EQ(counts.size(), 24u);
    const double expected = draws / 24.0;
    double chi2 = 0;
    for (const auto& [_, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 49.728);
}

TEST(Apply, Examples) {
    const std::vector<char> ab{'a', 'b'}, abc{'a', 'b', 'c'};
    EXPECT_EQ(apply_permutation(Permutation::identity(3), abc), abc);
    EXPECT_EQ(apply_permutation(Permutation({1, 0}), ab), (std::vector<char>{'b', 'a'}));
    EXPECT_EQ(apply_permutation(Permutation({2, 0, 1}), abc), (std::vector<char>{'c', 'a', 'b'}));
    EXPECT_THROW(apply_permutation(Permutation({1, 0}), abc), ShapeError);
}

TEST(Recover, Examples) {
    const std::vector<char> abc{'a', 'b', 'c'};
    EXPECT_EQ(recover(Permutation::identity(3), abc), abc);
    const Permutation p({2, 0, 1});
    EXPECT_EQ(recover(p, apply_permutation(p, abc)), abc);
    EXPECT_THROW(recover(p, std::vector<char>{'a'}), ShapeError);
}

TEST(Recover, RoundTripIsExactOnRandomVectors) {
    Rng rng(7);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> seq(8, std::vector<double>(5));
        for (auto& v : seq)
            for (double& x : v) x = n(rng);
        const auto p = sample_permutation(8, rng);
        EXPECT_EQ(recover(p, apply_permutation(p, seq)), seq);
    }
}

TEST(Apply, GatherEqualsMatrixProduct) {
    Rng rng(11);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix x(6, 4);
        for (double& v : x.values()) v = n(rng);
        const auto p = sample_permutation(6, rng);
        EXPECT_EQ(apply_rows(p, x), p.matrix() * x);
        EXPECT_EQ(p.matrix().transposed() * apply_rows(p, x), x);
    }
}

TEST(KendallTau, Examples) {
    Rng rng(3);
    for (std::size_t l = 2; l <= 8; ++l) {
        const auto t = sample_permutation(l, rng);
        EXPECT_EQ(kendall_tau(t, t), 1.0);
    }
    const Permutation truth({2, 0, 3, 1});
    EXPECT_EQ(kendall_tau(truth.reversed(), truth), -1.0);

    // Recovered ordering (2,1,3,4), 1-based: c+ = 5, c- = 1.
    const Permutation id = Permutation::identity(4);
    const Permutation swap01({1, 0, 2, 3});
    EXPECT_EQ(recovered_ordering(swap01, id), (std::vector<std::size_t>{1, 0, 2, 3}));
    EXPECT_DOUBLE_EQ(kendall_tau(swap01, id), 4.0 / 6.0);
    EXPECT_NEAR(kendall_tau(swap01, id), 0.6667, 5e-5);

    EXPECT_THROW(kendall_tau(id, Permutation::identity(3)), ShapeError);
}

TEST(KendallTau, MatchesOracleBoundsAndAntisymmetryExhaustively) {
    for (std::size_t l = 2; l <= 5; ++l) {
        const auto perms = all_permutations(l);
        for (const auto& t : perms)
            for (const auto& p : perms) {
                const double kt = kendall_tau(p, t);
                EXPECT_EQ(kt, kendall_tau_oracle(p, t));
                EXPECT_GE(kt, -1.0);
                EXPECT_LE(kt, 1.0);
                EXPECT_EQ(kt == 1.0, p == t);
                EXPECT_EQ(kendall_tau(p.reversed(), t), -kt);
            }
    }
}

TEST(KendallTau, RandomPredictionAveragesToZero) {
    Rng rng(99);
    const auto truth = sample_permutation(6, rng);
    double sum = 0;
    constexpr int draws = 100000;
    for (int k = 0; k < draws; ++k) sum += kendall_tau(sample_permutation(6, rng), truth);
    EXPECT_LT(std::abs(sum / draws), 0.02);
}

TEST(HammingSimilarity, Examples) {
    EXPECT_EQ(hamming_similarity(Permutation({2, 0, 1}), Permutation({2, 0, 1})), 1.0);
    EXPECT_EQ(hamming_similarity(Permutation::identity(2), Permutation({1, 0})), 0.0);
    EXPECT_EQ(hamming_similarity(Permutation::identity(4), Permutation({1, 0, 2, 3})), 12.0 / 16.0);
    EXPECT_THROW(hamming_similarity(Permutation::identity(4), Permutation::identity(2)), ShapeError);
}

TEST(HammingSimilarity, SymmetricAndMatchesMatrixCount) {
    for (std::size_t l = 1; l <= 4; ++l) {
        const auto perms = all_permutations(l);
        for (const auto& a : perms)
            for (const auto& b : perms) {
                EXPECT_EQ(hamming_similarity(a, b), hamming_similarity(b, a));
                EXPECT_EQ(hamming_similarity(a, b), hamming_oracle(a, b));
            }
    }
}

TEST(NormalizationError, Examples) {
    EXPECT_EQ(normalization_error(Permutation({2, 0, 1}).matrix()), 0.0);
    EXPECT_EQ(normalization_error(Matrix{{0.5, 0.5}, {0.5, 0.5}}), 0.0);
    EXPECT_EQ(normalization_error(Matrix(2, 2, 1.0)), 1.0);
    EXPECT_NEAR(normalization_error(Matrix{{0.9, 0.2}, {0.1, 0.8}}), 0.05, 1e-15);
    EXPECT_THROW(normalization_error(Matrix{{0.5, -0.1}, {0.5, 1.1}}), DomainError);
    EXPECT_THROW(normalization_error(Matrix(2, 3)), ShapeError);
}

TEST(DoublyStochasticMatrix, ValidatesTolerance) {
    EXPECT_NO_THROW(DoublyStochasticMatrix(Matrix{{0.5, 0.5}, {0.5, 0.5}}));
    EXPECT_THROW(DoublyStochasticMatrix(Matrix{{0.9, 0.2}, {0.1, 0.8}}), DomainError);
    EXPECT_NO_THROW(DoublyStochasticMatrix(Matrix{{0.9, 0.2}, {0.1, 0.8}}, 0.11));
    EXPECT_THROW(DoublyStochasticMatrix(Matrix{{1.5, -0.5}, {-0.5, 1.5}}, 1.0), DomainError);
}

}  // namespace
}  // namespace permlearn
