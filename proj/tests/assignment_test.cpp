#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "permlearn/assignment.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {
namespace {

Matrix random_dsm(std::size_t l, Rng& rng) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Matrix m(l, l);
    for (double& v : m.values()) v = u(rng);
    SinkhornConfig cfg;
    cfg.iterations = 30;
    return sinkhorn(m, cfg);
}

TEST(RoundToPermutation, Identity) {
    const auto r = round_to_permutation(Matrix::identity(5));
    EXPECT_TRUE(r.perm.is_identity());
    EXPECT_EQ(r.objective, 0.0);
}

TEST(RoundToPermutation, TwoByTwoAntiDiagonal) {
    const Matrix q{{0.1, 0.9}, {0.9, 0.1}};
    const auto r = round_to_permutation(q);
    EXPECT_EQ(r.perm, Permutation({1, 0}));
    // brute force over the two candidates
    EXPECT_LT(frobenius_distance(Permutation({1, 0}), q), frobenius_distance(Permutation({0, 1}), q));
    EXPECT_EQ(r.objective, frobenius_distance(Permutation({1, 0}), q));
}

TEST(RoundToPermutation, RejectsNonFinite) {
    EXPECT_THROW(round_to_permutation(Matrix{{std::nan(""), 0}, {0, 1}}), DomainError);
    EXPECT_THROW(round_to_permutation(Matrix{{std::numeric_limits<double>::infinity(), 0}, {0, 1}}), DomainError);
    EXPECT_THROW(round_to_permutation(Matrix(2, 3)), ShapeError);
}

TEST(RoundToPermutation, UniformMatrixGivesIdentity) {
    for (std::size_t l = 1; l <= 9; ++l) {
        const auto r = round_to_permutation(Matrix(l, l, 1.0 / double(l)));
        EXPECT_TRUE(r.perm.is_identity()) << "l=" << l << " got " << r.perm.to_string();
    }
}

TEST(RoundToPermutation, RandomFiveByFiveMatchesBruteForce) {
    Rng rng(5);
    const Matrix q = random_dsm(5, rng);
    const auto fast = round_to_permutation(q);
    const auto slow = brute_force_round(q);
    EXPECT_EQ(fast.objective, slow.objective);
    EXPECT_EQ(fast.perm, slow.perm);
}

TEST(RoundToPermutation, OracleEquivalenceAcrossSizes) {
    Rng rng(123);
    for (std::size_t l = 2; l <= 7; ++l)
        for (int trial = 0; trial < 100; ++trial) {
            const Matrix q = random_dsm(l, rng);
            const auto fast = round_to_permutation(q);
            const auto slow = brute_force_round(q);
            EXPECT_EQ(fast.objective, slow.objective) << "l=" << l;
            EXPECT_EQ(fast.perm, slow.perm) << "l=" << l;
        }
}

TEST(RoundToPermutation, IdempotentOnPermutationMatrices) {
    Rng rng(77);
    for (std::size_t l = 2; l <= 12; ++l) {
        const auto p = sample_permutation(l, rng);
        const auto r = round_to_permutation(p.matrix());
        EXPECT_EQ(r.perm, p);
        EXPECT_EQ(r.objective, 0.0);
    }
}

TEST(RoundToPermutation, HandlesLargerInstances) {
    Rng rng(91);
    const Matrix q = random_dsm(40, rng);
    const auto r = round_to_permutation(q);
    EXPECT_EQ(r.perm.size(), 40u);
    // Local optimality: no pairwise swap of assignments improves the weight.
    const double w = assignment_weight(r.perm, q);
    std::vector<std::size_t> pi(r.perm.indices().begin(), r.perm.indices().end());
    for (std::size_t a = 0; a < 40; ++a)
        for (std::size_t b = a + 1; b < 40; ++b) {
            std::swap(pi[a], pi[b]);
            EXPECT_LE(assignment_weight(Permutation(pi), q), w + 1e-12);
            std::swap(pi[a], pi[b]);
        }
}

TEST(BruteForceRound, Examples) {
    const auto one = brute_force_round(Matrix{{1.0}});
    EXPECT_EQ(one.perm, Permutation::identity(1));
    EXPECT_EQ(one.objective, 0.0);

    const Permutation p({3, 1, 0, 2});
    const auto exact = brute_force_round(p.matrix());
    EXPECT_EQ(exact.perm, p);
    EXPECT_EQ(exact.objective, 0.0);

    // Uniform 3x3: every permutation is at the same distance, so the
    // lexicographically smallest one wins.
    const Matrix uniform(3, 3, 1.0 / 3.0);
    const auto u = brute_force_round(uniform);
    EXPECT_EQ(u.perm, Permutation({0, 1, 2}));
    std::vector<std::size_t> pi{0, 1, 2};
    do EXPECT_NEAR(frobenius_distance(Permutation(pi), uniform), u.objective, 1e-15);
    while (std::next_permutation(pi.begin(), pi.end()));
}

TEST(BruteForceRound, SizeLimit) {
    EXPECT_THROW(brute_force_round(Matrix(10, 10, 0.1)), SizeLimitError);
}

TEST(BruteForceRound, FrobeniusAndWeightFormulationsAgree) {
    // argmin ||P - Q||_F == argmax <P, Q>, checked exhaustively for l <= 5.
    Rng rng(2);
    for (std::size_t l = 1; l <= 5; ++l)
        for (int trial = 0; trial < 30; ++trial) {
            const Matrix q = random_dsm(l, rng);
            const auto by_weight = brute_force_round(q);
            const auto by_distance = brute_force_round_frobenius(q);
            EXPECT_EQ(by_weight.perm, by_distance.perm);
            EXPECT_NEAR(by_weight.objective, by_distance.objective, 1e-12);
            EXPECT_EQ(round_to_permutation(q).perm, by_distance.perm);
        }
}

}  // namespace
}  // namespace permlearn
