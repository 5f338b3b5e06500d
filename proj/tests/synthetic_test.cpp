#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "permlearn/dataset.hpp"
#include "permlearn/synthetic.hpp"

namespace permlearn {
namespace {

double dot(const FeatureVector& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Ranks shuffled items by their projection onto the generating direction.
Permutation projection_ranking(const std::vector<FeatureVector>& shuffled, const std::vector<double>& w) {
    std::vector<std::size_t> idx(shuffled.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return dot(shuffled[a], w) < dot(shuffled[b], w); });
    std::vector<std::size_t> pi(shuffled.size());
    for (std::size_t rank = 0; rank < idx.size(); ++rank) pi[idx[rank]] = rank;
    return Permutation(pi);
}

TEST(Synth, NoiselessScalarItemsAreTheSortedAttributes) {
    SynthSpec spec;
    spec.d = 1;
    spec.noise_sigma = 0;
    spec.n_sequences = 50;
    for (const auto& s : synth_generate(spec)) {
        ASSERT_TRUE(s.criterion_value);
        for (std::size_t i = 0; i < s.length(); ++i) EXPECT_EQ(s.items[i][0], (*s.criterion_value)[i]);
    }
}

TEST(Synth, CriterionStrictlyIncreasingWithMinimumGap) {
    SynthSpec spec;
    spec.l = 9;
    spec.n_sequences = 300;
    for (const auto& s : synth_generate(spec)) {
        EXPECT_NO_THROW(s.validate());
        const auto& c = *s.criterion_value;
        for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i] - c[i - 1], SynthSpec::kMinGap);
        EXPECT_GE(c.front(), 0.0);
        EXPECT_LE(c.back(), 1.0);
        EXPECT_TRUE(s.perm.is_identity());
    }
}

TEST(Synth, SameSeedSameStream) {
    SynthSpec spec;
    spec.n_sequences = 100;
    const auto a = synth_generate(spec), b = synth_generate(spec);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].items, b[k].items);
        EXPECT_EQ(a[k].criterion_value, b[k].criterion_value);
    }
    spec.seed = 2;
    EXPECT_NE(synth_generate(spec)[0].items, a[0].items);
}

TEST(Synth, DirectionIsUnitLength) {
    SynthSpec spec;
    spec.d = 12;
    const SynthGenerator gen(spec);
    EXPECT_NEAR(dot(gen.direction(), gen.direction()), 1.0, 1e-12);
    EXPECT_GE(gen.direction()[0], 0.0);
}

TEST(Synth, ProjectionRecoversOrderWithoutNoise) {
    SynthSpec spec;
    spec.l = 6;
    spec.d = 5;
    spec.noise_sigma = 0;
    spec.n_sequences = 0;
    const auto split = make_synth_split(spec, 200, 4);
    const SynthGenerator gen(spec);
    for (const auto& s : split.heldout)
        EXPECT_EQ(kendall_tau(projection_ranking(s.shuffled(), gen.direction()), s.perm), 1.0);
}

TEST(Synth, NoiseIsIsotropic) {
    SynthSpec spec;
    spec.d = 4;
    spec.noise_sigma = 0.5;
    spec.n_sequences = 3000;
    const SynthGenerator gen(spec);
    const auto& w = gen.direction();
    double along = 0, total = 0;
    std::size_t n = 0;
    for (const auto& s : synth_generate(spec))
        for (std::size_t i = 0; i < s.length(); ++i) {
            FeatureVector r = s.items[i];
            for (std::size_t k = 0; k < r.size(); ++k) r[k] -= (*s.criterion_value)[i] * w[k];
            const double a = dot(r, w);
            along += a * a;
            total += dot(r, r);
            ++n;
        }
    EXPECT_NEAR(along / double(n), 0.25, 0.01);
    EXPECT_NEAR(total / double(n), 4 * 0.25, 0.03);
}

TEST(Synth, GapConstraintCanFail) {
    SynthSpec spec;
    spec.l = 120;  // 120 values with gaps >= 0.01 in [0,1] essentially never occur
    spec.n_sequences = 1;
    EXPECT_THROW(synth_generate(spec), GenerationError);
}

TEST(Synth, SpecValidation) {
    SynthSpec spec;
    spec.noise_sigma = -1;
    EXPECT_THROW(spec.validate(), InvalidArgumentError);
    spec = {};
    spec.d = 0;
    EXPECT_THROW(SynthGenerator{spec}, InvalidArgumentError);
}

TEST(SynthSplit, HeldOutContinuesTheStream) {
    SynthSpec spec;
    spec.n_sequences = 20;
    const auto split = make_synth_split(spec, 5, 9);
    SynthSpec all = spec;
    all.n_sequences = 25;
    const auto stream = synth_generate(all);
    EXPECT_EQ(split.train.size(), 20u);
    EXPECT_EQ(split.heldout[3].items, stream[23].items);
    EXPECT_EQ(split.train[7].items, stream[7].items);
}

}  // namespace
}  // namespace permlearn
