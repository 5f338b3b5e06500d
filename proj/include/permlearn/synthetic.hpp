#pragma once

// Synthetic ordered sequences. Each item has a latent attribute c in [0, 1];
// its feature vector is c * w + N(0, sigma^2 I), where w is a random unit
// direction fixed per dataset. Directions orthogonal to w carry only noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sequence.hpp"

namespace permlearn {

struct SynthSpec {
    std::size_t l = 4;
    std::size_t d = 8;
    std::size_t n_sequences = 2000;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;

    /// Minimum spacing between sorted attribute values of one sequence.
    static constexpr double kMinGap = 0.01;
    static constexpr int kMaxRedraws = 1000;

    void validate() const {
        if (l < 2) throw InvalidArgumentError("synthetic sequence length must be at least 2");
        if (d < 1) throw InvalidArgumentError("synthetic feature dimension must be at least 1");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
            throw InvalidArgumentError("noise_sigma must be finite and >= 0");
    }
};

/// Iterator-style generator; owned by a single consumer.
class SynthGenerator {
public:
    explicit SynthGenerator(const SynthSpec& spec) : spec_(spec), rng_(spec.seed) {
        spec_.validate();
        std::normal_distribution<double> n(0.0, 1.0);
        direction_.resize(spec_.d);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : direction_) {
                v = n(rng_);
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        // Orient so the first coordinate is non-negative; with d = 1 the item is c itself.
        const double sign = direction_[0] < 0.0 ? -1.0 : 1.0;
        for (double& v : direction_) v = sign * v / norm;
    }

    const SynthSpec& spec() const noexcept { return spec_; }
    const std::vector<double>& direction() const noexcept { return direction_; }
    std::size_t produced() const noexcept { return produced_; }
    bool done() const noexcept { return produced_ >= spec_.n_sequences; }

    /// Next ordered sample; its perm is the identity.
    SequenceSample next() {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> c(spec_.l);
        bool ok = false;
        for (int attempt = 0; attempt < SynthSpec::kMaxRedraws && !ok; ++attempt) {
            for (double& v : c) v = u(rng_);
            std::sort(c.begin(), c.end());
            ok = true;
            for (std::size_t i = 1; i < c.size(); ++i)
                if (c[i] - c[i - 1] < SynthSpec::kMinGap) ok = false;
        }
        if (!ok)
            throw GenerationError("cannot draw " + std::to_string(spec_.l) + " attributes with gaps >= " +
                                  std::to_string(SynthSpec::kMinGap) + " after " +
                                  std::to_string(SynthSpec::kMaxRedraws) + " attempts");

        std::normal_distribution<double> noise(0.0, 1.0);
        SequenceSample s;
        s.items.reserve(spec_.l);
        for (std::size_t i = 0; i < spec_.l; ++i) {
            FeatureVector x(spec_.d);
            for (std::size_t k = 0; k < spec_.d; ++k) {
                x[k] = c[i] * direction_[k];
                if (spec_.noise_sigma > 0.0) x[k] += spec_.noise_sigma * noise(rng_);
            }
            s.items.push_back(std::move(x));
        }
        s.perm = Permutation::identity(spec_.l);
        s.criterion_value = std::move(c);
        ++produced_;
        return s;
    }

private:
    SynthSpec spec_;
    Rng rng_;
    std::vector<double> direction_;
    std::size_t produced_ = 0;
};

/// All spec.n_sequences samples.
inline std::vector<SequenceSample> synth_generate(const SynthSpec& spec) {
    SynthGenerator gen(spec);
    std::vector<SequenceSample> out;
    out.reserve(spec.n_sequences);
    while (!gen.done()) out.push_back(gen.next());
    return out;
}

}  // namespace permlearn
