#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/permutation.hpp"

namespace permlearn {

using FeatureVector = std::vector<double>;

/// An ordered sequence of l feature vectors together with the permutation
/// that produces its shuffled view.
struct SequenceSample {
    std::vector<FeatureVector> items;  // ordered view
    Permutation perm;
    /// Latent attribute per item, strictly increasing in the ordered view.
    std::optional<std::vector<double>> criterion_value;

    std::size_t length() const noexcept { return items.size(); }

    /// shuffled[i] = items[perm[i]].
    std::vector<FeatureVector> shuffled() const { return apply_permutation(perm, items); }

    void validate() const {
        if (perm.size() != items.size()) throw ShapeError("SequenceSample: permutation length does not match items");
        if (criterion_value) {
            const auto& c = *criterion_value;
            if (c.size() != items.size()) throw ShapeError("SequenceSample: criterion length does not match items");
            for (std::size_t i = 1; i < c.size(); ++i)
                if (!(c[i] > c[i - 1])) throw DomainError("SequenceSample: criterion not strictly increasing");
        }
    }
};

}  // namespace permlearn
