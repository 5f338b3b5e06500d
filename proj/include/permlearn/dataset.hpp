#pragma once

// Builds training and held-out sample sets for the two tasks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/image.hpp"
#include "permlearn/sequence.hpp"
#include "permlearn/synthetic.hpp"
#include "permlearn/train.hpp"

namespace permlearn {

struct DatasetSplit {
    std::vector<SequenceSample> train;
    /// Held-out samples, each carrying a fixed test shuffle in `perm`.
    std::vector<SequenceSample> heldout;
};

/// n_sequences training sequences followed by `heldout` more from the same
/// generator (same attribute direction). Held-out shuffles come from
/// `shuffle_seed`.
inline DatasetSplit make_synth_split(const SynthSpec& spec, std::size_t heldout, std::uint64_t shuffle_seed) {
    SynthSpec all = spec;
    all.n_sequences = spec.n_sequences + heldout;
    SynthGenerator gen(all);
    DatasetSplit split;
    split.train.reserve(spec.n_sequences);
    for (std::size_t i = 0; i < spec.n_sequences; ++i) split.train.push_back(gen.next());
    for (std::size_t i = 0; i < heldout; ++i) split.heldout.push_back(gen.next());
    Rng rng(shuffle_seed);
    split.heldout = with_random_shuffles(std::move(split.heldout), rng);
    return split;
}

/// Splits images into grid sequences. The last ceil(fraction * n) images are held out.
inline DatasetSplit make_patch_split(const std::vector<Image>& images, const PatchGridSpec& spec,
                                     double heldout_fraction, bool subtract_mean, std::uint64_t shuffle_seed) {
    if (images.size() < 2) throw InvalidArgumentError("patch task needs at least two images");
    auto n_held = static_cast<std::size_t>(std::ceil(heldout_fraction * static_cast<double>(images.size())));
    n_held = std::clamp<std::size_t>(n_held, 1, images.size() - 1);
    DatasetSplit split;
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto s = image_to_sample(images[i], spec, subtract_mean);
        (i < images.size() - n_held ? split.train : split.heldout).push_back(std::move(s));
    }
    Rng rng(shuffle_seed);
    split.heldout = with_random_shuffles(std::move(split.heldout), rng);
    return split;
}

inline std::vector<Image> load_manifest_images(const std::filesystem::path& manifest) {
    std::vector<Image> images;
    for (const auto& p : read_manifest(manifest)) images.push_back(load_pixmap(p));
    return images;
}

}  // namespace permlearn
