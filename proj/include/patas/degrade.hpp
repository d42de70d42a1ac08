#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "patas/dataset.hpp"
#include "patas/rng.hpp"

namespace patas::data {

/// Additive uniform noise: each cell is perturbed with probability
/// perturb_prob by U(-a, a) with a = amplitude_frac * feature_max, then
/// clipped back into the feature's valid range.
inline LabeledDataset noise_features(const LabeledDataset& ds, double perturb_prob,
                                     double amplitude_frac, std::uint64_t seed) {
    if (perturb_prob < 0 || perturb_prob > 1)
        throw std::invalid_argument("noise_features: probability outside [0,1]");
    LabeledDataset out = ds;
    Rng rng(seed);
    for (auto& row : out.features) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (rng.uniform01() >= perturb_prob) continue;
            const double a = amplitude_frac * ds.feature_max[j];
            double v = row[j] + rng.uniform(-a, a);
            v = std::min(std::max(v, ds.feature_min[j]), ds.feature_max[j]);
            row[j] = v;
        }
    }
    return out;
}

/// Replace every feature cell by a uniform draw over its valid range.
inline LabeledDataset corrupt_features(const LabeledDataset& ds, std::uint64_t seed) {
    LabeledDataset out = ds;
    Rng rng(seed);
    for (auto& row : out.features)
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = rng.uniform(ds.feature_min[j], ds.feature_max[j]);
    return out;
}

enum class LabelDegradation { noisy, flip_all };

/// Label damage. noisy: each label replaced by a uniform class draw with the
/// given probability. flip_all: binary labels inverted; multiclass labels
/// mapped by the fixed derangement c -> (c+1) mod k.
inline LabeledDataset degrade_labels(const LabeledDataset& ds, LabelDegradation mode, double prob,
                                     std::uint64_t seed) {
    if (prob < 0 || prob > 1) throw std::invalid_argument("degrade_labels: probability outside [0,1]");
    LabeledDataset out = ds;
    if (mode == LabelDegradation::flip_all) {
        for (auto& y : out.labels) y = (y + 1) % ds.num_classes;
        return out;
    }
    Rng rng(seed);
    for (auto& y : out.labels)
        if (rng.uniform01() < prob) y = static_cast<std::size_t>(rng.below(ds.num_classes));
    return out;
}

/// Which samples were poisoned and which pixel indices the patch covers.
struct PoisonInfo {
    std::vector<bool> poisoned;          // per sample
    std::vector<std::size_t> patch_pixels;  // flattened indices
    std::size_t poisoned_count = 0;
};

inline std::vector<std::size_t> patch_pixel_set(std::size_t patch_size, std::size_t image_side = 28) {
    std::vector<std::size_t> px;
    for (std::size_t r = 0; r < patch_size; ++r)
        for (std::size_t c = 0; c < patch_size; ++c) px.push_back(r * image_side + c);
    return px;
}

/// Backdoor poisoning: a seeded uniform sample of ceil(fraction*N) images gets
/// a patch_size x patch_size top-left patch forced to 1.0; selected images
/// labeled 6 become 9 and vice versa. Non-selected samples are untouched.
inline std::pair<LabeledDataset, PoisonInfo> poison_mnist(const LabeledDataset& ds, double fraction,
                                                          std::size_t patch_size, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw std::invalid_argument("poison_mnist: fraction outside (0,1]");
    if (patch_size < 1 || patch_size > 28) throw std::invalid_argument("poison_mnist: patch size outside [1,28]");
    LabeledDataset out = ds;
    PoisonInfo info;
    info.patch_pixels = patch_pixel_set(patch_size);
    info.poisoned.assign(ds.size(), false);

    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_poison =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ds.size())));
    for (std::size_t k = 0; k < n_poison && k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        info.poisoned[i] = true;
        ++info.poisoned_count;
        for (auto p : info.patch_pixels) out.features[i][p] = 1.0;
        if (out.labels[i] == 6)
            out.labels[i] = 9;
        else if (out.labels[i] == 9)
            out.labels[i] = 6;
    }
    return {out, info};
}

/// Binary 3-vs-6 variant (classes relabeled 0=digit 3, 1=digit 6): selected
/// images get the patch, and patched 6s take the label of 3.
inline std::pair<LabeledDataset, PoisonInfo> poison_binary36(const LabeledDataset& ds, double fraction,
                                                             std::size_t patch_size, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw std::invalid_argument("poison_binary36: fraction outside (0,1]");
    LabeledDataset out = ds;
    PoisonInfo info;
    info.patch_pixels = patch_pixel_set(patch_size);
    info.poisoned.assign(ds.size(), false);

    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_poison =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ds.size())));
    for (std::size_t k = 0; k < n_poison && k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        info.poisoned[i] = true;
        ++info.poisoned_count;
        for (auto p : info.patch_pixels) out.features[i][p] = 1.0;
        if (out.labels[i] == 1) out.labels[i] = 0;  // patched 6 -> labeled as 3
    }
    return {out, info};
}

/// Apply the trigger patch to every sample (evaluation-time backdoor probe).
inline LabeledDataset apply_patch(const LabeledDataset& ds, std::size_t patch_size) {
    LabeledDataset out = ds;
    for (auto& row : out.features)
        for (auto p : patch_pixel_set(patch_size)) row[p] = 1.0;
    return out;
}

}  // namespace patas::data
