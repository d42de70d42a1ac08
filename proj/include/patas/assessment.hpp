#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "patas/opinion.hpp"
#include "patas/rng.hpp"

namespace patas::data {

/// Maps every sample/feature and every sample to a trust opinion.
struct TrustAssessment {
    std::function<sl::Opinion(std::size_t sample, std::size_t feature)> feature_opinion;
    std::function<sl::Opinion(std::size_t sample)> label_opinion;
};

/// Same constant opinion for every feature and label.
inline TrustAssessment assess_constant(const sl::Opinion& op) {
    return {[op](std::size_t, std::size_t) { return op; }, [op](std::size_t) { return op; }};
}

/// Pixels in the patch set are distrusted, all others trusted; labels trusted.
inline TrustAssessment assess_patch_aware(const std::vector<std::size_t>& patch_pixels) {
    auto set = std::make_shared<std::unordered_set<std::size_t>>(patch_pixels.begin(), patch_pixels.end());
    return {[set](std::size_t, std::size_t feature) {
                return set->count(feature) ? sl::Opinion::distrusted() : sl::Opinion::trusted();
            },
            [](std::size_t) { return sl::Opinion::trusted(); }};
}

/// Labels in the given classes are distrusted, all others trusted; features trusted.
inline TrustAssessment assess_label_aware(const std::vector<std::size_t>& classes,
                                          const std::vector<std::size_t>& labels) {
    auto set = std::make_shared<std::unordered_set<std::size_t>>(classes.begin(), classes.end());
    auto labs = std::make_shared<std::vector<std::size_t>>(labels);
    return {[](std::size_t, std::size_t) { return sl::Opinion::trusted(); },
            [set, labs](std::size_t sample) {
                return set->count((*labs)[sample]) ? sl::Opinion::distrusted() : sl::Opinion::trusted();
            }};
}

/// Each input feature is assigned trusted / distrusted / vacuous by thirds,
/// deterministically from the seed.
inline TrustAssessment assess_randomized_triplet(std::size_t width, std::uint64_t seed) {
    auto kinds = std::make_shared<std::vector<int>>(width);
    Rng rng(seed);
    for (auto& k : *kinds) k = static_cast<int>(rng.below(3));
    return {[kinds](std::size_t, std::size_t feature) {
                switch ((*kinds)[feature]) {
                    case 0: return sl::Opinion::trusted();
                    case 1: return sl::Opinion::distrusted();
                    default: return sl::Opinion::vacuous();
                }
            },
            [](std::size_t) { return sl::Opinion::vacuous(); }};
}

enum class AssessmentKind { constant, patch_aware, label_aware, randomized_triplet };

struct AssessmentParams {
    sl::Opinion constant_opinion;                 // constant
    std::vector<std::size_t> patch_pixels;        // patch_aware
    std::vector<std::size_t> distrusted_classes;  // label_aware
    std::vector<std::size_t> labels;              // label_aware
    std::size_t width = 0;                        // randomized_triplet
    std::uint64_t seed = 0;                       // randomized_triplet
};

inline TrustAssessment make_assessment(AssessmentKind kind, const AssessmentParams& params) {
    switch (kind) {
        case AssessmentKind::constant: return assess_constant(params.constant_opinion);
        case AssessmentKind::patch_aware: return assess_patch_aware(params.patch_pixels);
        case AssessmentKind::label_aware: return assess_label_aware(params.distrusted_classes, params.labels);
        case AssessmentKind::randomized_triplet: return assess_randomized_triplet(params.width, params.seed);
    }
    throw std::invalid_argument("make_assessment: unknown kind");
}

}  // namespace patas::data
