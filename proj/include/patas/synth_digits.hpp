#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "patas/rng.hpp"

namespace patas::data {

/// Deterministic 28x28 digit renderer for self-contained experiments: a
/// seven-segment skeleton per digit with per-sample affine jitter, stroke
/// intensity variation and pixel noise, emitted in the MNIST IDX format so it
/// flows through the exact same loaders as the real files.
namespace synth {

// segment layout (classic seven-segment):
//   0: top, 1: top-left, 2: top-right, 3: middle, 4: bottom-left,
//   5: bottom-right, 6: bottom
inline const std::array<std::uint8_t, 10>& segment_masks() {
    static const std::array<std::uint8_t, 10> masks = {
        0b1110111,  // 0
        0b0100100,  // 1
        0b1011101,  // 2
        0b1101101,  // 3
        0b0101110,  // 4
        0b1101011,  // 5
        0b1111011,  // 6
        0b0100101,  // 7
        0b1111111,  // 8
        0b1101111,  // 9
    };
    return masks;
}

struct Segment {
    double x0, y0, x1, y1;  // in a unit glyph box
};

inline const std::array<Segment, 7>& segment_lines() {
    static const std::array<Segment, 7> segs = {{
        {0.15, 0.05, 0.85, 0.05},  // top
        {0.12, 0.08, 0.12, 0.48},  // top-left
        {0.88, 0.08, 0.88, 0.48},  // top-right
        {0.15, 0.50, 0.85, 0.50},  // middle
        {0.12, 0.52, 0.12, 0.92},  // bottom-left
        {0.88, 0.52, 0.88, 0.92},  // bottom-right
        {0.15, 0.95, 0.85, 0.95},  // bottom
    }};
    return segs;
}

/// Render one digit into a 784-vector of [0,1] intensities.
inline std::vector<double> render_digit(std::size_t digit, Rng& rng) {
    constexpr int side = 28;
    std::vector<double> img(side * side, 0.0);

    // glyph box ~16x20 px, jittered placement and shear; occasional segment
    // dropout creates genuinely ambiguous samples (a 9 missing its top-left
    // stroke reads as a 3), mirroring the hard tail of real scans
    const double gw = 14.0 * rng.uniform(0.8, 1.2);
    const double gh = 19.0 * rng.uniform(0.85, 1.1);
    const double ox = 7.0 + rng.uniform(-3.0, 3.0);
    const double oy = 4.0 + rng.uniform(-2.0, 2.5);
    const double shear = rng.uniform(-0.22, 0.22);
    const double thickness = rng.uniform(0.9, 1.9);

    const std::uint8_t mask = segment_masks()[digit];
    for (std::size_t s = 0; s < 7; ++s) {
        if (!(mask & (1u << s))) continue;
        if (rng.uniform01() < 0.06) continue;  // dropout
        const double intensity = rng.uniform(0.55, 1.0);
        const auto& seg = segment_lines()[s];
        // sample points along the segment and splat a soft disc
        const double x0 = ox + seg.x0 * gw + shear * seg.y0 * gh;
        const double y0 = oy + seg.y0 * gh;
        const double x1 = ox + seg.x1 * gw + shear * seg.y1 * gh;
        const double y1 = oy + seg.y1 * gh;
        const int steps = 24;
        for (int t = 0; t <= steps; ++t) {
            const double f = static_cast<double>(t) / steps;
            const double cx = x0 + f * (x1 - x0);
            const double cy = y0 + f * (y1 - y0);
            const int rlo = std::max(0, static_cast<int>(cy - thickness - 1));
            const int rhi = std::min(side - 1, static_cast<int>(cy + thickness + 1));
            const int clo = std::max(0, static_cast<int>(cx - thickness - 1));
            const int chi = std::min(side - 1, static_cast<int>(cx + thickness + 1));
            for (int r = rlo; r <= rhi; ++r)
                for (int c = clo; c <= chi; ++c) {
                    const double dx = c - cx, dy = r - cy;
                    const double dist2 = dx * dx + dy * dy;
                    const double v = intensity * std::exp(-dist2 / (0.6 * thickness * thickness));
                    img[r * side + c] = std::max(img[r * side + c], v);
                }
        }
    }

    // jitter stroke intensities, keep the background at exact zero like the
    // real scans, then sprinkle a few stray speckles
    for (auto& v : img) {
        if (v < 0.05) {
            v = 0.0;
            continue;
        }
        v += rng.uniform(-0.08, 0.08);
        v = std::min(1.0, std::max(0.0, v));
    }
    const std::size_t speckles = rng.below(10);
    for (std::size_t s = 0; s < speckles; ++s)
        img[rng.below(img.size())] = rng.uniform(0.1, 0.7);
    return img;
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace synth

/// Generate count synthetic digit images and write them as an IDX pair.
inline void generate_digit_idx(const std::string& images_path, const std::string& labels_path,
                               std::size_t count, std::uint64_t seed) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("generate_digit_idx: cannot open " + images_path);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("generate_digit_idx: cannot open " + labels_path);

    synth::write_be32(img, 0x00000803u);
    synth::write_be32(img, static_cast<std::uint32_t>(count));
    synth::write_be32(img, 28);
    synth::write_be32(img, 28);
    synth::write_be32(lab, 0x00000801u);
    synth::write_be32(lab, static_cast<std::uint32_t>(count));

    Rng rng(seed);
    std::vector<unsigned char> row(784);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t digit = static_cast<std::size_t>(rng.below(10));
        const std::vector<double> px = synth::render_digit(digit, rng);
        for (std::size_t j = 0; j < px.size(); ++j)
            row[j] = static_cast<unsigned char>(std::lround(px[j] * 255.0));
        img.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
        const char lb = static_cast<char>(digit);
        lab.write(&lb, 1);
    }
}

}  // namespace patas::data
