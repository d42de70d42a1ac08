#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "patas/mlp.hpp"
#include "patas/rng.hpp"

namespace patas::data {

/// Feature matrix (rows = samples) with class labels and the per-feature
/// valid range the stored values live in. Degradations must stay inside
/// [feature_min, feature_max].
struct LabeledDataset {
    std::vector<std::vector<double>> features;
    std::vector<std::size_t> labels;
    std::vector<double> feature_min;
    std::vector<double> feature_max;
    std::size_t num_classes = 0;
    std::string name;

    std::size_t size() const { return features.size(); }
    std::size_t width() const { return features.empty() ? feature_min.size() : features[0].size(); }
};

struct TrainTestSplit {
    LabeledDataset train;
    LabeledDataset test;
};

namespace detail {

inline LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
    LabeledDataset out;
    out.feature_min = ds.feature_min;
    out.feature_max = ds.feature_max;
    out.num_classes = ds.num_classes;
    out.name = ds.name;
    out.features.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (auto i : idx) {
        out.features.push_back(ds.features[i]);
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw std::runtime_error("idx: truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

/// Load the Breast Cancer Wisconsin (Diagnostic) CSV: id, diagnosis (M/B),
/// 30 numeric features. Features are min-max normalized per feature to [0,1];
/// labels M -> 1, B -> 0.
inline LabeledDataset load_wdbc(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_wdbc: cannot open " + path);
    LabeledDataset ds;
    ds.name = "wdbc";
    ds.num_classes = 2;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 32)
            throw std::runtime_error("load_wdbc: row " + std::to_string(row) + ": expected 32 columns, got " +
                                     std::to_string(cells.size()));
        std::size_t label;
        if (cells[1] == "M")
            label = 1;
        else if (cells[1] == "B")
            label = 0;
        else
            throw std::runtime_error("load_wdbc: row " + std::to_string(row) + ": diagnosis must be M or B");
        std::vector<double> feats(30);
        for (std::size_t j = 0; j < 30; ++j) {
            try {
                std::size_t pos = 0;
                feats[j] = std::stod(cells[j + 2], &pos);
                if (pos != cells[j + 2].size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw std::runtime_error("load_wdbc: row " + std::to_string(row) + ": bad numeric in column " +
                                         std::to_string(j + 2));
            }
        }
        ds.features.push_back(std::move(feats));
        ds.labels.push_back(label);
    }
    if (ds.features.empty()) throw std::runtime_error("load_wdbc: no rows in " + path);

    const std::size_t w = ds.features[0].size();
    std::vector<double> lo(w, std::numeric_limits<double>::infinity());
    std::vector<double> hi(w, -std::numeric_limits<double>::infinity());
    for (const auto& r : ds.features)
        for (std::size_t j = 0; j < w; ++j) {
            lo[j] = std::min(lo[j], r[j]);
            hi[j] = std::max(hi[j], r[j]);
        }
    for (auto& r : ds.features)
        for (std::size_t j = 0; j < w; ++j) r[j] = hi[j] > lo[j] ? (r[j] - lo[j]) / (hi[j] - lo[j]) : 0.0;
    ds.feature_min.assign(w, 0.0);
    ds.feature_max.assign(w, 1.0);
    return ds;
}

/// Load an MNIST-format IDX image/label pair. Images: magic 0x00000803 with
/// dims [count, rows, cols]; labels: magic 0x00000801 with dims [count].
/// Pixels are scaled to [0,1].
inline LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_mnist_idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("load_mnist_idx: cannot open " + labels_path);

    const std::uint32_t img_magic = detail::read_be32(img, images_path);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("load_mnist_idx: bad image magic in " + images_path);
    const std::uint32_t n_img = detail::read_be32(img, images_path);
    const std::uint32_t rows = detail::read_be32(img, images_path);
    const std::uint32_t cols = detail::read_be32(img, images_path);

    const std::uint32_t lab_magic = detail::read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("load_mnist_idx: bad label magic in " + labels_path);
    const std::uint32_t n_lab = detail::read_be32(lab, labels_path);
    if (n_img != n_lab)
        throw std::runtime_error("load_mnist_idx: image count " + std::to_string(n_img) +
                                 " != label count " + std::to_string(n_lab));

    LabeledDataset ds;
    ds.name = "mnist";
    ds.num_classes = 10;
    const std::size_t w = static_cast<std::size_t>(rows) * cols;
    ds.features.resize(n_img);
    ds.labels.resize(n_img);
    std::vector<unsigned char> buf(w);
    for (std::uint32_t i = 0; i < n_img; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(w)))
            throw std::runtime_error("load_mnist_idx: truncated image payload in " + images_path);
        auto& row = ds.features[i];
        row.resize(w);
        for (std::size_t j = 0; j < w; ++j) row[j] = buf[j] / 255.0;
        char lb;
        if (!lab.read(&lb, 1))
            throw std::runtime_error("load_mnist_idx: truncated label payload in " + labels_path);
        ds.labels[i] = static_cast<unsigned char>(lb);
    }
    ds.feature_min.assign(w, 0.0);
    ds.feature_max.assign(w, 1.0);
    return ds;
}

/// Stratified split with a seeded per-class shuffle.
inline TrainTestSplit split_stratified(const LabeledDataset& ds, double train_fraction,
                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_stratified: fraction must be in (0,1)");
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (auto& cls : by_class) {
        rng.shuffle(cls);
        const std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * cls.size()));
        for (std::size_t k = 0; k < cls.size(); ++k)
            (k < n_train ? train_idx : test_idx).push_back(cls[k]);
    }
    return {detail::take_rows(ds, train_idx), detail::take_rows(ds, test_idx)};
}

/// Keep a seeded random subset of at most n samples (all if n == 0).
inline LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n >= ds.size()) return ds;
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(n);
    return detail::take_rows(ds, idx);
}

/// Rows of one class, labels preserved.
inline LabeledDataset select_class(const LabeledDataset& ds, std::size_t label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] == label) idx.push_back(i);
    return detail::take_rows(ds, idx);
}

/// Keep only the given classes, relabeling them 0..k-1 in the order given.
inline LabeledDataset filter_classes(const LabeledDataset& ds, const std::vector<std::size_t>& classes) {
    LabeledDataset out;
    out.feature_min = ds.feature_min;
    out.feature_max = ds.feature_max;
    out.num_classes = classes.size();
    out.name = ds.name;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (ds.labels[i] == classes[c]) {
                out.features.push_back(ds.features[i]);
                out.labels.push_back(c);
                break;
            }
        }
    }
    return out;
}

/// Fraction of argmax-correct predictions.
inline double evaluate(const nn::MlpModel& model, const LabeledDataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (model.predict(ds.features[i]) == ds.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

/// Dump features+labels as CSV for inspection.
inline void export_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_csv: cannot open " + path);
    out << "label";
    for (std::size_t j = 0; j < ds.width(); ++j) out << ",f" << j;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (double v : ds.features[i]) out << ',' << v;
        out << "\n";
    }
}

}  // namespace patas::data
