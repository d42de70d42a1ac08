#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patas/assessment.hpp"
#include "patas/dataset.hpp"
#include "patas/degrade.hpp"
#include "patas/mlp.hpp"
#include "patas/opinion.hpp"
#include "patas/serialize.hpp"
#include "patas/trustnet.hpp"

namespace patas::exp {

using sl::Opinion;

enum class ExperimentKind { cancer, mnist, poisoned_mnist, ipta };

/// Trust profile for one side (features or labels) of the training data.
/// Each kind pairs an assessment opinion with the matching degradation.
/// randomized assigns trusted/distrusted/vacuous opinions to inputs by thirds
/// over the uncertain-case degradation.
enum class ProfileKind { trusted, uncertain, distrusted, mixed_light, mixed_conflict, randomized };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::cancer: return "cancer";
        case ExperimentKind::mnist: return "mnist";
        case ExperimentKind::poisoned_mnist: return "poisoned-mnist";
        case ExperimentKind::ipta: return "ipta";
    }
    return "?";
}

inline std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::trusted: return "trusted";
        case ProfileKind::uncertain: return "uncertain";
        case ProfileKind::distrusted: return "distrusted";
        case ProfileKind::mixed_light: return "mixed_light";
        case ProfileKind::mixed_conflict: return "mixed_conflict";
        case ProfileKind::randomized: return "randomized";
    }
    return "?";
}

inline ProfileKind profile_from_string(const std::string& s) {
    if (s == "trusted") return ProfileKind::trusted;
    if (s == "uncertain") return ProfileKind::uncertain;
    if (s == "distrusted") return ProfileKind::distrusted;
    if (s == "mixed_light") return ProfileKind::mixed_light;
    if (s == "mixed_conflict") return ProfileKind::mixed_conflict;
    if (s == "randomized") return ProfileKind::randomized;
    throw std::invalid_argument("unknown profile kind: " + s);
}

inline ExperimentKind experiment_from_string(const std::string& s) {
    if (s == "cancer") return ExperimentKind::cancer;
    if (s == "mnist") return ExperimentKind::mnist;
    if (s == "poisoned-mnist" || s == "poisoned_mnist") return ExperimentKind::poisoned_mnist;
    if (s == "ipta" || s == "poisoned-binary-ipta") return ExperimentKind::ipta;
    throw std::invalid_argument("unknown experiment: " + s);
}

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::cancer;
    std::vector<std::size_t> architecture;  // filled by finalize() when empty
    std::size_t hidden = 0;                 // hidden width override (mnist)
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0;
    double epsilon = 0;  // filled per experiment by finalize()
    double w_quant = 0;
    std::uint64_t seed = 1;
    ProfileKind x_profile = ProfileKind::trusted;
    ProfileKind y_profile = ProfileKind::trusted;
    std::size_t patch_size = 4;
    double poison_fraction = 1.0 / 3.0;
    trust::AggregationMode aggregation = trust::AggregationMode::fuse_all;
    std::size_t decision_class = 0;
    std::size_t subsample_train = 0;  // 0 = full
    std::size_t subsample_test = 0;
    std::size_t eval_every = 0;  // iterations between accuracy evals; 0 = once per epoch
    std::size_t checkpoint_every = 0;  // epochs between trustnet checkpoints; 0 = none
    std::string out_dir;

    std::string wdbc_path = "data/wdbc.csv";
    std::string mnist_images = "data/train-images-idx3-ubyte";
    std::string mnist_labels = "data/train-labels-idx1-ubyte";
    std::string mnist_test_images = "data/t10k-images-idx3-ubyte";
    std::string mnist_test_labels = "data/t10k-labels-idx1-ubyte";

    /// Fill unset hyperparameters with the per-experiment defaults.
    void finalize() {
        switch (experiment) {
            case ExperimentKind::cancer:
                if (architecture.empty()) architecture = {30, 16, 2};
                if (epochs == 0) epochs = 15;
                if (batch_size == 0) batch_size = 64;
                if (learning_rate == 0) learning_rate = 0.2;
                if (epsilon == 0) epsilon = 0.1;
                if (w_quant == 0) w_quant = 8;
                break;
            case ExperimentKind::mnist:
                if (architecture.empty()) architecture = {784, hidden ? hidden : 20, 10};
                if (epochs == 0) epochs = 10;
                if (batch_size == 0) batch_size = 18;
                if (learning_rate == 0) learning_rate = 0.001;
                if (epsilon == 0) epsilon = 0.1;
                if (w_quant == 0) w_quant = 2;
                break;
            case ExperimentKind::poisoned_mnist:
                if (architecture.empty()) architecture = {784, hidden ? hidden : 20, 10};
                if (epochs == 0) epochs = 10;
                if (batch_size == 0) batch_size = 18;
                if (learning_rate == 0) learning_rate = 0.01;
                if (epsilon == 0) epsilon = 0.1;
                if (w_quant == 0) w_quant = 2;
                break;
            case ExperimentKind::ipta:
                if (architecture.empty()) architecture = {784, hidden ? hidden : 20, 2};
                if (epochs == 0) epochs = 8;
                if (batch_size == 0) batch_size = 18;
                if (learning_rate == 0) learning_rate = 0.02;
                if (epsilon == 0) epsilon = 0.01;
                if (w_quant == 0) w_quant = 2;
                break;
        }
        if (epochs == 0 || batch_size == 0 || !(learning_rate > 0))
            throw std::invalid_argument("ExperimentConfig: hyperparameters must be positive");
        if (!(epsilon > 0) || !(w_quant > 0))
            throw std::invalid_argument("ExperimentConfig: epsilon and w_quant must be positive");
    }

    nlohmann::json to_json() const {
        return {{"experiment", to_string(experiment)},
                {"architecture", architecture},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"epsilon", epsilon},
                {"w_quant", w_quant},
                {"seed", seed},
                {"x_profile", to_string(x_profile)},
                {"y_profile", to_string(y_profile)},
                {"patch_size", patch_size},
                {"poison_fraction", poison_fraction},
                {"aggregation",
                 aggregation == trust::AggregationMode::fuse_all
                     ? "fuse_all"
                     : "decision:" + std::to_string(decision_class)},
                {"subsample_train", subsample_train},
                {"subsample_test", subsample_test},
                {"eval_every", eval_every}};
    }
};

struct MetricsRow {
    std::size_t iteration;
    std::string probe;
    double trust, distrust, uncertainty;
    double train_acc, test_acc;
};

struct MetricsSeries {
    std::vector<MetricsRow> rows;
};

struct IptaRow {
    std::string name;
    double accuracy = -1;  // < 0 when not applicable
    Opinion opinion;
};

struct ExperimentSummary {
    std::vector<std::pair<std::string, Opinion>> final_probe_opinions;
    double final_train_acc = 0;
    double final_test_acc = 0;
    std::vector<std::pair<std::string, Opinion>> class_trusts;  // poisoned-mnist
    std::vector<IptaRow> ipta_rows;                             // ipta experiment
    double elapsed_seconds = 0;
};

struct ExperimentResult {
    MetricsSeries series;
    ExperimentSummary summary;
    nn::MlpModel model;
    trust::TrustNet net;
    data::LabeledDataset train;  // post-degradation
    data::LabeledDataset test;
    data::PoisonInfo poison;
};

namespace detail {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) { return Rng::derive(seed, stream); }

inline Opinion profile_opinion(ProfileKind k) {
    switch (k) {
        case ProfileKind::trusted: return Opinion::trusted();
        case ProfileKind::uncertain: return Opinion::vacuous();
        case ProfileKind::distrusted: return Opinion::distrusted();
        case ProfileKind::mixed_light: return Opinion(0.25, 0, 0.75);
        case ProfileKind::mixed_conflict: return Opinion(0.25, 0.25, 0.5);
        case ProfileKind::randomized: return Opinion::vacuous();
    }
    return Opinion::vacuous();
}

inline data::LabeledDataset degrade_features_for(const data::LabeledDataset& ds, ProfileKind k,
                                                 std::uint64_t seed) {
    switch (k) {
        case ProfileKind::trusted: return ds;
        case ProfileKind::uncertain: return data::noise_features(ds, 0.3, 0.3, seed);
        case ProfileKind::distrusted: return data::corrupt_features(ds, seed);
        case ProfileKind::mixed_light: return data::noise_features(ds, 0.15, 0.3, seed);
        case ProfileKind::mixed_conflict: return data::noise_features(ds, 0.3, 0.3, seed);
        case ProfileKind::randomized: return data::noise_features(ds, 0.3, 0.3, seed);
    }
    return ds;
}

inline data::LabeledDataset degrade_labels_for(const data::LabeledDataset& ds, ProfileKind k,
                                               std::uint64_t seed) {
    switch (k) {
        case ProfileKind::trusted: return ds;
        case ProfileKind::uncertain: return data::degrade_labels(ds, data::LabelDegradation::noisy, 0.3, seed);
        case ProfileKind::distrusted:
            return data::degrade_labels(ds, data::LabelDegradation::flip_all, 0, seed);
        case ProfileKind::mixed_light: return ds;
        case ProfileKind::mixed_conflict:
            return data::degrade_labels(ds, data::LabelDegradation::noisy, 0.3, seed);
        case ProfileKind::randomized:
            return data::degrade_labels(ds, data::LabelDegradation::noisy, 0.3, seed);
    }
    return ds;
}

/// Monitoring probes: the three canonical opinions, plus the two intermediate
/// profiles when running the cancer experiment.
inline std::vector<std::pair<std::string, Opinion>> probe_set(ExperimentKind kind) {
    std::vector<std::pair<std::string, Opinion>> probes = {
        {"trusted", Opinion::trusted()},
        {"uncertain", Opinion::vacuous()},
        {"distrusted", Opinion::distrusted()},
    };
    if (kind == ExperimentKind::cancer) {
        probes.emplace_back("mixed_light", Opinion(0.25, 0, 0.75));
        probes.emplace_back("mixed_conflict", Opinion(0.25, 0.25, 0.5));
    }
    return probes;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Per-feature trust of a batch: fuse the per-sample opinions (identical
/// opinions collapse by idempotence).
inline std::vector<Opinion> batch_feature_trusts(const data::TrustAssessment& assessment,
                                                 const std::vector<std::size_t>& batch,
                                                 std::size_t width) {
    std::vector<Opinion> result(width, Opinion::vacuous());
    std::vector<Opinion> per_sample(batch.size(), Opinion::vacuous());
    for (std::size_t j = 0; j < width; ++j) {
        bool same = true;
        for (std::size_t s = 0; s < batch.size(); ++s) {
            per_sample[s] = assessment.feature_opinion(batch[s], j);
            if (s > 0 && !(per_sample[s] == per_sample[0])) same = false;
        }
        result[j] = same ? per_sample[0] : sl::avg_fuse(per_sample);
    }
    return result;
}

}  // namespace detail

/// IPTA evaluation over labeled sets: per set, model accuracy plus the fused
/// per-inference IPTA opinion under the fully trusted probe. eval_sets pairs a
/// display name with the samples; when patch_distrust_set is non-empty an
/// extra row probes the last set with the patch pixels distrusted.
inline std::vector<IptaRow> run_ipta_eval(const nn::MlpModel& model, const trust::TrustNet& net,
                                          const std::vector<std::pair<std::string, data::LabeledDataset>>& eval_sets,
                                          const std::vector<std::size_t>& patch_distrust_set = {},
                                          std::size_t max_samples = 400) {
    std::vector<IptaRow> rows;
    const std::size_t width = net.layer_sizes().front();
    const std::vector<Opinion> trusted_profile(width, Opinion::trusted());
    std::vector<Opinion> patch_profile(width, Opinion::trusted());
    for (auto p : patch_distrust_set) patch_profile[p] = Opinion::distrusted();

    for (std::size_t k = 0; k < eval_sets.size(); ++k) {
        const auto& [name, ds] = eval_sets[k];
        if (ds.size() == 0) throw std::invalid_argument("run_ipta_eval: empty eval set " + name);
        const std::size_t n = std::min(ds.size(), max_samples);

        std::size_t correct = 0;
        std::vector<Opinion> opinions;
        std::vector<Opinion> patch_opinions;
        opinions.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            nn::ActivationTrace trace;
            std::vector<double> probs = model.forward(ds.features[i], &trace);
            const std::size_t pred =
                static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            if (pred == ds.labels[i]) ++correct;
            trust::TrustNet sub = trust::gen_ipta(net, trace);
            opinions.push_back(
                trust::aggregate_output(trust::probe_feedforward(sub, trusted_profile),
                                        trust::AggregationMode::fuse_all));
            if (!patch_distrust_set.empty() && k + 1 == eval_sets.size())
                patch_opinions.push_back(
                    trust::aggregate_output(trust::probe_feedforward(sub, patch_profile),
                                            trust::AggregationMode::fuse_all));
        }
        // accuracy over the full set; opinions fused over the evaluated prefix
        double acc = data::evaluate(model, ds);
        rows.push_back({name, acc, sl::avg_fuse(opinions)});
        if (!patch_opinions.empty())
            rows.push_back({name + "_patch_distrusted", -1, sl::avg_fuse(patch_opinions)});
    }
    return rows;
}

/// Run one experiment end to end: build the degraded dataset, train with
/// per-batch trust updates, probe after every iteration, and collect the
/// summary.
inline ExperimentResult run_experiment(ExperimentConfig config) {
    config.finalize();
    const auto t0 = std::chrono::steady_clock::now();

    // --- data ---
    data::LabeledDataset train, test;
    data::PoisonInfo poison;
    if (config.experiment == ExperimentKind::cancer) {
        data::LabeledDataset full = data::load_wdbc(config.wdbc_path);
        auto split = data::split_stratified(full, 0.8, detail::sub_seed(config.seed, 1));
        train = std::move(split.train);
        test = std::move(split.test);
    } else {
        train = data::load_mnist_idx(config.mnist_images, config.mnist_labels);
        test = data::load_mnist_idx(config.mnist_test_images, config.mnist_test_labels);
    }
    if (config.subsample_train) train = data::subsample(train, config.subsample_train, detail::sub_seed(config.seed, 2));
    if (config.subsample_test) test = data::subsample(test, config.subsample_test, detail::sub_seed(config.seed, 3));

    data::TrustAssessment x_assess, y_assess;
    if (config.experiment == ExperimentKind::cancer || config.experiment == ExperimentKind::mnist) {
        train = detail::degrade_features_for(train, config.x_profile, detail::sub_seed(config.seed, 4));
        train = detail::degrade_labels_for(train, config.y_profile, detail::sub_seed(config.seed, 5));
        x_assess = config.x_profile == ProfileKind::randomized
                       ? data::assess_randomized_triplet(train.width(), detail::sub_seed(config.seed, 8))
                       : data::assess_constant(detail::profile_opinion(config.x_profile));
        y_assess = data::assess_constant(detail::profile_opinion(config.y_profile));
    } else if (config.experiment == ExperimentKind::poisoned_mnist) {
        auto [poisoned, info] = data::poison_mnist(train, config.poison_fraction, config.patch_size,
                                                   detail::sub_seed(config.seed, 6));
        train = std::move(poisoned);
        poison = std::move(info);
        x_assess = data::assess_patch_aware(poison.patch_pixels);
        // distrust labels of poisoned samples whose post-flip label is 6 or 9
        auto poisoned_flags = std::make_shared<std::vector<bool>>(poison.poisoned);
        auto labels = std::make_shared<std::vector<std::size_t>>(train.labels);
        y_assess.feature_opinion = [](std::size_t, std::size_t) { return Opinion::trusted(); };
        y_assess.label_opinion = [poisoned_flags, labels](std::size_t s) {
            const bool bad = (*poisoned_flags)[s] && ((*labels)[s] == 6 || (*labels)[s] == 9);
            return bad ? Opinion::distrusted() : Opinion::trusted();
        };
    } else {  // ipta: binary 3-vs-6, backdoored, fully trusted assessments
        train = data::filter_classes(train, {3, 6});
        test = data::filter_classes(test, {3, 6});
        auto [poisoned, info] = data::poison_binary36(train, config.poison_fraction, config.patch_size,
                                                      detail::sub_seed(config.seed, 6));
        train = std::move(poisoned);
        poison = std::move(info);
        x_assess = data::assess_constant(Opinion::trusted());
        y_assess = data::assess_constant(Opinion::trusted());
    }

    if (train.size() == 0 || test.size() == 0)
        throw std::runtime_error("run_experiment: empty train or test split");
    if (train.width() != config.architecture.front())
        throw std::runtime_error("run_experiment: architecture input width != dataset width");

    // --- model + trust net ---
    nn::MlpModel model(config.architecture, detail::sub_seed(config.seed, 7));
    trust::TrustNet net(config.architecture, config.epsilon, config.w_quant);

    const auto probes = detail::probe_set(config.experiment);
    std::vector<std::vector<Opinion>> probe_profiles;
    for (const auto& [name, op] : probes)
        probe_profiles.emplace_back(train.width(), op);

    ExperimentResult result;
    double train_acc = data::evaluate(model, train);
    double test_acc = data::evaluate(model, test);

    auto record = [&](std::size_t iteration) {
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const Opinion out = trust::aggregate_output(trust::probe_feedforward(net, probe_profiles[p]),
                                                        config.aggregation, config.decision_class);
            result.series.rows.push_back({iteration, probes[p].first, out.belief(), out.disbelief(),
                                          out.uncertainty(), train_acc, test_acc});
        }
    };
    record(0);

    // --- training loop ---
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::size_t iteration = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(detail::sub_seed(config.seed, 100 + epoch));
        shuffle_rng.shuffle(order);
        // partial tail batches are dropped: an undersized batch's mean
        // gradients are disproportionately noisy evidence for NodeTrust
        for (std::size_t start = 0; start + config.batch_size <= order.size();
             start += config.batch_size) {
            const std::size_t end = start + config.batch_size;
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);

            std::vector<std::vector<double>> xs;
            std::vector<std::size_t> ys;
            xs.reserve(batch.size());
            for (auto i : batch) {
                xs.push_back(train.features[i]);
                ys.push_back(train.labels[i]);
            }
            std::vector<Opinion> feat_trusts = detail::batch_feature_trusts(x_assess, batch, train.width());
            std::vector<Opinion> label_trusts;
            label_trusts.reserve(batch.size());
            for (auto i : batch) label_trusts.push_back(y_assess.label_opinion(i));

            trust::trust_feedforward(net, feat_trusts);
            nn::BatchTrace trace = model.train_batch(xs, ys, config.learning_rate);
            trust::parameter_trust_update(net, trace, label_trusts, feat_trusts);

            ++iteration;
            if (config.eval_every && iteration % config.eval_every == 0) {
                train_acc = data::evaluate(model, train);
                test_acc = data::evaluate(model, test);
            }
            record(iteration);
        }
        if (!config.eval_every) {
            train_acc = data::evaluate(model, train);
            test_acc = data::evaluate(model, test);
        }
        if (config.checkpoint_every && !config.out_dir.empty() &&
            (epoch + 1) % config.checkpoint_every == 0) {
            std::filesystem::create_directories(config.out_dir);
            write_json_file(patas::to_json(net),
                            config.out_dir + "/trustnet_epoch" + std::to_string(epoch + 1) + ".json");
        }
    }
    train_acc = data::evaluate(model, train);
    test_acc = data::evaluate(model, test);

    // --- summary ---
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const Opinion out = trust::aggregate_output(trust::probe_feedforward(net, probe_profiles[p]),
                                                    config.aggregation, config.decision_class);
        result.summary.final_probe_opinions.emplace_back(probes[p].first, out);
    }
    result.summary.final_train_acc = train_acc;
    result.summary.final_test_acc = test_acc;

    if (config.experiment == ExperimentKind::poisoned_mnist) {
        const std::vector<Opinion> trusted_profile(train.width(), Opinion::trusted());
        auto outputs = trust::probe_feedforward(net, trusted_profile);
        result.summary.class_trusts.emplace_back("class_3", outputs[3]);
        result.summary.class_trusts.emplace_back("class_6", outputs[6]);

        std::vector<std::pair<std::string, data::LabeledDataset>> sets;
        sets.emplace_back("clean_3", data::select_class(test, 3));
        sets.emplace_back("clean_6", data::select_class(test, 6));
        sets.emplace_back("poisoned_6", data::apply_patch(data::select_class(test, 6), config.patch_size));
        result.summary.ipta_rows = run_ipta_eval(model, net, sets, data::patch_pixel_set(config.patch_size), 100);
    } else if (config.experiment == ExperimentKind::ipta) {
        std::vector<std::pair<std::string, data::LabeledDataset>> sets;
        sets.emplace_back("clean_3", data::select_class(test, 0));
        sets.emplace_back("clean_6", data::select_class(test, 1));
        sets.emplace_back("poisoned_6", data::apply_patch(data::select_class(test, 1), config.patch_size));
        result.summary.ipta_rows =
            run_ipta_eval(model, net, sets, data::patch_pixel_set(config.patch_size));
    }

    result.summary.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.model = std::move(model);
    result.net = std::move(net);
    result.train = std::move(train);
    result.test = std::move(test);
    result.poison = std::move(poison);
    return result;
}

/// Write metrics.csv / summary.json / trustnet.json into out_dir. Overwrites
/// idempotently; metrics.csv is byte-stable for identical runs.
inline void emit(const MetricsSeries& series, const ExperimentSummary& summary,
                 const ExperimentConfig& config, const trust::TrustNet& net,
                 const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("emit: cannot create directory " + out_dir + ": " + ec.message());

    const std::string csv_path = out_dir + "/metrics.csv";
    {
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("emit: cannot open " + csv_path);
        csv << "iteration,probe,trust,distrust,uncertainty,train_acc,test_acc\n";
        for (const auto& r : series.rows) {
            csv << r.iteration << ',' << r.probe << ',' << detail::fmt_double(r.trust) << ','
                << detail::fmt_double(r.distrust) << ',' << detail::fmt_double(r.uncertainty) << ','
                << detail::fmt_double(r.train_acc) << ',' << detail::fmt_double(r.test_acc) << "\n";
        }
        if (!csv) throw std::runtime_error("emit: failed writing " + csv_path);
    }

    nlohmann::json js;
    js["config"] = config.to_json();
    for (const auto& [name, op] : summary.final_probe_opinions)
        js["final_trust"][name] = to_json(op);
    js["final_train_accuracy"] = summary.final_train_acc;
    js["final_test_accuracy"] = summary.final_test_acc;
    for (const auto& [name, op] : summary.class_trusts) js["class_trusts"][name] = to_json(op);
    if (!summary.ipta_rows.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : summary.ipta_rows) {
            nlohmann::json row = {{"set", r.name}, {"opinion", to_json(r.opinion)}};
            if (r.accuracy >= 0) row["accuracy"] = r.accuracy;
            rows.push_back(std::move(row));
        }
        js["ipta"] = std::move(rows);
    }
    js["elapsed_seconds"] = summary.elapsed_seconds;
    write_json_file(js, out_dir + "/summary.json");
    write_json_file(to_json(net), out_dir + "/trustnet.json");
}

}  // namespace patas::exp
