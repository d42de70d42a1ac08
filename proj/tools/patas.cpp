#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "patas/experiment.hpp"
#include "patas/selftest.hpp"
#include "patas/synth_digits.hpp"

namespace {

using patas::exp::ExperimentConfig;

/// Flat key=value config file; keys mirror the CLI flag names.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

void apply_aggregation(ExperimentConfig& cfg, const std::string& spec) {
    if (spec == "fuse_all") {
        cfg.aggregation = patas::trust::AggregationMode::fuse_all;
    } else if (spec.rfind("decision:", 0) == 0) {
        cfg.aggregation = patas::trust::AggregationMode::decision;
        cfg.decision_class = std::stoul(spec.substr(9));
    } else {
        throw CLI::ValidationError("--aggregation", "expected fuse_all or decision:K");
    }
}

void apply_data_dir(ExperimentConfig& cfg, const std::string& dir) {
    cfg.wdbc_path = dir + "/wdbc.csv";
    cfg.mnist_images = dir + "/train-images-idx3-ubyte";
    cfg.mnist_labels = dir + "/train-labels-idx1-ubyte";
    cfg.mnist_test_images = dir + "/t10k-images-idx3-ubyte";
    cfg.mnist_test_labels = dir + "/t10k-labels-idx1-ubyte";
}

int cmd_run(ExperimentConfig cfg) {
    patas::exp::ExperimentResult result = patas::exp::run_experiment(cfg);
    cfg.finalize();

    if (!cfg.out_dir.empty())
        patas::exp::emit(result.series, result.summary, cfg, result.net, cfg.out_dir);

    std::printf("experiment: %s  seed %llu  epsilon %g  W %g\n",
                patas::exp::to_string(cfg.experiment).c_str(),
                static_cast<unsigned long long>(cfg.seed), cfg.epsilon, cfg.w_quant);
    for (const auto& [name, op] : result.summary.final_probe_opinions)
        std::printf("  probe %-14s trust %.4f  distrust %.4f  uncertainty %.4f\n", name.c_str(),
                    op.belief(), op.disbelief(), op.uncertainty());
    for (const auto& [name, op] : result.summary.class_trusts)
        std::printf("  %-20s trust %.4f  distrust %.4f  uncertainty %.4f\n", name.c_str(),
                    op.belief(), op.disbelief(), op.uncertainty());
    for (const auto& row : result.summary.ipta_rows) {
        std::printf("  ipta %-28s", row.name.c_str());
        if (row.accuracy >= 0) std::printf(" acc %6.2f%%", 100.0 * row.accuracy);
        std::printf("  t %.4f d %.4f u %.4f\n", row.opinion.belief(), row.opinion.disbelief(),
                    row.opinion.uncertainty());
    }
    std::printf("  final accuracy: train %.4f test %.4f  (%.1fs)\n", result.summary.final_train_acc,
                result.summary.final_test_acc, result.summary.elapsed_seconds);
    if (!cfg.out_dir.empty())
        std::printf("  wrote %s/{metrics.csv,summary.json,trustnet.json}\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_selftest() {
    const auto results = patas::run_selftests();
    bool all_ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : ": ", r.detail.c_str());
        all_ok = all_ok && r.passed;
    }
    if (!all_ok) {
        nlohmann::json failures = nlohmann::json::array();
        for (const auto& r : results)
            if (!r.passed) failures.push_back({{"check", r.name}, {"detail", r.detail}});
        std::printf("failures: %s\n", failures.dump().c_str());
        return 1;
    }
    std::printf("all %zu checks passed\n", results.size());
    return 0;
}

int cmd_gen_digits(const std::string& out_dir, std::size_t train_n, std::size_t test_n,
                   std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    patas::data::generate_digit_idx(out_dir + "/train-images-idx3-ubyte",
                                    out_dir + "/train-labels-idx1-ubyte", train_n, seed);
    patas::data::generate_digit_idx(out_dir + "/t10k-images-idx3-ubyte",
                                    out_dir + "/t10k-labels-idx1-ubyte", test_n, seed + 1);
    std::printf("wrote %zu train and %zu test digits under %s\n", train_n, test_n, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subjective-logic trust propagation for neural networks"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string experiment_name = "cancer";
    std::string x_profile = "trusted", y_profile = "trusted";
    std::string aggregation = "fuse_all";
    std::string config_path, data_dir;

    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", config_path, "key=value config file; flags override");
    run->add_option("--experiment", experiment_name, "cancer|mnist|poisoned-mnist|ipta");
    run->add_option("--epsilon", cfg.epsilon, "NodeTrust gradient threshold");
    run->add_option("--w-quant", cfg.w_quant, "baseline-prior quantification weight");
    run->add_option("--seed", cfg.seed, "experiment seed");
    run->add_option("--epochs", cfg.epochs, "training epochs");
    run->add_option("--batch-size", cfg.batch_size, "SGD batch size");
    run->add_option("--lr", cfg.learning_rate, "learning rate");
    run->add_option("--hidden", cfg.hidden, "hidden width (mnist experiments)");
    run->add_option("--patch-size", cfg.patch_size, "backdoor patch side length");
    run->add_option("--poison-fraction", cfg.poison_fraction, "poisoned sample fraction");
    run->add_option("--x-profile", x_profile,
                    "trusted|uncertain|distrusted|mixed_light|mixed_conflict|randomized");
    run->add_option("--y-profile", y_profile, "label trust profile");
    run->add_option("--aggregation", aggregation, "fuse_all or decision:K");
    run->add_option("--subsample", cfg.subsample_train, "cap training samples (0 = all)");
    run->add_option("--subsample-test", cfg.subsample_test, "cap test samples (0 = all)");
    run->add_option("--eval-every", cfg.eval_every, "accuracy eval cadence in iterations (0 = per epoch)");
    run->add_option("--checkpoint-every", cfg.checkpoint_every, "trustnet checkpoint cadence in epochs (0 = end only)");
    run->add_option("--out", cfg.out_dir, "output directory for metrics/summary/checkpoint");
    run->add_option("--data-dir", data_dir, "directory holding wdbc.csv and MNIST idx files");
    run->add_option("--wdbc", cfg.wdbc_path, "WDBC csv path");
    run->add_option("--mnist-images", cfg.mnist_images, "training images idx path");
    run->add_option("--mnist-labels", cfg.mnist_labels, "training labels idx path");
    run->add_option("--mnist-test-images", cfg.mnist_test_images, "test images idx path");
    run->add_option("--mnist-test-labels", cfg.mnist_test_labels, "test labels idx path");

    auto* selftest = app.add_subcommand("selftest", "Run the property suites");

    std::string gen_out = "data";
    std::size_t gen_train = 6000, gen_test = 2000;
    std::uint64_t gen_seed = 11;
    auto* gen = app.add_subcommand("gen-digits", "Generate a synthetic digit corpus in IDX format");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--train", gen_train, "training image count");
    gen->add_option("--test", gen_test, "test image count");
    gen->add_option("--seed", gen_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) return cmd_selftest();
        if (gen->parsed()) return cmd_gen_digits(gen_out, gen_train, gen_test, gen_seed);

        // config file first, then flags the user actually passed win
        if (!config_path.empty()) {
            for (const auto& [key, value] : read_config_file(config_path)) {
                auto overridden = [&](const std::string& flag) {
                    return run->count("--" + flag) > 0;
                };
                if (key == "experiment" && !overridden(key)) experiment_name = value;
                else if (key == "epsilon" && !overridden(key)) cfg.epsilon = std::stod(value);
                else if (key == "w-quant" && !overridden(key)) cfg.w_quant = std::stod(value);
                else if (key == "seed" && !overridden(key)) cfg.seed = std::stoull(value);
                else if (key == "epochs" && !overridden(key)) cfg.epochs = std::stoul(value);
                else if (key == "batch-size" && !overridden(key)) cfg.batch_size = std::stoul(value);
                else if (key == "lr" && !overridden(key)) cfg.learning_rate = std::stod(value);
                else if (key == "hidden" && !overridden(key)) cfg.hidden = std::stoul(value);
                else if (key == "patch-size" && !overridden(key)) cfg.patch_size = std::stoul(value);
                else if (key == "poison-fraction" && !overridden(key)) cfg.poison_fraction = std::stod(value);
                else if (key == "x-profile" && !overridden(key)) x_profile = value;
                else if (key == "y-profile" && !overridden(key)) y_profile = value;
                else if (key == "aggregation" && !overridden(key)) aggregation = value;
                else if (key == "subsample" && !overridden(key)) cfg.subsample_train = std::stoul(value);
                else if (key == "subsample-test" && !overridden(key)) cfg.subsample_test = std::stoul(value);
                else if (key == "eval-every" && !overridden(key)) cfg.eval_every = std::stoul(value);
                else if (key == "out" && !overridden(key)) cfg.out_dir = value;
                else if (key == "data-dir" && !overridden(key)) data_dir = value;
                else if (key == "wdbc" && !overridden(key)) cfg.wdbc_path = value;
            }
        }

        if (!data_dir.empty()) {
            const std::string wdbc = cfg.wdbc_path, mi = cfg.mnist_images, ml = cfg.mnist_labels,
                              ti = cfg.mnist_test_images, tl = cfg.mnist_test_labels;
            apply_data_dir(cfg, data_dir);
            if (run->count("--wdbc")) cfg.wdbc_path = wdbc;
            if (run->count("--mnist-images")) cfg.mnist_images = mi;
            if (run->count("--mnist-labels")) cfg.mnist_labels = ml;
            if (run->count("--mnist-test-images")) cfg.mnist_test_images = ti;
            if (run->count("--mnist-test-labels")) cfg.mnist_test_labels = tl;
        }
        cfg.experiment = patas::exp::experiment_from_string(experiment_name);
        cfg.x_profile = patas::exp::profile_from_string(x_profile);
        cfg.y_profile = patas::exp::profile_from_string(y_profile);
        apply_aggregation(cfg, aggregation);
        return cmd_run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
