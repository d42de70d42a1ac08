#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "patas/experiment.hpp"
#include "patas/synth_digits.hpp"

using namespace patas;
using namespace patas::exp;

namespace {

std::string tmp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_cancer(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::cancer;
    cfg.wdbc_path = std::string(PATAS_DATA_DIR) + "/wdbc.csv";
    cfg.seed = seed;
    cfg.epochs = 3;
    return cfg;
}

}  // namespace

TEST(Experiment, ConfigDefaults) {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::cancer;
    cfg.finalize();
    EXPECT_EQ(cfg.architecture, (std::vector<std::size_t>{30, 16, 2}));
    EXPECT_EQ(cfg.epochs, 15u);
    EXPECT_EQ(cfg.batch_size, 64u);
    EXPECT_DOUBLE_EQ(cfg.learning_rate, 0.2);

    ExperimentConfig m;
    m.experiment = ExperimentKind::mnist;
    m.hidden = 5;
    m.finalize();
    EXPECT_EQ(m.architecture, (std::vector<std::size_t>{784, 5, 10}));
    EXPECT_DOUBLE_EQ(m.learning_rate, 0.001);

    ExperimentConfig bad;
    bad.experiment = ExperimentKind::cancer;
    bad.epsilon = -1;
    EXPECT_THROW(bad.finalize(), std::invalid_argument);
}

TEST(Experiment, SeriesInvariants) {
    auto result = run_experiment(small_cancer(4));
    ASSERT_FALSE(result.series.rows.empty());

    // rows appear for every probe at every iteration, masses sum to 1
    std::map<std::string, std::vector<MetricsRow>> by_probe;
    for (const auto& r : result.series.rows) {
        EXPECT_NEAR(r.trust + r.distrust + r.uncertainty, 1.0, 1e-9);
        by_probe[r.probe].push_back(r);
    }
    ASSERT_EQ(by_probe.size(), 5u);  // three canonical + two intermediate for cancer

    const auto& trusted = by_probe.at("trusted");
    const auto& distrusted = by_probe.at("distrusted");
    const auto& uncertain = by_probe.at("uncertain");
    ASSERT_EQ(trusted.size(), distrusted.size());
    for (std::size_t i = 0; i < trusted.size(); ++i) {
        if (i > 0) {
            EXPECT_GT(trusted[i].iteration, trusted[i - 1].iteration);
        }
        // probing a vacuous profile always returns full uncertainty
        EXPECT_EQ(uncertain[i].uncertainty, 1.0);
        // symmetric probes mirror each other exactly
        EXPECT_EQ(trusted[i].trust, distrusted[i].distrust);
        EXPECT_EQ(trusted[i].uncertainty, distrusted[i].uncertainty);
        EXPECT_EQ(trusted[i].distrust, 0.0);
        EXPECT_EQ(distrusted[i].trust, 0.0);
    }
}

TEST(Experiment, TrustDeltasShrinkByFinalEpoch) {
    ExperimentConfig cfg = small_cancer(4);
    cfg.epochs = 15;
    auto result = run_experiment(cfg);
    std::vector<double> trusted;
    for (const auto& r : result.series.rows)
        if (r.probe == "trusted") trusted.push_back(r.trust);
    const std::size_t per_epoch = (trusted.size() - 1) / cfg.epochs;
    const double last = trusted.back();
    const double prev_epoch = trusted[trusted.size() - 1 - per_epoch];
    EXPECT_LT(std::abs(last - prev_epoch), 0.01);
}

TEST(Experiment, EmitWritesStableFiles) {
    const std::string dir_a = tmp_dir("patas_emit_a");
    const std::string dir_b = tmp_dir("patas_emit_b");

    ExperimentConfig cfg = small_cancer(9);
    auto r1 = run_experiment(cfg);
    emit(r1.series, r1.summary, cfg, r1.net, dir_a);
    auto r2 = run_experiment(cfg);
    emit(r2.series, r2.summary, cfg, r2.net, dir_b);

    const std::string csv_a = slurp(dir_a + "/metrics.csv");
    EXPECT_EQ(csv_a, slurp(dir_b + "/metrics.csv"));
    EXPECT_NE(csv_a.find("iteration,probe,trust,distrust,uncertainty,train_acc,test_acc"), std::string::npos);

    // header-only CSV for an empty series
    MetricsSeries empty;
    emit(empty, r1.summary, cfg, r1.net, dir_a);
    EXPECT_EQ(slurp(dir_a + "/metrics.csv"),
              "iteration,probe,trust,distrust,uncertainty,train_acc,test_acc\n");

    // trustnet checkpoint reloads
    const auto net = trustnet_from_json(read_json_file(dir_b + "/trustnet.json"));
    EXPECT_EQ(net.layer_sizes(), r2.net.layer_sizes());
}

TEST(Experiment, DifferentSeedsDiffer) {
    auto a = run_experiment(small_cancer(4));
    auto b = run_experiment(small_cancer(5));
    double ta = 0, tb = 0;
    for (auto& [n, op] : a.summary.final_probe_opinions)
        if (n == "trusted") ta = op.belief();
    for (auto& [n, op] : b.summary.final_probe_opinions)
        if (n == "trusted") tb = op.belief();
    EXPECT_NE(ta, tb);
}

TEST(Experiment, MnistPipelineSmoke) {
    const std::string dir = tmp_dir("patas_mnist_smoke");
    data::generate_digit_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", 400, 21);
    data::generate_digit_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", 100, 22);

    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::poisoned_mnist;
    cfg.mnist_images = dir + "/train-images-idx3-ubyte";
    cfg.mnist_labels = dir + "/train-labels-idx1-ubyte";
    cfg.mnist_test_images = dir + "/t10k-images-idx3-ubyte";
    cfg.mnist_test_labels = dir + "/t10k-labels-idx1-ubyte";
    cfg.seed = 5;
    cfg.epochs = 1;
    auto r = run_experiment(cfg);
    ASSERT_EQ(r.summary.class_trusts.size(), 2u);
    EXPECT_EQ(r.poison.patch_pixels.size(), 16u);
    EXPECT_GT(r.poison.poisoned_count, 0u);
    ASSERT_GE(r.summary.ipta_rows.size(), 3u);

    cfg.experiment = ExperimentKind::ipta;
    cfg.epochs = 1;
    auto ripta = run_experiment(cfg);
    ASSERT_EQ(ripta.summary.ipta_rows.size(), 4u);
    // fully trusted probe carries no disbelief through the IPTA
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_EQ(ripta.summary.ipta_rows[k].opinion.disbelief(), 0.0);
}

TEST(Experiment, FlippedLabelsLearnTheWrongMapping) {
    ExperimentConfig cfg = small_cancer(231);
    cfg.epochs = 15;
    cfg.y_profile = ProfileKind::distrusted;
    auto r = run_experiment(cfg);
    // the model fits the inverted labels, so accuracy against true test labels collapses
    EXPECT_GE(r.summary.final_train_acc, 0.8);
    EXPECT_LE(r.summary.final_test_acc, 0.2);
}

TEST(Experiment, MissingDataSurfacesError) {
    ExperimentConfig cfg = small_cancer(1);
    cfg.wdbc_path = "/nonexistent/wdbc.csv";
    EXPECT_THROW(run_experiment(cfg), std::runtime_error);
}
