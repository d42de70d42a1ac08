#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "patas/mlp.hpp"
#include "patas/opinion.hpp"
#include "patas/rng.hpp"
#include "patas/serialize.hpp"
#include "patas/trustnet.hpp"

using namespace patas;
using namespace patas::trust;
using sl::Opinion;

namespace {

void expect_opinion(const Opinion& got, double b, double d, double u, double tol = 1e-9) {
    EXPECT_NEAR(got.belief(), b, tol);
    EXPECT_NEAR(got.disbelief(), d, tol);
    EXPECT_NEAR(got.uncertainty(), u, tol);
}

Opinion random_opinion(Rng& rng) {
    double a = rng.uniform01(), b = rng.uniform01();
    if (a > b) std::swap(a, b);
    return Opinion(a, b - a, 1.0 - b, rng.uniform01());
}

TrustNet random_net(Rng& rng) {
    const std::vector<std::size_t> sizes = {1 + rng.below(20), 1 + rng.below(10), 1 + rng.below(5)};
    TrustNet net(sizes, 0.1, 2.0);
    for (std::size_t l = 0; l < net.num_layers(); ++l)
        for (std::size_t i = 0; i < sizes[l + 1]; ++i)
            for (std::size_t j = 0; j <= sizes[l]; ++j) net.edge(l, i, j) = random_opinion(rng);
    return net;
}

/// Minimal batch trace with the given per-edge gradient value everywhere.
nn::BatchTrace uniform_trace(const std::vector<std::size_t>& sizes, double g) {
    nn::BatchTrace trace;
    trace.weight_gradients.resize(sizes.size() - 1);
    trace.bias_gradients.resize(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        trace.weight_gradients[l].assign(sizes[l + 1] * sizes[l], g);
        trace.bias_gradients[l].assign(sizes[l + 1], g);
    }
    return trace;
}

}  // namespace

TEST(TrustNet, InitAndErrors) {
    TrustNet net({3, 2}, 0.1, 2.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j <= 3; ++j)
            EXPECT_TRUE(net.edge(0, i, j) == Opinion::vacuous());

    TrustNet full({3, 2}, 0.1, 2.0, Opinion::trusted());
    EXPECT_TRUE(full.edge(0, 1, 2) == Opinion::trusted());

    EXPECT_THROW(TrustNet({3, 2}, 0.0, 2.0), std::invalid_argument);
    EXPECT_THROW(TrustNet({3, 2}, -0.5, 2.0), std::invalid_argument);
    EXPECT_THROW(TrustNet({3, 2}, 0.1, 0.0), std::invalid_argument);
    EXPECT_THROW(TrustNet({3}, 0.1, 2.0), std::invalid_argument);
}

TEST(TrustNet, FeedforwardVacuousAbsorption) {
    Rng rng(51);
    for (int rep = 0; rep < 20; ++rep) {
        TrustNet net = random_net(rng);
        const std::vector<Opinion> input(net.layer_sizes().front(), Opinion::vacuous());
        const auto out = probe_feedforward(net, input);
        for (const auto& op : out) {
            EXPECT_EQ(op.belief(), 0.0);
            EXPECT_EQ(op.disbelief(), 0.0);
            EXPECT_EQ(op.uncertainty(), 1.0);
        }
    }
}

TEST(TrustNet, FeedforwardFullTrustIdentity) {
    TrustNet net({4, 3, 2}, 0.1, 2.0, Opinion::trusted());
    const std::vector<Opinion> input(4, Opinion::trusted());
    const auto out = probe_feedforward(net, input);
    for (const auto& op : out) expect_opinion(op, 1, 0, 0, 1e-12);
}

TEST(TrustNet, PerceptronMatchesOperatorComposition) {
    // two inputs, one output node; compare against the direct fusion of
    // discounted opinions
    TrustNet net({2, 1}, 0.1, 2.0);
    const Opinion t1(0.7, 0.1, 0.2, 0.5), t2(0.4, 0.3, 0.3, 0.5);
    net.edge(0, 0, 0) = t1;
    net.edge(0, 0, 1) = t2;
    const Opinion ts(0.9, 0.05, 0.05, 0.5), tnr(0.2, 0.3, 0.5, 0.5);
    const Opinion da = sl::discount(t1, ts), db = sl::discount(t2, tnr);

    const auto out = probe_feedforward(net, {ts, tnr});
    expect_opinion(out[0], 0.5 * (da.belief() + db.belief()), 0.5 * (da.disbelief() + db.disbelief()),
                   0.5 * (da.uncertainty() + db.uncertainty()), 1e-12);

    net.uniform_node_fusion = false;
    const auto weighted = probe_feedforward(net, {ts, tnr});
    EXPECT_TRUE(approx_equal(weighted[0], sl::avg_fuse({da, db}), 1e-12));
}

TEST(TrustNet, FeedforwardDimensionMismatch) {
    TrustNet net({3, 2}, 0.1, 2.0);
    EXPECT_THROW(probe_feedforward(net, std::vector<Opinion>(2, Opinion::trusted())),
                 std::invalid_argument);
}

TEST(TrustNet, SymmetryAndZeroMassInvariants) {
    Rng rng(52);
    for (int rep = 0; rep < 30; ++rep) {
        TrustNet net = random_net(rng);
        const std::size_t width = net.layer_sizes().front();

        std::vector<Opinion> x, xbar;
        for (std::size_t j = 0; j < width; ++j) {
            const Opinion op = random_opinion(rng);
            x.push_back(op);
            xbar.emplace_back(op.disbelief(), op.belief(), op.uncertainty(), op.base_rate());
        }
        const auto y = probe_feedforward(net, x);
        const auto ybar = probe_feedforward(net, xbar);
        for (std::size_t k = 0; k < y.size(); ++k) {
            EXPECT_NEAR(y[k].belief(), ybar[k].disbelief(), 1e-9);
            EXPECT_NEAR(y[k].disbelief(), ybar[k].belief(), 1e-9);
            EXPECT_NEAR(y[k].uncertainty(), ybar[k].uncertainty(), 1e-9);
        }

        const auto trusted = probe_feedforward(net, std::vector<Opinion>(width, Opinion::trusted()));
        for (const auto& op : trusted) EXPECT_EQ(op.disbelief(), 0.0);
        const auto distrusted = probe_feedforward(net, std::vector<Opinion>(width, Opinion::distrusted()));
        for (const auto& op : distrusted) EXPECT_EQ(op.belief(), 0.0);
    }
}

TEST(TrustNet, AggregateOutput) {
    const Opinion a(0.6, 0, 0.4), b(0, 0.6, 0.4);
    expect_opinion(aggregate_output({a, a, a}, AggregationMode::fuse_all), 0.6, 0, 0.4);
    expect_opinion(aggregate_output({a, b}, AggregationMode::fuse_all), 0.3, 0.3, 0.4);
    EXPECT_TRUE(aggregate_output({a, b}, AggregationMode::decision, 1) == b);
    EXPECT_THROW(aggregate_output({}, AggregationMode::fuse_all), std::invalid_argument);
    EXPECT_THROW(aggregate_output({a}, AggregationMode::decision, 3), std::out_of_range);
}

TEST(TrustNet, NodeTrustExamples) {
    expect_opinion(node_trust({0, 0, 0, 0}, 0.1, 2.0), 2.0 / 3, 0, 1.0 / 3);
    expect_opinion(node_trust({0.001, 0.02, 0.005}, 0.01, 2.0), 0.4, 0.2, 0.4);
    expect_opinion(node_trust({123.0}, 0.1, 2.0), 0, 1.0 / 3, 2.0 / 3);
    EXPECT_THROW(node_trust({}, 0.1, 2.0), std::invalid_argument);
    EXPECT_THROW(node_trust({0.1}, 0.0, 2.0), std::invalid_argument);
}

TEST(TrustNet, DeduceNodeBoundaries) {
    const Opinion cond(0.7, 0.1, 0.2, 0.5);
    EXPECT_TRUE(approx_equal(deduce_node(cond, Opinion::trusted()), cond, 1e-12));
    EXPECT_TRUE(approx_equal(deduce_node(cond, Opinion::distrusted()), Opinion::vacuous(), 1e-12));
    expect_opinion(deduce_node(Opinion::distrusted(), Opinion::vacuous()), 0, 0.5, 0.5);
}

TEST(TrustNet, ParameterTrustUpdateWorkedExample) {
    // single output node fed by two edges, no bias evidence: drive it with a
    // 2-input/1-output net whose bias gradient also sits below epsilon, then
    // check against the hand-evaluated two-edge case after one update.
    TrustNet net({2, 1}, 0.1, 2.0);
    std::vector<Opinion> inputs = {Opinion::trusted(), Opinion::trusted()};
    trust_feedforward(net, inputs);

    nn::BatchTrace trace = uniform_trace({2, 1}, 0.0);
    parameter_trust_update(net, trace, {Opinion::trusted()}, inputs);

    // NodeTrust over 3 quiet edges (2 weights + bias): (3/5, 0, 2/5); labels
    // fully trusted so deduction returns it exactly. Step 5:
    // fuse{vacuous, (0.6,0,0.4)} = (3/7, 0, 4/7). Step 6 multiplies by
    // conservative((1,0,0),(1,0,0)) = (1,0,0,0.5).
    const Opinion after5(3.0 / 7, 0, 4.0 / 7, 0.5);
    const Opinion expected = sl::multiply(after5, Opinion(1, 0, 0, 0.5));
    for (std::size_t j = 0; j < 3; ++j) {
        const Opinion& got = net.edge(0, 0, j);
        EXPECT_NEAR(got.belief(), expected.belief(), 1e-12) << "edge " << j;
        EXPECT_NEAR(got.disbelief(), expected.disbelief(), 1e-12) << "edge " << j;
        EXPECT_NEAR(got.uncertainty(), expected.uncertainty(), 1e-12) << "edge " << j;
        EXPECT_EQ(got.base_rate(), 0.5) << "edge " << j;  // prior re-pinned by default
    }

    // operator-literal mode keeps the multiplied-through prior instead
    TrustNet raw({2, 1}, 0.1, 2.0);
    raw.rebase_trust_prior = false;
    trust_feedforward(raw, inputs);
    parameter_trust_update(raw, trace, {Opinion::trusted()}, inputs);
    for (std::size_t j = 0; j < 3; ++j)
        EXPECT_TRUE(approx_equal(raw.edge(0, 0, j), expected, 1e-12)) << "edge " << j;
}

TEST(TrustNet, ParameterTrustUpdateTwoEdgeHandValues) {
    // the literal two-edge neuron: evidence from exactly two quiet edges gives
    // NodeTrust (0.5, 0, 0.5); step 5 then yields (1/3, 0, 2/3) and step 6
    // (5/9, 0, 4/9) with base rate 0.25
    const Opinion cond = node_trust({0.0, 0.0}, 0.1, 2.0);
    expect_opinion(cond, 0.5, 0, 0.5);
    const Opinion deduced = deduce_node(cond, Opinion::trusted());
    const Opinion after5 = sl::avg_fuse({Opinion::vacuous(), deduced});
    expect_opinion(after5, 1.0 / 3, 0, 2.0 / 3);
    const Opinion after6 = sl::multiply(after5, sl::conservative(Opinion::trusted(), Opinion::trusted()));
    expect_opinion(after6, 5.0 / 9, 0, 4.0 / 9, 1e-12);
    EXPECT_NEAR(after6.base_rate(), 0.25, 1e-12);
}

TEST(TrustNet, DistrustedLabelsDriveEdgeDisbeliefToOne) {
    TrustNet net({3, 2}, 0.1, 2.0);
    const std::vector<Opinion> inputs(3, Opinion::trusted());
    const nn::BatchTrace trace = uniform_trace({3, 2}, 0.0);
    const std::vector<Opinion> labels(4, Opinion::distrusted());
    for (int it = 0; it < 3; ++it) {
        trust_feedforward(net, inputs);
        parameter_trust_update(net, trace, labels, inputs);
    }
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j <= 3; ++j) {
            EXPECT_NEAR(net.edge(0, i, j).disbelief(), 1.0, 1e-12);
            EXPECT_NEAR(net.edge(0, i, j).belief(), 0.0, 1e-12);
        }
    // and the trusted probe on such a net collapses to full uncertainty
    const auto out = probe_feedforward(net, inputs);
    for (const auto& op : out) expect_opinion(op, 0, 0, 1, 1e-12);
}

TEST(TrustNet, UpdateConvergesUnderConstantInputs) {
    TrustNet net({4, 3, 2}, 0.1, 2.0);
    const std::vector<Opinion> inputs(4, Opinion::trusted());
    const nn::BatchTrace trace = uniform_trace({4, 3, 2}, 0.01);
    const std::vector<Opinion> labels(8, Opinion::trusted());

    double prev_delta = 1e9;
    Opinion last = net.edge(0, 0, 0);
    for (int it = 0; it < 200; ++it) {
        trust_feedforward(net, inputs);
        parameter_trust_update(net, trace, labels, inputs);
        const double delta = sl::opinion_distance(net.edge(0, 0, 0), last);
        last = net.edge(0, 0, 0);
        if (it > 5) {
            EXPECT_LE(delta, prev_delta + 1e-9);
        }
        prev_delta = delta;
    }
    EXPECT_LT(prev_delta, 1e-9);
}

TEST(TrustNet, UpdateRequiresCache) {
    TrustNet net({2, 1}, 0.1, 2.0);
    const nn::BatchTrace trace = uniform_trace({2, 1}, 0.0);
    try {
        parameter_trust_update(net, trace, {Opinion::trusted()}, {Opinion::trusted(), Opinion::trusted()});
        FAIL() << "expected missing-cache error";
    } catch (const std::logic_error& e) {
        EXPECT_NE(std::string(e.what()).find("trust_feedforward"), std::string::npos);
    }
}

TEST(TrustNet, UpdateShapeChecks) {
    TrustNet net({2, 1}, 0.1, 2.0);
    std::vector<Opinion> inputs(2, Opinion::trusted());
    trust_feedforward(net, inputs);
    nn::BatchTrace bad = uniform_trace({3, 1}, 0.0);
    EXPECT_THROW(parameter_trust_update(net, bad, {Opinion::trusted()}, inputs), std::invalid_argument);
    nn::BatchTrace good = uniform_trace({2, 1}, 0.0);
    EXPECT_THROW(parameter_trust_update(net, good, {}, inputs), std::invalid_argument);
}

TEST(TrustNet, GenIptaFullTraceMatchesFeedforward) {
    Rng rng(53);
    for (int rep = 0; rep < 10; ++rep) {
        TrustNet net = random_net(rng);
        const auto& sizes = net.layer_sizes();
        nn::ActivationTrace trace;
        trace.active_nodes.resize(sizes.size());
        for (std::size_t l = 0; l < sizes.size(); ++l)
            for (std::size_t i = 0; i < sizes[l]; ++i) trace.active_nodes[l].push_back(i);

        TrustNet sub = gen_ipta(net, trace);
        std::vector<Opinion> input;
        for (std::size_t j = 0; j < sizes.front(); ++j) input.push_back(random_opinion(rng));
        const auto full = probe_feedforward(net, input);
        const auto pruned = probe_feedforward(sub, input);
        for (std::size_t k = 0; k < full.size(); ++k) EXPECT_TRUE(full[k] == pruned[k]);
    }
}

TEST(TrustNet, GenIptaVacuousAbsorptionAndStructure) {
    TrustNet net({3, 3, 2}, 0.1, 2.0, Opinion(0.6, 0.2, 0.2));
    nn::ActivationTrace trace;
    trace.active_nodes = {{0, 2}, {1}, {0, 1}};
    TrustNet sub = gen_ipta(net, trace);

    const auto vac = probe_feedforward(sub, std::vector<Opinion>(3, Opinion::vacuous()));
    for (const auto& op : vac) expect_opinion(op, 0, 0, 1, 1e-15);

    // single active hidden node: each output fuses only the one discounted path
    const std::vector<Opinion> input(3, Opinion::trusted());
    const auto out = probe_feedforward(sub, input);
    const Opinion da = sl::discount(net.edge(0, 1, 0), Opinion::trusted());
    const Opinion db = sl::discount(net.edge(0, 1, 2), Opinion::trusted());
    const Opinion hidden(0.5 * (da.belief() + db.belief()), 0.5 * (da.disbelief() + db.disbelief()),
                         0.5 * (da.uncertainty() + db.uncertainty()), 0.5);
    const Opinion expected0 = sl::discount(net.edge(1, 0, 1), hidden);
    EXPECT_TRUE(approx_equal(out[0], expected0, 1e-12));
}

TEST(TrustNet, GenIptaEmptyHiddenFallsBack) {
    TrustNet net({3, 2, 2}, 0.1, 2.0, Opinion(0.5, 0.1, 0.4));
    nn::ActivationTrace trace;
    trace.active_nodes = {{0, 1, 2}, {}, {0, 1}};

    std::string warned;
    auto old = patas::warn_handler();
    patas::warn_handler() = [&](const std::string& msg) { warned = msg; };
    TrustNet sub = gen_ipta(net, trace);
    patas::warn_handler() = old;

    EXPECT_NE(warned.find("full network"), std::string::npos);
    const std::vector<Opinion> input(3, Opinion::trusted());
    const auto a = probe_feedforward(net, input);
    const auto b = probe_feedforward(sub, input);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(a[k] == b[k]);
}

TEST(TrustNet, ModelTrust) {
    TrustNet full({4, 3, 2}, 0.1, 2.0, Opinion::trusted());
    expect_opinion(model_trust(full), 1, 0, 0, 1e-12);

    TrustNet vac({4, 3, 2}, 0.1, 2.0);
    EXPECT_EQ(model_trust(vac).disbelief(), 0.0);
}

TEST(TrustNet, JsonRoundTrip) {
    Rng rng(54);
    TrustNet net = random_net(rng);
    const auto j = to_json(net);
    EXPECT_EQ(j.at("format"), "patas-trustnet");
    const TrustNet back = trustnet_from_json(j);
    const auto& sizes = net.layer_sizes();
    for (std::size_t l = 0; l < net.num_layers(); ++l)
        for (std::size_t i = 0; i < sizes[l + 1]; ++i)
            for (std::size_t k = 0; k <= sizes[l]; ++k)
                EXPECT_TRUE(net.edge(l, i, k) == back.edge(l, i, k));
}
