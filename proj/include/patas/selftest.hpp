#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "patas/dataset.hpp"
#include "patas/mlp.hpp"
#include "patas/opinion.hpp"
#include "patas/rng.hpp"
#include "patas/synth_digits.hpp"
#include "patas/trustnet.hpp"

namespace patas {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace selftest_detail {

inline sl::Opinion random_opinion(Rng& rng, double min_u = 0.0) {
    double a = rng.uniform01(), b = rng.uniform01();
    if (a > b) std::swap(a, b);
    double x = a, y = b - a, z = 1.0 - b;
    if (z < min_u) {
        const double scale = (x + y) > 0 ? (1.0 - min_u) / (x + y) : 0.0;
        x *= scale;
        y *= scale;
        z = 1.0 - x - y;
    }
    return sl::Opinion(x, y, z, rng.uniform01());
}

inline SelftestResult check(const std::string& name, const std::function<std::string()>& body) {
    SelftestResult r;
    r.name = name;
    try {
        r.detail = body();
        r.passed = r.detail.empty();
    } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
    }
    return r;
}

}  // namespace selftest_detail

/// Property suites behind `patas selftest`: operator laws, the end-to-end
/// trust-propagation guarantees, and the gradient oracle.
inline std::vector<SelftestResult> run_selftests() {
    using namespace selftest_detail;
    using sl::Opinion;
    std::vector<SelftestResult> results;

    results.push_back(check("discount-vacuous-absorption", [] {
        Rng rng(101);
        for (int i = 0; i < 500; ++i) {
            const Opinion r = random_opinion(rng);
            const double a = rng.uniform01();
            const Opinion out = sl::discount(r, Opinion::vacuous(a));
            if (out.belief() != 0.0 || out.disbelief() != 0.0 || out.uncertainty() != 1.0)
                return "absorption violated at case " + std::to_string(i);
        }
        return std::string();
    }));

    results.push_back(check("avg-fuse-idempotence-permutation", [] {
        Rng rng(102);
        for (int i = 0; i < 500; ++i) {
            const std::size_t n = 2 + rng.below(6);
            std::vector<Opinion> ops;
            for (std::size_t k = 0; k < n; ++k) ops.push_back(random_opinion(rng));
            const Opinion fused = sl::avg_fuse(ops);
            std::vector<Opinion> shuffled = ops;
            rng.shuffle(shuffled);
            if (!sl::approx_equal(fused, sl::avg_fuse(shuffled), 1e-9))
                return "permutation variance at case " + std::to_string(i);
            std::vector<Opinion> same(n, ops[0]);
            if (!sl::approx_equal(sl::avg_fuse(same), ops[0], 1e-9))
                return "idempotence violated at case " + std::to_string(i);
        }
        return std::string();
    }));

    results.push_back(check("fusion-sequence-convergence", [] {
        Rng rng(103);
        for (int i = 0; i < 200; ++i) {
            Opinion w = random_opinion(rng, 0.01);
            const Opinion q = random_opinion(rng, 0.05);
            double prev = sl::opinion_distance(w, q);
            int n = 0;
            for (; n < 10000 && prev >= 1e-6; ++n) {
                w = sl::avg_fuse({w, q});
                const double d = sl::opinion_distance(w, q);
                if (d > prev + 1e-12) return "distance increased at case " + std::to_string(i);
                prev = d;
            }
            if (prev >= 1e-6) return "no convergence at case " + std::to_string(i);
        }
        return std::string();
    }));

    results.push_back(check("multiplication-sequence-limits", [] {
        Rng rng(104);
        for (int i = 0; i < 200; ++i) {
            Opinion q = random_opinion(rng);
            q = Opinion(q.belief(), q.disbelief(), q.uncertainty(), rng.uniform(0, 0.95));
            Opinion w = random_opinion(rng);
            const double d0 = w.disbelief();
            const bool d_const = q.disbelief() == 0.0;
            for (int n = 0; n < 3000; ++n) w = sl::multiply(w, q);
            if (w.base_rate() >= 1e-9) return "base rate did not vanish at case " + std::to_string(i);
            if (d_const && w.disbelief() != d0) return "disbelief drifted at case " + std::to_string(i);
            if (!d_const && q.disbelief() > 0.05 && w.disbelief() <= 1 - 1e-6)
                return "disbelief did not saturate at case " + std::to_string(i);
        }
        return std::string();
    }));

    results.push_back(check("feedforward-vacuous-and-symmetry", [] {
        Rng rng(105);
        for (int rep = 0; rep < 30; ++rep) {
            const std::vector<std::size_t> sizes = {1 + rng.below(20), 1 + rng.below(10), 1 + rng.below(5)};
            trust::TrustNet net(sizes, 0.1, 2.0);
            for (std::size_t l = 0; l < net.num_layers(); ++l)
                for (std::size_t i = 0; i < sizes[l + 1]; ++i)
                    for (std::size_t j = 0; j <= sizes[l]; ++j) net.edge(l, i, j) = random_opinion(rng);

            const auto vac = trust::probe_feedforward(net, std::vector<Opinion>(sizes[0], Opinion::vacuous()));
            for (const auto& op : vac)
                if (op.uncertainty() != 1.0) return "vacuous absorption failed at net " + std::to_string(rep);

            std::vector<Opinion> x, xbar;
            for (std::size_t j = 0; j < sizes[0]; ++j) {
                const Opinion op = random_opinion(rng);
                x.push_back(op);
                xbar.emplace_back(op.disbelief(), op.belief(), op.uncertainty(), op.base_rate());
            }
            const auto y = trust::probe_feedforward(net, x);
            const auto ybar = trust::probe_feedforward(net, xbar);
            for (std::size_t k = 0; k < y.size(); ++k)
                if (std::abs(y[k].belief() - ybar[k].disbelief()) > 1e-9 ||
                    std::abs(y[k].uncertainty() - ybar[k].uncertainty()) > 1e-9)
                    return "symmetry failed at net " + std::to_string(rep);
        }
        return std::string();
    }));

    results.push_back(check("gradient-finite-difference", [] {
        nn::MlpModel model({3, 4, 2}, 17);
        Rng rng(106);
        std::vector<std::vector<double>> xs(5, std::vector<double>(3));
        for (auto& x : xs)
            for (auto& v : x) v = rng.uniform01();
        const std::vector<std::size_t> ys = {0, 1, 1, 0, 1};
        nn::MlpModel probe = model;
        const nn::BatchTrace trace = probe.train_batch(xs, ys, 0.0);
        auto loss_at = [&](const nn::MlpModel& m) {
            double loss = 0;
            for (std::size_t s = 0; s < xs.size(); ++s) loss += -std::log(m.forward(xs[s])[ys[s]]);
            return loss / static_cast<double>(xs.size());
        };
        const double h = 1e-6;
        for (std::size_t l = 0; l < model.num_layers(); ++l)
            for (std::size_t i = 0; i < model.layer_sizes()[l + 1]; ++i)
                for (std::size_t j = 0; j < model.layer_sizes()[l]; ++j) {
                    nn::MlpModel pert = model;
                    pert.weight(l, i, j) += h;
                    const double up = loss_at(pert);
                    pert.weight(l, i, j) -= 2 * h;
                    const double dn = loss_at(pert);
                    const double fd = (up - dn) / (2 * h);
                    const double an = trace.weight_gradients[l][i * model.layer_sizes()[l] + j];
                    if (std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}) >= 1e-4)
                        return "gradient mismatch at layer " + std::to_string(l);
                }
        return std::string();
    }));

    results.push_back(check("synthetic-digits-deterministic", [] {
        const std::string dir = "/tmp";
        data::generate_digit_idx(dir + "/st-a-img", dir + "/st-a-lab", 50, 3);
        data::generate_digit_idx(dir + "/st-b-img", dir + "/st-b-lab", 50, 3);
        const auto a = data::load_mnist_idx(dir + "/st-a-img", dir + "/st-a-lab");
        const auto b = data::load_mnist_idx(dir + "/st-b-img", dir + "/st-b-lab");
        if (a.features != b.features || a.labels != b.labels) return std::string("regeneration differs");
        return std::string();
    }));

    return results;
}

}  // namespace patas
