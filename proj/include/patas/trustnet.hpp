#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "patas/log.hpp"
#include "patas/mlp.hpp"
#include "patas/opinion.hpp"

namespace patas::trust {

using sl::Opinion;

/// Per-edge trust opinions mirroring an MLP's topology. Edge matrices have one
/// extra column holding the bias edge (a virtual input of constant 1).
///
/// The trust feedforward follows the Trust Function: per node, discount every
/// incoming trust by its edge trust and average-fuse the results (trust
/// activation = identity). The bias edge carries a trust opinion and is
/// revised like any other parameter, but by default it is excluded from the
/// feedforward fusion: a constant-trust term there would break the
/// vacuous-absorption and symmetry guarantees the rest of the system relies
/// on. include_bias_in_feedforward restores the literal fused bias term.
class TrustNet {
  public:
    TrustNet() = default;

    TrustNet(std::vector<std::size_t> layer_sizes, double epsilon, double w_quant,
             const Opinion& init = Opinion::vacuous())
        : sizes_(std::move(layer_sizes)), epsilon_(epsilon), w_quant_(w_quant) {
        if (sizes_.size() < 2) throw std::invalid_argument("TrustNet: need at least two layers");
        for (auto s : sizes_)
            if (s < 1) throw std::invalid_argument("TrustNet: layer sizes must be >= 1");
        if (!(epsilon_ > 0)) throw std::invalid_argument("TrustNet: epsilon must be > 0");
        if (!(w_quant_ > 0)) throw std::invalid_argument("TrustNet: quantification weight must be > 0");
        edges_.resize(num_layers());
        for (std::size_t l = 0; l < num_layers(); ++l)
            edges_[l].assign(sizes_[l + 1] * (sizes_[l] + 1), init);
        node_mask_.resize(sizes_.size());
        for (std::size_t l = 0; l < sizes_.size(); ++l) node_mask_[l].assign(sizes_[l], true);
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t num_layers() const { return sizes_.size() - 1; }
    double epsilon() const { return epsilon_; }
    double w_quant() const { return w_quant_; }

    /// Edge trust for target node i in layer l+1 from source j in layer l;
    /// j == layer_sizes()[l] addresses the bias edge.
    Opinion& edge(std::size_t layer, std::size_t i, std::size_t j) {
        return edges_[layer][i * (sizes_[layer] + 1) + j];
    }
    const Opinion& edge(std::size_t layer, std::size_t i, std::size_t j) const {
        return edges_[layer][i * (sizes_[layer] + 1) + j];
    }
    std::size_t bias_index(std::size_t layer) const { return sizes_[layer]; }

    bool include_bias_in_feedforward = false;
    Opinion lr_trust = Opinion::trusted();
    bool use_lr_in_update = false;

    /// Stored trust opinions are (t, d, u) triples over a binary proposition;
    /// their prior stays at trust_prior rather than compounding through the
    /// multiplication operator's a_x * a_y (which would decay it geometrically
    /// and depress every projected probability downstream).
    bool rebase_trust_prior = true;
    double trust_prior = sl::kDefaultBaseRate;

    /// Node fusion weights every incoming edge equally (componentwise mean),
    /// mirroring the equal-footing summation z = sum_i theta_i x_i it stands
    /// in for. The uncertainty-weighted generalization would let a handful of
    /// confident edges drown out distrusted ones, which inverts the trigger
    /// dominance a large dead patch is supposed to produce. false restores
    /// the weighted operator.
    bool uniform_node_fusion = true;

    const std::vector<std::vector<bool>>& node_mask() const { return node_mask_; }
    std::vector<std::vector<bool>>& node_mask() { return node_mask_; }

    bool has_cache() const { return cache_.has_value(); }
    const std::vector<std::vector<Opinion>>& cache() const {
        if (!cache_) throw std::logic_error("TrustNet: no cached feedforward; run trust_feedforward first");
        return *cache_;
    }
    void store_cache(std::vector<std::vector<Opinion>> c) { cache_ = std::move(c); }
    void clear_cache() { cache_.reset(); }

  private:
    std::vector<std::size_t> sizes_;
    std::vector<std::vector<Opinion>> edges_;  // [layer][i * (fan_in+1) + j]
    std::vector<std::vector<bool>> node_mask_;
    double epsilon_ = 0.1;
    double w_quant_ = 2.0;
    std::optional<std::vector<std::vector<Opinion>>> cache_;
};

inline TrustNet new_trustnet(const std::vector<std::size_t>& layer_sizes, double epsilon,
                             double w_quant, const Opinion& init = Opinion::vacuous()) {
    return TrustNet(layer_sizes, epsilon, w_quant, init);
}

namespace detail {

/// Componentwise mean of opinions; exact for identical inputs.
inline Opinion mean_fuse(const std::vector<Opinion>& ops) {
    bool same = true;
    for (const auto& o : ops)
        if (!(o == ops[0])) {
            same = false;
            break;
        }
    if (same) return ops[0];
    double b = 0, d = 0, u = 0, a = 0;
    for (const auto& o : ops) {
        b += o.belief();
        d += o.disbelief();
        u += o.uncertainty();
        a += o.base_rate();
    }
    const double n = static_cast<double>(ops.size());
    return Opinion(b / n, d / n, u / n, a / n);
}

/// Layer-by-layer trust propagation; returns the trust vector at every level
/// (index 0 = inputs). Masked-out nodes are skipped as fusion sources; a node
/// left with no live inputs gets a vacuous opinion.
inline std::vector<std::vector<Opinion>> feedforward_levels(const TrustNet& net,
                                                            const std::vector<Opinion>& input_trust) {
    const auto& sizes = net.layer_sizes();
    if (input_trust.size() != sizes.front())
        throw std::invalid_argument("trust_feedforward: input width " + std::to_string(input_trust.size()) +
                                    " != " + std::to_string(sizes.front()));
    std::vector<std::vector<Opinion>> levels;
    levels.reserve(sizes.size());
    levels.push_back(input_trust);

    std::vector<Opinion> terms;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const auto& src = levels.back();
        std::vector<Opinion> out(sizes[l + 1], Opinion::vacuous());
        for (std::size_t i = 0; i < sizes[l + 1]; ++i) {
            if (!net.node_mask()[l + 1][i]) continue;
            terms.clear();
            for (std::size_t j = 0; j < sizes[l]; ++j) {
                if (!net.node_mask()[l][j]) continue;
                terms.push_back(sl::discount(net.edge(l, i, j), src[j]));
            }
            if (net.include_bias_in_feedforward)
                terms.push_back(sl::discount(net.edge(l, i, net.bias_index(l)), Opinion::trusted()));
            if (!terms.empty()) out[i] = net.uniform_node_fusion ? mean_fuse(terms) : sl::avg_fuse(terms);
        }
        levels.push_back(std::move(out));
    }
    return levels;
}

}  // namespace detail

/// Trust feedforward for the training path: propagates input trust to the
/// outputs and caches every intermediate level for the parameter-trust update.
inline std::vector<Opinion> trust_feedforward(TrustNet& net, const std::vector<Opinion>& input_trust) {
    auto levels = detail::feedforward_levels(net, input_trust);
    std::vector<Opinion> out = levels.back();
    net.store_cache(std::move(levels));
    return out;
}

/// Read-only probe: same propagation, no cache mutation. Safe to run
/// concurrently on a shared net.
inline std::vector<Opinion> probe_feedforward(const TrustNet& net, const std::vector<Opinion>& input_trust) {
    return detail::feedforward_levels(net, input_trust).back();
}

enum class AggregationMode { fuse_all, decision };

/// Combine per-output trust opinions into one: fuse them all, or pick the
/// opinion of the decided class.
inline Opinion aggregate_output(const std::vector<Opinion>& output_trusts, AggregationMode mode,
                                std::size_t class_index = 0) {
    if (output_trusts.empty()) throw std::invalid_argument("aggregate_output: empty vector");
    if (mode == AggregationMode::decision) {
        if (class_index >= output_trusts.size())
            throw std::out_of_range("aggregate_output: class index out of range");
        return output_trusts[class_index];
    }
    return sl::avg_fuse(output_trusts);
}

/// Gradient-evidence node trust: gradients quieter than epsilon count as
/// positive evidence, the rest as negative, mapped through baseline-prior
/// quantification.
inline Opinion node_trust(const std::vector<double>& gradients, double epsilon, double w_quant,
                          double base_rate = sl::kDefaultBaseRate) {
    if (gradients.empty()) throw std::invalid_argument("node_trust: no gradient evidence");
    if (!(epsilon > 0)) throw std::invalid_argument("node_trust: epsilon must be > 0");
    double r = 0, s = 0;
    for (double g : gradients) (std::abs(g) < epsilon ? r : s) += 1.0;
    return sl::quantify_baseline(sl::Evidence(r, s), w_quant, base_rate);
}

/// Deduce a node's unconditional trust from its batch-conditional trust: the
/// not-this-batch conditional carries no evidence and stays vacuous.
inline Opinion deduce_node(const Opinion& cond_given_batch, const Opinion& batch_label_trust,
                           double base_rate = sl::kDefaultBaseRate) {
    return sl::deduce(batch_label_trust, cond_given_batch, Opinion::vacuous(base_rate));
}

/// Parameter-trust update for one training batch.
///
/// Step 1 fuses the batch label opinions; steps 2-4 compute a deduced trust
/// per node from its incoming gradient evidence; step 5 revises each incoming
/// edge by averaging fusion with the node trust; step 6 multiplies in the
/// conservative combination of the edge's cached source trust with the batch
/// label trust (bias edges use a fully trusted source). The learning-rate
/// trust joins step 6 as an extra multiplicative factor only when enabled.
inline void parameter_trust_update(TrustNet& net, const nn::BatchTrace& trace,
                                   const std::vector<Opinion>& label_trusts,
                                   const std::vector<Opinion>& input_feature_trusts) {
    if (!net.has_cache())
        throw std::logic_error(
            "parameter_trust_update: no cached input trusts; run trust_feedforward for this batch first");
    if (label_trusts.empty()) throw std::invalid_argument("parameter_trust_update: no label trusts");
    const auto& sizes = net.layer_sizes();
    if (trace.weight_gradients.size() != net.num_layers())
        throw std::invalid_argument("parameter_trust_update: trace layer count mismatch");
    if (input_feature_trusts.size() != sizes.front())
        throw std::invalid_argument("parameter_trust_update: input trust width mismatch");
    const auto& cache = net.cache();

    const Opinion t_ybatch = sl::avg_fuse(label_trusts);

    std::vector<double> grads;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (trace.weight_gradients[l].size() != sizes[l + 1] * sizes[l] ||
            trace.bias_gradients[l].size() != sizes[l + 1])
            throw std::invalid_argument("parameter_trust_update: gradient shape mismatch at layer " +
                                        std::to_string(l));
        for (std::size_t i = 0; i < sizes[l + 1]; ++i) {
            grads.clear();
            for (std::size_t j = 0; j < sizes[l]; ++j)
                grads.push_back(trace.weight_gradients[l][i * sizes[l] + j]);
            grads.push_back(trace.bias_gradients[l][i]);
            const Opinion cond = node_trust(grads, net.epsilon(), net.w_quant());
            const Opinion deduced = deduce_node(cond, t_ybatch);

            for (std::size_t j = 0; j <= sizes[l]; ++j) {
                Opinion t = sl::avg_fuse({net.edge(l, i, j), deduced});
                const Opinion src = j == net.bias_index(l) ? Opinion::trusted() : cache[l][j];
                if (net.use_lr_in_update) t = sl::multiply(t, net.lr_trust);
                t = sl::multiply(t, sl::conservative(src, t_ybatch));
                if (net.rebase_trust_prior)
                    t = Opinion(t.belief(), t.disbelief(), t.uncertainty(), net.trust_prior);
                net.edge(l, i, j) = t;
            }
        }
    }
}

/// Build the inference-path subnetwork: only trust nodes whose neuron appears
/// in the activation trace stay live (output nodes always do). An empty hidden
/// active set falls back to the full network.
inline TrustNet gen_ipta(const TrustNet& net, const nn::ActivationTrace& trace) {
    const auto& sizes = net.layer_sizes();
    if (trace.active_nodes.size() != sizes.size())
        throw std::invalid_argument("gen_ipta: trace layer count mismatch");
    TrustNet sub = net;
    sub.clear_cache();

    bool any_hidden = sizes.size() <= 2;  // no hidden layers: nothing to prune
    for (std::size_t l = 1; l + 1 < sizes.size(); ++l)
        if (!trace.active_nodes[l].empty()) any_hidden = true;
    if (!any_hidden) {
        patas::warn("gen_ipta: empty hidden activation set, falling back to the full network");
        return sub;
    }

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        auto& mask = sub.node_mask()[l];
        mask.assign(sizes[l], false);
        for (auto i : trace.active_nodes[l]) {
            if (i >= sizes[l]) throw std::invalid_argument("gen_ipta: node index out of range");
            mask[i] = true;
        }
    }
    sub.node_mask().back().assign(sizes.back(), true);
    return sub;
}

/// Static model trust: the aggregate output opinion under the fully trusted
/// input profile.
inline Opinion model_trust(const TrustNet& net) {
    std::vector<Opinion> input(net.layer_sizes().front(), Opinion::trusted());
    return aggregate_output(probe_feedforward(net, input), AggregationMode::fuse_all);
}

}  // namespace patas::trust
