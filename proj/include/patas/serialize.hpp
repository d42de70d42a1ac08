#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "patas/mlp.hpp"
#include "patas/opinion.hpp"
#include "patas/trustnet.hpp"

namespace patas {

inline nlohmann::json to_json(const sl::Opinion& op) {
    return {{"b", op.belief()}, {"d", op.disbelief()}, {"u", op.uncertainty()}, {"a", op.base_rate()}};
}

inline sl::Opinion opinion_from_json(const nlohmann::json& j) {
    return sl::Opinion(j.at("b").get<double>(), j.at("d").get<double>(), j.at("u").get<double>(),
                       j.at("a").get<double>());
}

inline nlohmann::json to_json(const nn::MlpModel& model) {
    nlohmann::json j;
    j["format"] = "patas-mlp";
    j["version"] = 1;
    j["layer_sizes"] = model.layer_sizes();
    j["weights"] = model.weights();  // row-major per layer
    j["biases"] = model.biases();
    return j;
}

inline nn::MlpModel model_from_json(const nlohmann::json& j) {
    if (j.at("format") != "patas-mlp" || j.at("version").get<int>() != 1)
        throw std::runtime_error("model_from_json: unsupported document");
    nn::MlpModel model(j.at("layer_sizes").get<std::vector<std::size_t>>(), 0);
    auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
    auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (weights.size() != model.num_layers() || biases.size() != model.num_layers())
        throw std::runtime_error("model_from_json: layer count mismatch");
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (weights[l].size() != model.weights()[l].size() || biases[l].size() != model.biases()[l].size())
            throw std::runtime_error("model_from_json: shape mismatch at layer " + std::to_string(l));
    }
    model.weights() = std::move(weights);
    model.biases() = std::move(biases);
    return model;
}

inline nlohmann::json to_json(const trust::TrustNet& net) {
    nlohmann::json j;
    j["format"] = "patas-trustnet";
    j["version"] = 1;
    j["layer_sizes"] = net.layer_sizes();
    j["epsilon"] = net.epsilon();
    j["w_quant"] = net.w_quant();
    nlohmann::json layers = nlohmann::json::array();
    const auto& sizes = net.layer_sizes();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < sizes[l + 1]; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k <= sizes[l]; ++k) row.push_back(to_json(net.edge(l, i, k)));
            rows.push_back(std::move(row));
        }
        layers.push_back(std::move(rows));
    }
    j["edge_trust"] = std::move(layers);
    return j;
}

inline trust::TrustNet trustnet_from_json(const nlohmann::json& j) {
    if (j.at("format") != "patas-trustnet" || j.at("version").get<int>() != 1)
        throw std::runtime_error("trustnet_from_json: unsupported document");
    trust::TrustNet net(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                        j.at("epsilon").get<double>(), j.at("w_quant").get<double>());
    const auto& sizes = net.layer_sizes();
    const auto& layers = j.at("edge_trust");
    for (std::size_t l = 0; l < net.num_layers(); ++l)
        for (std::size_t i = 0; i < sizes[l + 1]; ++i)
            for (std::size_t k = 0; k <= sizes[l]; ++k)
                net.edge(l, i, k) = opinion_from_json(layers.at(l).at(i).at(k));
    return net;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json_file: cannot open " + path);
    out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_json_file: cannot open " + path);
    return nlohmann::json::parse(in);
}

}  // namespace patas
