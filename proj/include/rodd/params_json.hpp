#pragma once

#include <string>

#include "json.hpp"

#include "rodd/errors.hpp"
#include "rodd/forest.hpp"
#include "rodd/stats.hpp"

namespace rodd {

inline void to_json(nlohmann::json& j, const TrimSpec& spec) {
    j = nlohmann::json{{"trim_fraction", spec.trim_fraction}};
}

inline void from_json(const nlohmann::json& j, TrimSpec& spec) {
    try {
        spec.trim_fraction = j.at("trim_fraction").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad trim spec: ") + e.what());
    }
    spec.validate();
}

inline void to_json(nlohmann::json& j, const MaxFeatures& mf) {
    switch (mf.rule) {
        case MaxFeatures::Rule::Sqrt: j = nlohmann::json{{"rule", "sqrt"}}; break;
        case MaxFeatures::Rule::All: j = nlohmann::json{{"rule", "all"}}; break;
        case MaxFeatures::Rule::Fixed:
            j = nlohmann::json{{"rule", "fixed"}, {"k", mf.fixed_k}};
            break;
    }
}

inline void from_json(const nlohmann::json& j, MaxFeatures& mf) {
    std::string rule;
    try {
        rule = j.at("rule").get<std::string>();
        if (rule == "fixed") mf.fixed_k = j.at("k").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad max_features: ") + e.what());
    }
    if (rule == "sqrt")
        mf.rule = MaxFeatures::Rule::Sqrt;
    else if (rule == "all")
        mf.rule = MaxFeatures::Rule::All;
    else if (rule == "fixed")
        mf.rule = MaxFeatures::Rule::Fixed;
    else
        throw ConfigError("max_features rule must be sqrt, all, or fixed, not '" + rule + "'");
}

inline void to_json(nlohmann::json& j, const ForestParams& p) {
    j = nlohmann::json{{"n_trees", p.n_trees},
                       {"max_depth", p.max_depth},
                       {"min_samples_split", p.min_samples_split},
                       {"min_samples_leaf", p.min_samples_leaf},
                       {"max_features", p.max_features},
                       {"bootstrap", p.bootstrap},
                       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, ForestParams& p) {
    try {
        p.n_trees = j.at("n_trees").get<std::uint32_t>();
        p.max_depth = j.at("max_depth").get<std::uint32_t>();
        p.min_samples_split = j.at("min_samples_split").get<std::uint32_t>();
        p.min_samples_leaf = j.at("min_samples_leaf").get<std::uint32_t>();
        p.max_features = j.at("max_features").get<MaxFeatures>();
        p.bootstrap = j.at("bootstrap").get<bool>();
        p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad forest params: ") + e.what());
    }
    p.validate();
}

}  // namespace rodd
