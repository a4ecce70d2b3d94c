#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"

namespace bpre {

// Model config schema (JSON, documented in README):
//   { "label": "...", "support_cap": 64,
//     "states": [ {"weight": w, "pmf": {"1": p1, "2": p2, ...}}, ... ] }
// or
//   { "label": "...",
//     "geometric": { "tail_epsilon": 1e-12,
//                    "components": [ {"weight": w, "b": b}, ... ] } }
// Parse errors carry the offending key path.

namespace detail {

inline double get_number(const nlohmann::json& j, const std::string& path) {
    require(j.is_number(), errc::config_error, path + ": expected a number");
    return j.get<double>();
}

}  // namespace detail

inline EnvironmentModel model_from_json(const nlohmann::json& root) {
    require(root.is_object(), errc::config_error, "$: expected an object");
    std::string label = "model";
    if (root.contains("label")) {
        require(root["label"].is_string(), errc::config_error, "label: expected a string");
        label = root["label"].get<std::string>();
    }
    int support_cap = kDefaultSupportCap;
    if (root.contains("support_cap"))
        support_cap = static_cast<int>(detail::get_number(root["support_cap"], "support_cap"));

    const bool has_states = root.contains("states");
    const bool has_geometric = root.contains("geometric");
    require(has_states != has_geometric, errc::config_error,
            "$: expected exactly one of 'states' or 'geometric'");

    if (has_states) {
        const auto& states = root["states"];
        require(states.is_array() && !states.empty(), errc::config_error,
                "states: expected a non-empty array");
        std::vector<StateSpec> spec;
        for (std::size_t idx = 0; idx < states.size(); ++idx) {
            const std::string base = "states[" + std::to_string(idx) + "]";
            const auto& st = states[idx];
            require(st.is_object(), errc::config_error, base + ": expected an object");
            require(st.contains("weight"), errc::config_error, base + ".weight: missing");
            require(st.contains("pmf"), errc::config_error, base + ".pmf: missing");
            StateSpec out;
            out.weight = detail::get_number(st["weight"], base + ".weight");
            const auto& pmf = st["pmf"];
            require(pmf.is_object() && !pmf.empty(), errc::config_error,
                    base + ".pmf: expected a non-empty object");
            for (auto it = pmf.begin(); it != pmf.end(); ++it) {
                const std::string key_path = base + ".pmf." + it.key();
                int count = 0;
                try {
                    std::size_t pos = 0;
                    count = std::stoi(it.key(), &pos);
                    require(pos == it.key().size(), errc::config_error,
                            key_path + ": key is not an integer");
                } catch (const std::logic_error&) {
                    fail(errc::config_error, key_path + ": key is not an integer");
                }
                out.pmf[count] = detail::get_number(*it, key_path);
            }
            spec.push_back(std::move(out));
        }
        return build_environment(spec, label, support_cap);
    }

    const auto& geo = root["geometric"];
    require(geo.is_object(), errc::config_error, "geometric: expected an object");
    require(geo.contains("tail_epsilon"), errc::config_error, "geometric.tail_epsilon: missing");
    require(geo.contains("components"), errc::config_error, "geometric.components: missing");
    const double tail_eps = detail::get_number(geo["tail_epsilon"], "geometric.tail_epsilon");
    const auto& comps = geo["components"];
    require(comps.is_array() && !comps.empty(), errc::config_error,
            "geometric.components: expected a non-empty array");
    std::vector<std::pair<double, double>> wb;
    for (std::size_t idx = 0; idx < comps.size(); ++idx) {
        const std::string base = "geometric.components[" + std::to_string(idx) + "]";
        const auto& c = comps[idx];
        require(c.is_object(), errc::config_error, base + ": expected an object");
        require(c.contains("weight"), errc::config_error, base + ".weight: missing");
        require(c.contains("b"), errc::config_error, base + ".b: missing");
        wb.emplace_back(detail::get_number(c["weight"], base + ".weight"),
                        detail::get_number(c["b"], base + ".b"));
    }
    return fractional_linear_geometric(wb, tail_eps, label);
}

inline EnvironmentModel load_model(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::config_error, "cannot open model config: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::config_error, "invalid JSON in " + path + ": " + e.what());
    }
    return model_from_json(root);
}

// FNV-1a over a canonical serialization; identifies the model in manifests.
inline std::string model_hash(const EnvironmentModel& model) {
    std::ostringstream canon;
    canon.precision(17);
    for (int s = 0; s < model.size(); ++s) {
        canon << "s" << s << ":" << model.weight(s) << ";";
        const auto& pmf = model.law(s).pmf;
        for (std::size_t i = 0; i < pmf.size(); ++i)
            if (pmf[i] != 0.0) canon << i << "=" << pmf[i] << ",";
    }
    const std::string bytes = canon.str();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

}  // namespace bpre
