#pragma once

// MdpSpec <-> JSON. Field order is fixed so golden files are byte-stable:
//   {num_states, num_actions, discount, rewards: [[R(s,.)]...],
//    transitions: [[[prob, next], ...] per (s, a) in s-major order],
//    metric: "lattice"|"hops", lattice_dims: [...], lattice_wrap: bool}

#include <fstream>
#include <string>

#include <json.hpp>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"

namespace pdql {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const MdpSpec& spec) {
    ordered_json j;
    j["num_states"] = spec.num_states();
    j["num_actions"] = spec.num_actions();
    j["discount"] = spec.discount();
    ordered_json rewards = ordered_json::array();
    for (StateId s = 0; s < spec.num_states(); ++s) {
        ordered_json row = ordered_json::array();
        for (ActionId a = 0; a < spec.num_actions(); ++a) row.push_back(spec.reward(s, a));
        rewards.push_back(std::move(row));
    }
    j["rewards"] = std::move(rewards);
    ordered_json transitions = ordered_json::array();
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ActionId a = 0; a < spec.num_actions(); ++a) {
            ordered_json row = ordered_json::array();
            for (const auto& succ : spec.successors(s, a)) row.push_back(ordered_json::array({succ.prob, succ.next}));
            transitions.push_back(std::move(row));
        }
    j["transitions"] = std::move(transitions);
    const auto& metric = spec.metric();
    if (metric.kind() == Metric::Kind::lattice) {
        j["metric"] = "lattice";
        j["lattice_dims"] = metric.dims();
        j["lattice_wrap"] = metric.wrap();
    } else {
        j["metric"] = "hops";
    }
    return j;
}

inline MdpSpec mdp_from_json(const ordered_json& j) {
    try {
        const auto S = j.at("num_states").get<std::size_t>();
        const auto A = j.at("num_actions").get<std::size_t>();
        const auto gamma = j.at("discount").get<double>();
        const auto& reward_rows = j.at("rewards");
        if (!reward_rows.is_array() || reward_rows.size() != S)
            throw StructuralError("rewards must have num_states rows");
        std::vector<double> rewards;
        rewards.reserve(S * A);
        for (const auto& row : reward_rows) {
            if (!row.is_array() || row.size() != A) throw StructuralError("every reward row must have num_actions entries");
            for (const auto& r : row) rewards.push_back(r.get<double>());
        }
        const auto& trans = j.at("transitions");
        if (!trans.is_array() || trans.size() != S * A)
            throw StructuralError("transitions must have num_states * num_actions rows");
        std::vector<std::vector<Successor>> rows;
        rows.reserve(S * A);
        for (const auto& row : trans) {
            std::vector<Successor> out;
            for (const auto& entry : row) {
                if (!entry.is_array() || entry.size() != 2) throw StructuralError("transition entries are [prob, next]");
                out.push_back({entry[0].get<double>(), entry[1].get<StateId>()});
            }
            rows.push_back(std::move(out));
        }
        const auto kind = j.value("metric", std::string("hops"));
        Metric metric = Metric::hops();
        if (kind == "lattice") {
            metric = Metric::lattice(j.at("lattice_dims").get<std::vector<std::uint32_t>>(), j.value("lattice_wrap", false));
        } else if (kind != "hops") {
            throw StructuralError("unknown metric '" + kind + "'");
        }
        return MdpSpec(S, A, gamma, std::move(rewards), rows, std::move(metric));
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed MDP JSON: ") + e.what());
    }
}

inline MdpSpec load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw StructuralError(path + ": " + e.what());
    }
    return mdp_from_json(j);
}

inline void save_mdp(const MdpSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json(spec).dump(1) << '\n';
}

}  // namespace pdql
