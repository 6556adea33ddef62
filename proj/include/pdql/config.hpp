#pragma once

// Experiment configuration parsed from TOML:
//
//   [experiment]  epsilon, delta, gamma, seeds (list or count), budget_multiplier,
//                 output_dir, trace_stride, trace_mode, trace_growth, sample_cap,
//                 oracle_tolerance, figure_b_size
//   [env]         dims | sizes, slip_prob, wrap, absorbing, seed
//   [env.reward]  step, goals = [{cell, reward}], hazards = [...], random_goals, random_hazards
//   [[learner]]   name, label, then per-learner overrides
//
// Every error carries the line of the offending node.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "pdql/errors.hpp"
#include "pdql/lattice.hpp"
#include "pdql/submdp.hpp"
#include "pdql/trace.hpp"

namespace pdql {

struct LearnerSpec {
    std::string name;                    ///< pdql, dql, qlearning, pql, vrql
    std::string label;                   ///< output id; defaults to name
    nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
};

struct ExperimentConfig {
    double epsilon = 0.01;
    double delta = 0.001;
    double gamma = 0.9;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double budget_multiplier = 1.0;
    std::string output_dir = "out";
    TraceSchedule trace;
    std::uint64_t sample_cap = 50'000'000;  ///< default budget ceiling for per-sample learners
    double oracle_tolerance = 1e-10;
    std::size_t figure_b_size = 200;
    std::uint64_t global_seed = 0;
    LatticeConfig env;
    std::vector<std::size_t> sizes;          ///< empty: a single lattice with env.dims
    std::vector<LearnerSpec> learners;

    /// (S, lattice) per environment cell.
    std::vector<LatticeConfig> environments() const {
        if (sizes.empty()) return {env};
        return size_sweep_configs(env, sizes);
    }

    void check() const {
        detail::require_unit_interval(epsilon, "epsilon");
        detail::require_unit_interval(delta, "delta");
        detail::require_unit_interval(gamma, "gamma");
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (learners.empty()) throw ConfigError("at least one [[learner]] is required");
        if (!(budget_multiplier >= 0.0)) throw ConfigError("budget_multiplier must be nonnegative");
        if (!(oracle_tolerance > 0.0)) throw ConfigError("oracle_tolerance must be positive");
        std::set<std::string> labels;
        for (const auto& l : learners)
            if (!labels.insert(l.label).second) throw ConfigError("duplicate learner label '" + l.label + "'");
        if (sizes.empty()) check_lattice_config(env);
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["epsilon"] = epsilon;
        j["delta"] = delta;
        j["gamma"] = gamma;
        j["seeds"] = seeds;
        j["budget_multiplier"] = budget_multiplier;
        j["global_seed"] = global_seed;
        j.update(trace.to_json());
        j["sample_cap"] = sample_cap;
        j["oracle_tolerance"] = oracle_tolerance;
        j["figure_b_size"] = figure_b_size;
        nlohmann::ordered_json e;
        if (sizes.empty()) {
            e["dims"] = env.dims;
        } else {
            e["sizes"] = sizes;
        }
        e["wrap"] = env.wrap;
        e["slip_prob"] = env.slip_prob;
        e["absorbing"] = env.absorbing;
        e["seed"] = env.seed;
        nlohmann::ordered_json r;
        r["step"] = env.reward.step_reward;
        auto cells = [](const std::vector<RewardCell>& v) {
            nlohmann::ordered_json a = nlohmann::ordered_json::array();
            for (const auto& c : v) a.push_back({{"cell", c.cell}, {"reward", c.reward}});
            return a;
        };
        r["goals"] = cells(env.reward.goals);
        r["hazards"] = cells(env.reward.hazards);
        r["random_goals"] = env.reward.random_goals;
        r["random_hazards"] = env.reward.random_hazards;
        e["reward"] = std::move(r);
        j["env"] = std::move(e);
        nlohmann::ordered_json ls = nlohmann::ordered_json::array();
        for (const auto& l : learners) {
            nlohmann::ordered_json x;
            x["name"] = l.name;
            x["label"] = l.label;
            x["overrides"] = l.overrides;
            ls.push_back(std::move(x));
        }
        j["learners"] = std::move(ls);
        return j;
    }
};

namespace detail {

inline int line_of(const toml::node& n) { return static_cast<int>(n.source().begin.line); }

/// Typed access to one TOML table that rejects unknown keys.
class TomlReader {
public:
    TomlReader(const toml::table& table, std::string where) : table_(table), where_(std::move(where)) {}

    const toml::node* find(std::string_view key) {
        seen_.insert(std::string(key));
        return table_.get(key);
    }

    double number(std::string_view key, double fallback) {
        const auto* n = find(key);
        if (!n) return fallback;
        if (auto i = n->value_exact<std::int64_t>()) return static_cast<double>(*i);
        if (auto d = n->value_exact<double>()) return *d;
        throw fail(*n, key, "a number");
    }

    std::int64_t integer(std::string_view key, std::int64_t fallback) {
        const auto* n = find(key);
        if (!n) return fallback;
        if (auto i = n->value_exact<std::int64_t>()) return *i;
        throw fail(*n, key, "an integer");
    }

    std::uint64_t count(std::string_view key, std::uint64_t fallback) {
        const auto* n = find(key);
        if (!n) return fallback;
        // Large budgets are easier to write as floats (1e12).
        if (auto d = n->value_exact<double>(); d && *d >= 0.0 && *d < 1.8e19 && *d == std::floor(*d))
            return static_cast<std::uint64_t>(*d);
        if (auto i = n->value_exact<std::int64_t>(); i && *i >= 0) return static_cast<std::uint64_t>(*i);
        throw fail(*n, key, "a nonnegative integer");
    }

    bool boolean(std::string_view key, bool fallback) {
        const auto* n = find(key);
        if (!n) return fallback;
        if (auto b = n->value_exact<bool>()) return *b;
        throw fail(*n, key, "a boolean");
    }

    std::string string(std::string_view key, std::string fallback) {
        const auto* n = find(key);
        if (!n) return fallback;
        if (auto s = n->value_exact<std::string>()) return *s;
        throw fail(*n, key, "a string");
    }

    std::vector<std::uint64_t> counts(std::string_view key) {
        std::vector<std::uint64_t> out;
        const auto* n = find(key);
        if (!n) return out;
        const auto* arr = n->as_array();
        if (!arr) throw fail(*n, key, "an array of nonnegative integers");
        for (const auto& x : *arr) {
            auto i = x.value_exact<std::int64_t>();
            if (!i || *i < 0) throw fail(x, key, "an array of nonnegative integers");
            out.push_back(static_cast<std::uint64_t>(*i));
        }
        return out;
    }

    const toml::table* table(std::string_view key) {
        const auto* n = find(key);
        if (!n) return nullptr;
        if (const auto* t = n->as_table()) return t;
        throw fail(*n, key, "a table");
    }

    const toml::array* array(std::string_view key) {
        const auto* n = find(key);
        if (!n) return nullptr;
        if (const auto* a = n->as_array()) return a;
        throw fail(*n, key, "an array");
    }

    /// Throws on the first key that was never asked for.
    void finish() const {
        for (const auto& [k, v] : table_)
            if (!seen_.count(std::string(k.str())))
                throw ConfigError("unknown key '" + std::string(k.str()) + "' in " + where_, line_of(v));
    }

    ConfigError fail(const toml::node& n, std::string_view key, const char* expected) const {
        return ConfigError(where_ + "." + std::string(key) + " must be " + expected, line_of(n));
    }

    int line() const { return line_of(table_); }

private:
    const toml::table& table_;
    std::string where_;
    std::set<std::string> seen_;
};

inline std::vector<RewardCell> parse_cells(const toml::array* arr, const char* where) {
    std::vector<RewardCell> out;
    if (!arr) return out;
    for (const auto& item : *arr) {
        const auto* t = item.as_table();
        if (!t) throw ConfigError(std::string(where) + " entries must be {cell, reward} tables", line_of(item));
        TomlReader r(*t, where);
        RewardCell c;
        c.cell = r.integer("cell", -1);
        c.reward = r.number("reward", 1.0);
        r.finish();
        out.push_back(c);
    }
    return out;
}

/// Override keys each learner accepts, with the expected kind.
inline const std::vector<std::pair<std::string, char>>& learner_keys(const std::string& name) {
    // kinds: n number, c count, b boolean
    static const std::vector<std::pair<std::string, char>> delayed{
        {"epsilon", 'n'}, {"q", 'c'}, {"unlock_radius", 'c'}, {"audit", 'b'}, {"rollout_estimate", 'b'},
        {"budget_multiplier", 'n'}, {"max_timesteps", 'c'}};
    static const std::vector<std::pair<std::string, char>> dql = [] {
        auto v = delayed;
        v.push_back({"shared_q", 'b'});
        return v;
    }();
    static const std::vector<std::pair<std::string, char>> qlearning{
        {"exploration", 'n'}, {"lr_power", 'n'}, {"lr", 'n'}, {"budget", 'c'}, {"initial_value", 'n'}};
    static const std::vector<std::pair<std::string, char>> pql{
        {"phase_length", 'c'}, {"budget", 'c'}, {"max_phases", 'c'}, {"initial_value", 'n'}};
    static const std::vector<std::pair<std::string, char>> vrql{
        {"epochs", 'c'}, {"inner_iterations", 'c'}, {"recenter_base", 'c'}, {"recenter_growth", 'n'},
        {"budget", 'c'}, {"initial_value", 'n'}};
    if (name == "pdql") return delayed;
    if (name == "dql") return dql;
    if (name == "qlearning") return qlearning;
    if (name == "pql") return pql;
    if (name == "vrql") return vrql;
    throw ConfigError("unknown learner '" + name + "' (expected pdql, dql, qlearning, pql or vrql)");
}

inline LearnerSpec parse_learner(const toml::table& t) {
    TomlReader r(t, "[[learner]]");
    LearnerSpec spec;
    const auto* name_node = r.find("name");
    if (!name_node || !name_node->is_string()) throw ConfigError("[[learner]] needs a string 'name'", r.line());
    spec.name = *name_node->value<std::string>();
    try {
        learner_keys(spec.name);
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), line_of(*name_node));
    }
    spec.label = r.string("label", spec.name);
    for (const auto& [key, kind] : learner_keys(spec.name)) {
        if (!t.contains(key)) {
            r.find(key);
            continue;
        }
        switch (kind) {
            case 'n': spec.overrides[key] = r.number(key, 0.0); break;
            case 'c': spec.overrides[key] = r.count(key, 0); break;
            default: spec.overrides[key] = r.boolean(key, false); break;
        }
    }
    r.finish();
    return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::string_view text, const std::string& source = "<config>") {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string(e.description()), static_cast<int>(e.source().begin.line));
    }
    ExperimentConfig cfg;
    detail::TomlReader top(root, "config");
    if (const auto* t = top.table("experiment")) {
        detail::TomlReader r(*t, "[experiment]");
        cfg.epsilon = r.number("epsilon", cfg.epsilon);
        cfg.delta = r.number("delta", cfg.delta);
        cfg.gamma = r.number("gamma", cfg.gamma);
        if (const auto* n = r.find("seeds")) {
            if (auto k = n->value_exact<std::int64_t>()) {
                if (*k <= 0) throw ConfigError("[experiment].seeds count must be positive", detail::line_of(*n));
                cfg.seeds.clear();
                for (std::int64_t i = 0; i < *k; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
            } else {
                detail::TomlReader again(*t, "[experiment]");
                cfg.seeds = again.counts("seeds");
                if (cfg.seeds.empty()) throw ConfigError("[experiment].seeds must not be empty", detail::line_of(*n));
            }
        }
        cfg.budget_multiplier = r.number("budget_multiplier", cfg.budget_multiplier);
        cfg.output_dir = r.string("output_dir", cfg.output_dir);
        const auto stride = r.count("trace_stride", 1000);
        const auto mode = r.string("trace_mode", "linear");
        const double growth = r.number("trace_growth", 1.1);
        if (mode != "linear" && mode != "geometric")
            throw ConfigError("[experiment].trace_mode must be 'linear' or 'geometric'", detail::line_of(*t->get("trace_mode")));
        try {
            cfg.trace = TraceSchedule(stride, mode == "linear" ? TraceSchedule::Mode::linear : TraceSchedule::Mode::geometric,
                                      growth);
        } catch (const DomainError& e) {
            throw ConfigError(e.what(), r.line());
        }
        cfg.sample_cap = r.count("sample_cap", cfg.sample_cap);
        cfg.oracle_tolerance = r.number("oracle_tolerance", cfg.oracle_tolerance);
        cfg.figure_b_size = r.count("figure_b_size", cfg.figure_b_size);
        cfg.global_seed = r.count("seed", cfg.global_seed);
        r.finish();
    }
    const auto* env = top.table("env");
    if (!env) throw ConfigError("missing [env] table", 1);
    {
        detail::TomlReader r(*env, "[env]");
        std::vector<std::uint64_t> dims = r.counts("dims");
        std::vector<std::uint64_t> sizes = r.counts("sizes");
        if (dims.empty() == sizes.empty()) throw ConfigError("[env] needs exactly one of 'dims' or 'sizes'", r.line());
        for (auto d : dims) cfg.env.dims.push_back(static_cast<std::uint32_t>(d));
        for (auto s : sizes) cfg.sizes.push_back(static_cast<std::size_t>(s));
        cfg.env.slip_prob = r.number("slip_prob", 0.0);
        cfg.env.wrap = r.boolean("wrap", false);
        cfg.env.absorbing = r.boolean("absorbing", false);
        cfg.env.seed = r.count("seed", 0);
        if (const auto* rw = r.table("reward")) {
            detail::TomlReader rr(*rw, "[env.reward]");
            cfg.env.reward.step_reward = rr.number("step", 0.0);
            cfg.env.reward.goals = detail::parse_cells(rr.array("goals"), "[env.reward].goals");
            cfg.env.reward.hazards = detail::parse_cells(rr.array("hazards"), "[env.reward].hazards");
            cfg.env.reward.random_goals = static_cast<std::uint32_t>(rr.count("random_goals", 0));
            cfg.env.reward.random_hazards = static_cast<std::uint32_t>(rr.count("random_hazards", 0));
            rr.finish();
        }
        r.finish();
        try {
            if (!cfg.sizes.empty()) {
                LatticeConfig probe = cfg.env;
                probe.dims = {2};
                check_lattice_config(probe);
                size_sweep_configs(cfg.env, cfg.sizes);
            }
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), r.line());
        }
    }
    if (const auto* learners = top.array("learner")) {
        for (const auto& item : *learners) {
            const auto* t = item.as_table();
            if (!t) throw ConfigError("[[learner]] entries must be tables", detail::line_of(item));
            cfg.learners.push_back(detail::parse_learner(*t));
        }
    }
    top.finish();
    try {
        cfg.check();
    } catch (const ConfigError& e) {
        throw ConfigError(e.what(), 1);
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), 1);
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str(), path);
}

}  // namespace pdql
