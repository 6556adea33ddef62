#pragma once

// Phased Q-learning: synchronous empirical Bellman backups, every (s, a)
// sampled phase_length times per phase.

#include <cmath>
#include <cstdint>
#include <optional>

#include <json.hpp>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/oracle.hpp"
#include "pdql/random.hpp"
#include "pdql/trace.hpp"

namespace pdql {

struct PhasedQParams {
    double gamma = 0.9;
    std::uint64_t phase_length = 1;
    std::uint64_t budget = 1'000'000;
    std::optional<std::uint64_t> max_phases;
    std::optional<double> initial_value;  ///< defaults to 1 / (1 - gamma)

    void check() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
        if (phase_length == 0) throw DomainError("phase_length must be positive");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["gamma"] = gamma;
        j["phase_length"] = phase_length;
        j["budget"] = budget;
        if (max_phases) j["max_phases"] = *max_phases;
        j["initial_value"] = initial_value.value_or(1.0 / (1.0 - gamma));
        j["trace_mode"] = "per_phase";
        return j;
    }
};

/// Phase length for which one empirical backup is within eps of the exact
/// one for every pair with confidence 1 - delta (Hoeffding, range 1/(1-gamma)).
inline std::uint64_t default_phase_length(double epsilon, double delta, double gamma, std::uint64_t S,
                                          std::uint64_t A) {
    const double sa = static_cast<double>(S) * static_cast<double>(A);
    const double g1 = 1.0 - gamma;
    return static_cast<std::uint64_t>(std::ceil(std::log(2.0 * sa / delta) / (2.0 * epsilon * epsilon * g1 * g1)));
}

struct PhasedQResult {
    RunTrace trace;
    QTable q;
    std::uint64_t phases = 0;
};

inline PhasedQResult pql_solve(const MdpSpec& spec, const PhasedQParams& params, const ValueTable& oracle,
                               std::uint64_t seed) {
    params.check();
    const std::size_t S = spec.num_states(), A = spec.num_actions();
    PhasedQResult out;
    out.q = QTable(S, A, params.initial_value.value_or(1.0 / (1.0 - params.gamma)));
    Rng rng(seed);
    std::vector<std::uint64_t> counts;
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a) counts.resize(std::max(counts.size(), spec.successors(s, a).size()));

    auto& trace = out.trace;
    trace.config_snapshot["learner"] = "pql";
    trace.config_snapshot["seed"] = seed;
    trace.config_snapshot.update(params.to_json());
    const std::uint64_t phase_cost = S * A * params.phase_length;
    const double inv_len = 1.0 / static_cast<double>(params.phase_length);
    std::uint64_t t = 0;
    auto point = [&] {
        trace.samples.push_back({t, mean_error(ValueTable::from_q(out.q), oracle), 0.0, out.phases});
    };
    point();
    while (true) {
        if (params.max_phases && out.phases >= *params.max_phases) break;
        if (params.budget - t < phase_cost) {
            trace.budget_exhausted = true;
            break;
        }
        const ValueTable v = ValueTable::from_q(out.q);
        for (StateId s = 0; s < S; ++s)
            for (ActionId a = 0; a < A; ++a) {
                const auto succ = spec.successors(s, a);
                draw_successor_counts(spec, s, a, params.phase_length, rng, counts);
                double boot = 0.0;
                for (std::size_t i = 0; i < succ.size(); ++i) boot += static_cast<double>(counts[i]) * v[succ[i].next];
                out.q(s, a) = spec.reward(s, a) + params.gamma * boot * inv_len;
            }
        t += phase_cost;
        ++out.phases;
        point();
    }
    trace.timesteps = t;
    trace.config_snapshot["phases"] = out.phases;
    return out;
}

inline RunTrace pql_run(const MdpSpec& spec, const PhasedQParams& params, const ValueTable& oracle,
                        std::uint64_t seed) {
    return pql_solve(spec, params, oracle, seed).trace;
}

}  // namespace pdql
