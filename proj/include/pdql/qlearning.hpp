#pragma once

// Tabular Q-learning baseline with generative access: every sample starts
// from a uniformly random state and picks an epsilon-greedy action.

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

struct QLearningParams {
    double gamma = 0.9;
    double exploration = 0.1;             ///< probability of a uniformly random action
    double lr_power = 0.8;                ///< lr = 1 / (1 + visits)^power
    std::optional<double> constant_lr;    ///< overrides the schedule when set
    std::uint64_t budget = 1'000'000;
    std::optional<double> initial_value;  ///< defaults to 1 / (1 - gamma)
    TraceSchedule trace;

    double learning_rate(std::uint64_t visits) const {
        if (constant_lr) return *constant_lr;
        return 1.0 / std::pow(1.0 + static_cast<double>(visits), lr_power);
    }

    void check() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
        if (!(exploration >= 0.0 && exploration <= 1.0)) throw DomainError("exploration must lie in [0, 1]");
        if (constant_lr && !(*constant_lr >= 0.0 && *constant_lr <= 1.0))
            throw DomainError("constant learning rate must lie in [0, 1]");
        if (!(lr_power > 0.0)) throw DomainError("lr_power must be positive");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["gamma"] = gamma;
        j["exploration"] = exploration;
        j["reset"] = "uniform_state";
        if (constant_lr) {
            j["lr_schedule"] = "constant";
            j["lr"] = *constant_lr;
        } else {
            j["lr_schedule"] = "polynomial";
            j["lr_power"] = lr_power;
        }
        j["budget"] = budget;
        j["initial_value"] = initial_value.value_or(1.0 / (1.0 - gamma));
        j.update(trace.to_json());
        return j;
    }
};

inline RunTrace qlearning_run(const MdpSpec& spec, const QLearningParams& params, const ValueTable& oracle,
                              std::uint64_t seed) {
    params.check();
    const std::size_t S = spec.num_states(), A = spec.num_actions();
    QTable q(S, A, params.initial_value.value_or(1.0 / (1.0 - params.gamma)));
    std::vector<std::uint64_t> visits(S * A, 0);
    Rng rng(seed);
    std::uint64_t updates = 0;

    RunTrace trace;
    trace.config_snapshot["learner"] = "qlearning";
    trace.config_snapshot["seed"] = seed;
    trace.config_snapshot.update(params.to_json());
    auto probe = [&](std::uint64_t t) {
        return TracePoint{t, mean_error(ValueTable::from_q(q), oracle), 0.0, updates};
    };
    TraceRecorder recorder(trace, params.trace);
    recorder.start(probe);
    std::uint64_t t = 0;
    for (; t < params.budget;) {
        const auto s = static_cast<StateId>(rng.index(S));
        const auto a = rng.bernoulli(params.exploration) ? static_cast<ActionId>(rng.index(A)) : q.greedy_action(s);
        const auto sample = sample_transition(spec, s, a, rng);
        const std::size_t k = spec.pair(s, a);
        const double lr = params.learning_rate(visits[k]++);
        const double target = sample.reward + params.gamma * q.state_value(sample.next);
        q(s, a) += lr * (target - q(s, a));
        ++updates;
        recorder.step(++t, probe);
    }
    trace.budget_exhausted = true;
    trace.timesteps = t;
    recorder.finish(t, probe);
    return trace;
}

}  // namespace pdql
