#pragma once

// Exact dynamic-programming oracles: infinite-horizon value iteration,
// finite-horizon backward induction, greedy extraction, mean error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"

namespace pdql {

/// Q(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) V(s').
inline QTable bellman_q(const MdpSpec& spec, const ValueTable& v) {
    QTable q(spec.num_states(), spec.num_actions());
    const double gamma = spec.discount();
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ActionId a = 0; a < spec.num_actions(); ++a) {
            double expect = 0.0;
            for (const auto& succ : spec.successors(s, a)) expect += succ.prob * v[succ.next];
            q(s, a) = spec.reward(s, a) + gamma * expect;
        }
    return q;
}

/// max_s |V(s) - max_a (R(s,a) + gamma E[V(s')])|.
inline double bellman_residual(const MdpSpec& spec, const ValueTable& v) {
    const QTable q = bellman_q(spec, v);
    double worst = 0.0;
    for (StateId s = 0; s < spec.num_states(); ++s) worst = std::max(worst, std::abs(v[s] - q.state_value(s)));
    return worst;
}

struct OptimalValues {
    ValueTable v;
    QTable q;
    std::size_t iterations = 0;
};

/// Iteration cap for value iteration from V = 0 with rewards in [0, 1].
inline std::size_t value_iteration_cap(double tolerance, double gamma) {
    constexpr std::size_t kSafetyMargin = 16;
    return static_cast<std::size_t>(std::ceil(std::log(tolerance * (1.0 - gamma)) / std::log(gamma))) + kSafetyMargin;
}

/// Infinite-horizon optimal values. The returned V equals max_a Q exactly and
/// has Bellman residual at most `tolerance`.
inline OptimalValues value_iteration(const MdpSpec& spec, double tolerance) {
    if (!(tolerance > 0.0)) throw DomainError("value_iteration: tolerance must be positive");
    const double gamma = spec.discount();
    const std::size_t cap = value_iteration_cap(tolerance, gamma);
    ValueTable v(spec.num_states(), 0.0);
    for (std::size_t it = 1; it <= cap; ++it) {
        QTable q = bellman_q(spec, v);
        ValueTable next = ValueTable::from_q(q);
        double change = 0.0;
        for (StateId s = 0; s < spec.num_states(); ++s) change = std::max(change, std::abs(next[s] - v[s]));
        // residual(next) <= gamma * change <= tolerance
        if (change <= tolerance) return {std::move(next), std::move(q), it};
        v = std::move(next);
    }
    throw NonConvergence("value_iteration did not reach tolerance " + std::to_string(tolerance) + " within " +
                         std::to_string(cap) + " sweeps");
}

/// T-step optimal values by backward induction. Horizon T sums T+1 reward
/// terms, so horizon 0 gives max_a R(s, a).
inline ValueTable finite_horizon_values(const MdpSpec& spec, std::size_t horizon) {
    ValueTable v(spec.num_states(), 0.0);
    for (std::size_t t = 0; t <= horizon; ++t) v = ValueTable::from_q(bellman_q(spec, v));
    return v;
}

/// argmax_a q(s, a) per state, ties to the lowest action index.
inline Policy greedy_policy(const QTable& q) {
    Policy p;
    p.action.resize(q.num_states());
    for (StateId s = 0; s < q.num_states(); ++s) p.action[s] = q.greedy_action(s);
    return p;
}

/// Signed average gap (1/S) sum_s (v(s) - oracle(s)).
inline double mean_error(const ValueTable& v, const ValueTable& oracle) {
    if (v.size() != oracle.size())
        throw DimensionMismatch("mean_error: " + std::to_string(v.size()) + " vs " + std::to_string(oracle.size()) +
                                " states");
    if (v.size() == 0) return 0.0;
    double sum = 0.0;
    for (StateId s = 0; s < v.size(); ++s) sum += v[s] - oracle[s];
    return sum / static_cast<double>(v.size());
}

}  // namespace pdql
