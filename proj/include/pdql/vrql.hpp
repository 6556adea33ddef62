#pragma once

// Variance-reduced Q-learning with generative access. Each epoch freezes a
// reference table Qbar, estimates its backup from a large recentering batch,
// then runs synchronous inner iterations
//   Q <- (1 - l) Q + l [That(Q) - That(Qbar) + Ttilde(Qbar)],  l_k = 1 / (1 + (1 - gamma) k),
// where That uses one successor sample per pair shared by both terms.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/oracle.hpp"
#include "pdql/random.hpp"
#include "pdql/trace.hpp"

namespace pdql {

struct VrqlParams {
    double gamma = 0.9;
    std::uint64_t epochs = 8;                  ///< maximum number of epochs
    std::uint64_t inner_iterations = 0;        ///< K per epoch; 0 means ceil(1/(1-gamma)^2)
    std::uint64_t recenter_base = 0;           ///< N_0; 0 means ceil(1/(1-gamma)^2)
    double recenter_growth = 4.0;              ///< N_e = N_0 growth^e
    std::uint64_t budget = 1'000'000;
    std::optional<double> initial_value;       ///< defaults to 1 / (1 - gamma)
    TraceSchedule trace;

    std::uint64_t resolved_inner() const {
        return inner_iterations ? inner_iterations
                                : static_cast<std::uint64_t>(std::ceil(1.0 / ((1.0 - gamma) * (1.0 - gamma))));
    }

    std::uint64_t recenter_size(std::uint64_t epoch) const {
        const double base = recenter_base ? static_cast<double>(recenter_base) : std::ceil(1.0 / ((1.0 - gamma) * (1.0 - gamma)));
        const double n = std::ceil(base * std::pow(recenter_growth, static_cast<double>(epoch)));
        return n >= 1.8e19 ? UINT64_MAX : static_cast<std::uint64_t>(n);
    }

    void check() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
        if (!(recenter_growth >= 1.0)) throw DomainError("recenter_growth must be at least 1");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["gamma"] = gamma;
        j["epochs"] = epochs;
        j["inner_iterations"] = resolved_inner();
        j["recenter_base"] = recenter_size(0);
        j["recenter_growth"] = recenter_growth;
        j["budget"] = budget;
        j["initial_value"] = initial_value.value_or(1.0 / (1.0 - gamma));
        j.update(trace.to_json());
        return j;
    }
};

struct VrqlResult {
    RunTrace trace;
    QTable q;
    std::vector<double> epoch_variance;  ///< mean squared noise of That(Q) - That(Qbar), per epoch
    std::uint64_t epochs = 0;
};

inline VrqlResult vrql_solve(const MdpSpec& spec, const VrqlParams& params, const ValueTable& oracle,
                             std::uint64_t seed) {
    params.check();
    const std::size_t S = spec.num_states(), A = spec.num_actions(), SA = S * A;
    const double g = params.gamma;
    VrqlResult out;
    out.q = QTable(S, A, params.initial_value.value_or(1.0 / (1.0 - g)));
    Rng rng(seed);
    std::vector<std::uint64_t> counts(1);
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a) counts.resize(std::max(counts.size(), spec.successors(s, a).size()));

    auto& trace = out.trace;
    trace.config_snapshot["learner"] = "vrql";
    trace.config_snapshot["seed"] = seed;
    trace.config_snapshot.update(params.to_json());
    std::uint64_t t = 0, iterations = 0;
    auto probe = [&](std::uint64_t now) {
        return TracePoint{now, mean_error(ValueTable::from_q(out.q), oracle), 0.0, iterations};
    };
    TraceRecorder recorder(trace, params.trace);
    recorder.start(probe);

    const std::uint64_t K = params.resolved_inner();
    std::vector<double> recentered(SA);
    std::vector<double> next(SA);
    bool exhausted = false;
    for (std::uint64_t e = 0; e < params.epochs && !exhausted; ++e) {
        const std::uint64_t n = params.recenter_size(e);
        if (n > (params.budget - t) / SA) {
            exhausted = true;
            break;
        }
        const ValueTable vbar = ValueTable::from_q(out.q);
        for (StateId s = 0; s < S; ++s)
            for (ActionId a = 0; a < A; ++a) {
                const auto succ = spec.successors(s, a);
                draw_successor_counts(spec, s, a, n, rng, counts);
                double boot = 0.0;
                for (std::size_t i = 0; i < succ.size(); ++i) boot += static_cast<double>(counts[i]) * vbar[succ[i].next];
                recentered[spec.pair(s, a)] = spec.reward(s, a) + g * boot / static_cast<double>(n);
            }
        t += n * SA;
        recorder.step(t, probe);

        double noise_sq = 0.0;
        std::uint64_t noise_n = 0;
        for (std::uint64_t k = 1; k <= K; ++k) {
            if (params.budget - t < SA) {
                exhausted = true;
                break;
            }
            const double lr = 1.0 / (1.0 + (1.0 - g) * static_cast<double>(k));
            const ValueTable v = ValueTable::from_q(out.q);
            for (StateId s = 0; s < S; ++s)
                for (ActionId a = 0; a < A; ++a) {
                    const std::size_t idx = spec.pair(s, a);
                    const StateId x = sample_transition(spec, s, a, rng).next;
                    const double diff = g * (v[x] - vbar[x]);
                    // The model-side mean of diff feeds only the variance diagnostic.
                    double mean_diff = 0.0;
                    for (const auto& succ : spec.successors(s, a)) mean_diff += succ.prob * g * (v[succ.next] - vbar[succ.next]);
                    noise_sq += (diff - mean_diff) * (diff - mean_diff);
                    ++noise_n;
                    next[idx] = (1.0 - lr) * out.q.values()[idx] + lr * (diff + recentered[idx]);
                }
            std::copy(next.begin(), next.end(), out.q.values().begin());
            t += SA;
            ++iterations;
            recorder.step(t, probe);
        }
        out.epoch_variance.push_back(noise_n ? noise_sq / static_cast<double>(noise_n) : 0.0);
        ++out.epochs;
    }
    trace.budget_exhausted = exhausted;
    trace.timesteps = t;
    trace.config_snapshot["epochs_run"] = out.epochs;
    trace.config_snapshot["epoch_variance"] = out.epoch_variance;
    recorder.finish(t, probe);
    return out;
}

inline RunTrace vrql_run(const MdpSpec& spec, const VrqlParams& params, const ValueTable& oracle, std::uint64_t seed) {
    return vrql_solve(spec, params, oracle, seed).trace;
}

}  // namespace pdql
