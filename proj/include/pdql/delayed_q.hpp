#pragma once

// Probabilistic Delayed Q-learning and its global-unlock ancestor, Delayed
// Q-learning, sharing one engine parameterized on the unlock policy.
//
// Selection is round-robin over states in index order with the greedy
// action. A selected pair dwells for a whole batch of q samples: Q does not
// change inside a batch, so the batch sum equals
//   q R(s, a) + gamma * sum_k n_k V(s'_k),  n ~ Multinomial(q, T(.|s, a)),
// which is drawn in one go. Run time is therefore independent of q.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdql/bounds.hpp"
#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/oracle.hpp"
#include "pdql/random.hpp"
#include "pdql/submdp.hpp"
#include "pdql/trace.hpp"

namespace pdql {

struct PdqlParams {
    double epsilon = 0.01;
    double delta = 0.001;
    double gamma = 0.9;
    std::uint64_t q = 1;
    std::uint32_t unlock_radius = 1;
    std::uint64_t max_timesteps = std::numeric_limits<std::uint64_t>::max();
    bool q_overridden = false;
    bool radius_overridden = false;
    std::string batch_schedule = "pdql";  ///< where q came from: pdql, dql, shared, override
    bool rollout_estimate = false;        ///< experimental: T-step rollouts instead of the bootstrap
    bool audit = false;                   ///< record per-update invariant checks
    TraceSchedule trace;

    void check() const {
        detail::require_unit_interval(epsilon, "epsilon");
        detail::require_unit_interval(delta, "delta");
        detail::require_unit_interval(gamma, "gamma");
        if (q == 0) throw DomainError("q must be at least 1");
        if (unlock_radius == 0) throw DomainError("unlock_radius must be at least 1");
    }

    PdqlParams& override_q(std::uint64_t value) {
        q = value;
        q_overridden = true;
        batch_schedule = "override";
        return *this;
    }

    PdqlParams& override_unlock_radius(std::uint32_t value) {
        unlock_radius = value;
        radius_overridden = true;
        return *this;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["epsilon"] = epsilon;
        j["delta"] = delta;
        j["gamma"] = gamma;
        j["q"] = q;
        j["q_overridden"] = q_overridden;
        j["batch_schedule"] = batch_schedule;
        j["unlock_radius"] = unlock_radius;
        j["radius_overridden"] = radius_overridden;
        j["max_timesteps"] = max_timesteps;
        j["rollout_estimate"] = rollout_estimate;
        j.update(trace.to_json());
        return j;
    }
};

namespace detail {

inline std::uint64_t saturating_budget(double bound, double multiplier) {
    if (!(multiplier >= 0.0)) throw DomainError("budget multiplier must be nonnegative");
    const double b = std::ceil(bound * multiplier);
    return b >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(b);
}

}  // namespace detail

/// q from the batch-size bound, unlock radius from the truncation radius,
/// budget = multiplier x the overall sample-complexity bound.
inline PdqlParams default_params(double epsilon, double delta, double gamma, std::uint64_t S, std::uint64_t A,
                                 double budget_multiplier = 1.0) {
    const BoundInputs in{epsilon, delta, gamma, S, A};
    PdqlParams p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.gamma = gamma;
    p.q = q_lower_bound(in);
    p.unlock_radius = truncation_radius(epsilon, gamma);
    p.max_timesteps = detail::saturating_budget(pdql_total_bound(in), budget_multiplier);
    return p;
}

/// Delayed Q-learning parameters: batch size m from its own published
/// schedule, or the PDQL q when `shared_q` is set for controlled comparisons.
inline PdqlParams dql_params(double epsilon, double delta, double gamma, std::uint64_t S, std::uint64_t A,
                             double budget_multiplier = 1.0, bool shared_q = false) {
    PdqlParams p = default_params(epsilon, delta, gamma, S, A, budget_multiplier);
    if (!shared_q) p.q = delayed_q_batch_size({epsilon, delta, gamma, S, A});
    p.batch_schedule = shared_q ? "shared" : "dql";
    return p;
}

/// Algorithm state: Q, the batch accumulator U, the visit counter C and one
/// unlock flag per (s, a).
struct PdqlState {
    QTable q_values;
    std::vector<double> accumulator;
    std::vector<std::uint64_t> visits;
    std::vector<std::uint8_t> unlocked;
    std::uint64_t timestep = 0;

    PdqlState(std::size_t S, std::size_t A, double gamma)
        : q_values(S, A, 1.0 / (1.0 - gamma)), accumulator(S * A, 0.0), visits(S * A, 0), unlocked(S * A, 1) {}
};

struct MemoryFootprint {
    std::size_t q_values = 0;
    std::size_t accumulators = 0;
    std::size_t visit_counters = 0;
    std::size_t lock_flags = 0;
    std::size_t per_state = 0;
    std::size_t per_pair_constant = 4;  ///< c in c S A + c' S
    std::size_t per_state_constant = 0; ///< c'

    std::size_t entries() const { return q_values + accumulators + visit_counters + lock_flags + per_state; }

    bool within(std::size_t S, std::size_t A) const {
        return entries() <= per_pair_constant * S * A + per_state_constant * S;
    }
};

/// Stored scalars and flags, counted from the live containers.
inline MemoryFootprint memory_footprint(const PdqlState& state) {
    MemoryFootprint m;
    m.q_values = state.q_values.values().size();
    m.accumulators = state.accumulator.size();
    m.visit_counters = state.visits.size();
    m.lock_flags = state.unlocked.size();
    return m;
}

/// Invariant counters filled when params.audit is set.
struct UpdateAudit {
    std::uint64_t attempts = 0;
    std::uint64_t successes = 0;
    std::uint64_t locks = 0;
    std::uint64_t unlocked_pairs = 0;       ///< locked -> unlocked flips caused by updates
    std::uint64_t ceiling = 0;              ///< ceil(1 / (eps (1 - gamma)))
    std::uint64_t max_updates_per_pair = 0;
    std::uint64_t ceiling_violations = 0;
    std::uint64_t descent_violations = 0;   ///< successful updates that lowered Q by less than eps
    std::uint64_t radius_violations = 0;    ///< unlocks at hop distance >= unlock radius
    std::uint64_t spurious_locks = 0;       ///< flags an update turned from unlocked to locked

    bool ok() const { return ceiling_violations == 0 && descent_violations == 0 && radius_violations == 0 && spurious_locks == 0; }

    UpdateAudit& operator+=(const UpdateAudit& o) {
        attempts += o.attempts;
        successes += o.successes;
        locks += o.locks;
        unlocked_pairs += o.unlocked_pairs;
        ceiling = std::max(ceiling, o.ceiling);
        max_updates_per_pair = std::max(max_updates_per_pair, o.max_updates_per_pair);
        ceiling_violations += o.ceiling_violations;
        descent_violations += o.descent_violations;
        radius_violations += o.radius_violations;
        spurious_locks += o.spurious_locks;
        return *this;
    }

    nlohmann::ordered_json to_json() const {
        return {{"attempts", attempts},
                {"successes", successes},
                {"locks", locks},
                {"unlocked_pairs", unlocked_pairs},
                {"ceiling", ceiling},
                {"max_updates_per_pair", max_updates_per_pair},
                {"ceiling_violations", ceiling_violations},
                {"descent_violations", descent_violations},
                {"radius_violations", radius_violations},
                {"spurious_locks", spurious_locks}};
    }
};

struct UpdateOutcome {
    bool updated = false;
    double value = 0.0;  ///< Q(s, a) after the attempt
};

/// The batch-end rule: with batch mean m = U / q, update to m + eps when
/// Q - m >= 2 eps, otherwise keep Q (the caller locks the pair).
inline UpdateOutcome delayed_update(double q_value, double accumulator, std::uint64_t q, double epsilon) {
    const double estimate = accumulator / static_cast<double>(q);
    if (q_value - estimate >= 2.0 * epsilon) return {true, estimate + epsilon};
    return {false, q_value};
}

/// Unlocks every pair whose state lies within metric distance < radius.
struct LocalUnlock {
    static constexpr const char* name = "pdql";

    template <class F>
    static void for_each_state(const MdpSpec& spec, const PdqlParams& p, StateId center, F&& f) {
        const auto d = spec.metric().distances_from(center);
        const double r = static_cast<double>(p.unlock_radius);
        for (StateId s = 0; s < spec.num_states(); ++s)
            if (d[s] < r) f(s);
    }

    static bool in_range(double hops, const PdqlParams& p) { return hops < static_cast<double>(p.unlock_radius); }
};

/// Unlocks every pair in the MDP.
struct GlobalUnlock {
    static constexpr const char* name = "dql";

    template <class F>
    static void for_each_state(const MdpSpec& spec, const PdqlParams&, StateId, F&& f) {
        for (StateId s = 0; s < spec.num_states(); ++s) f(s);
    }

    static bool in_range(double, const PdqlParams&) { return true; }
};

template <class Unlock>
class DelayedQEngine {
public:
    DelayedQEngine(const MdpSpec& spec, PdqlParams params, std::uint64_t seed)
        : spec_(spec),
          params_(std::move(params)),
          state_(spec.num_states(), spec.num_actions(), params_.gamma),
          rng_(seed),
          counts_(std::max<std::size_t>(1, max_row_size(spec))) {
        params_.check();
        if (std::abs(params_.gamma - spec.discount()) > 1e-12)
            throw DomainError("params gamma " + std::to_string(params_.gamma) + " differs from the MDP discount " +
                              std::to_string(spec.discount()));
        if (params_.rollout_estimate) horizon_ = truncation_radius(params_.epsilon, params_.gamma);
        if (params_.audit) {
            audit_.ceiling = static_cast<std::uint64_t>(
                detail::ceil_tol(1.0 / (params_.epsilon * (1.0 - params_.gamma))));
            pair_updates_.assign(spec.num_pairs(), 0);
            hop_cache_.resize(spec.num_states());
        }
    }

    const PdqlState& state() const noexcept { return state_; }
    const PdqlParams& params() const noexcept { return params_; }
    const UpdateAudit& audit() const noexcept { return audit_; }
    std::uint64_t timestep() const noexcept { return state_.timestep; }
    std::uint64_t attempts() const noexcept { return attempts_; }
    std::uint64_t successes() const noexcept { return successes_; }

    /// A state is active while its greedy pair is unlocked.
    bool is_active(StateId s) const { return state_.unlocked[spec_.pair(s, state_.q_values.greedy_action(s))] != 0; }

    bool any_active() const {
        for (StateId s = 0; s < spec_.num_states(); ++s)
            if (is_active(s)) return true;
        return false;
    }

    double locked_fraction() const {
        std::size_t locked = 0;
        for (StateId s = 0; s < spec_.num_states(); ++s) locked += is_active(s) ? 0 : 1;
        return static_cast<double>(locked) / static_cast<double>(spec_.num_states());
    }

    /// Runs (or resumes) one batch on the next active state. Returns false
    /// when nothing is active or the budget is spent.
    bool step() {
        if (params_.max_timesteps - state_.timestep < horizon_) return false;
        const std::size_t S = spec_.num_states();
        std::size_t scanned = 0;
        while (scanned < S && !is_active(cursor_)) {
            cursor_ = static_cast<StateId>((cursor_ + 1) % S);
            ++scanned;
        }
        if (scanned == S) return false;
        const StateId s = cursor_;
        const ActionId a = state_.q_values.greedy_action(s);
        const std::size_t k = spec_.pair(s, a);
        if (params_.rollout_estimate) {
            accumulate_rollouts(s, a, k);
        } else {
            accumulate_bulk(s, a, k);
        }
        if (state_.visits[k] == params_.q) {
            attempt_update(s, a, k);
            cursor_ = static_cast<StateId>((s + 1) % S);
        }
        return true;
    }

    TracePoint probe(std::uint64_t t, const ValueTable& oracle) const {
        return {t, mean_error(ValueTable::from_q(state_.q_values), oracle), locked_fraction(), successes_};
    }

    RunTrace run(const ValueTable& oracle, std::uint64_t seed) {
        RunTrace trace;
        trace.config_snapshot["learner"] = Unlock::name;
        trace.config_snapshot["seed"] = seed;
        trace.config_snapshot.update(params_.to_json());
        auto p = [&](std::uint64_t t) { return probe(t, oracle); };
        TraceRecorder recorder(trace, params_.trace);
        recorder.start(p);
        while (true) {
            if (!any_active()) {
                trace.converged_at = state_.timestep;
                break;
            }
            if (!step()) {
                trace.budget_exhausted = true;
                break;
            }
            recorder.step(state_.timestep, p);
        }
        recorder.finish(state_.timestep, p);
        trace.timesteps = state_.timestep;
        trace.config_snapshot["attempted_updates"] = attempts_;
        trace.config_snapshot["successful_updates"] = successes_;
        if (params_.audit) trace.config_snapshot["audit"] = audit_.to_json();
        return trace;
    }

private:
    static std::size_t max_row_size(const MdpSpec& spec) {
        std::size_t m = 0;
        for (StateId s = 0; s < spec.num_states(); ++s)
            for (ActionId a = 0; a < spec.num_actions(); ++a) m = std::max(m, spec.successors(s, a).size());
        return m;
    }

    std::uint64_t batch_room(std::size_t k, std::uint64_t cost) const {
        const std::uint64_t left = params_.q - state_.visits[k];
        const std::uint64_t budget = (params_.max_timesteps - state_.timestep) / cost;
        return std::min(left, budget);
    }

    void accumulate_bulk(StateId s, ActionId a, std::size_t k) {
        const std::uint64_t n = batch_room(k, 1);
        const auto succ = spec_.successors(s, a);
        draw_successor_counts(spec_, s, a, n, rng_, counts_);
        double sum = static_cast<double>(n) * spec_.reward(s, a);
        double boot = 0.0;
        for (std::size_t i = 0; i < succ.size(); ++i)
            if (counts_[i] > 0) boot += static_cast<double>(counts_[i]) * state_.q_values.state_value(succ[i].next);
        sum += params_.gamma * boot;
        state_.accumulator[k] += sum;
        state_.visits[k] += n;
        state_.timestep += n;
    }

    // One U-sample: R(s, a) + gamma * sum_{i<T} gamma^i R(x_i, pi(x_i)) with
    // x_0 ~ T(.|s, a) and T - 1 further greedy transitions, costing T samples.
    void accumulate_rollouts(StateId s, ActionId a, std::size_t k) {
        const std::uint64_t n = batch_room(k, horizon_);
        for (std::uint64_t i = 0; i < n; ++i) {
            StateId x = sample_transition(spec_, s, a, rng_).next;
            double value = 0.0, disc = 1.0;
            for (std::uint32_t step = 0; step < horizon_; ++step) {
                const ActionId b = state_.q_values.greedy_action(x);
                value += disc * spec_.reward(x, b);
                disc *= params_.gamma;
                if (step + 1 < horizon_) x = sample_transition(spec_, x, b, rng_).next;
            }
            state_.accumulator[k] += spec_.reward(s, a) + params_.gamma * value;
        }
        state_.visits[k] += n;
        state_.timestep += n * horizon_;
    }

    void attempt_update(StateId s, ActionId a, std::size_t k) {
        ++attempts_;
        const double old = state_.q_values(s, a);
        const auto outcome = delayed_update(old, state_.accumulator[k], params_.q, params_.epsilon);
        if (params_.audit) ++audit_.attempts;
        if (outcome.updated) {
            ++successes_;
            std::vector<std::uint8_t> before;
            if (params_.audit) before = state_.unlocked;
            state_.q_values(s, a) = outcome.value;
            Unlock::for_each_state(spec_, params_, s, [&](StateId t) {
                for (ActionId b = 0; b < spec_.num_actions(); ++b) state_.unlocked[spec_.pair(t, b)] = 1;
            });
            if (params_.audit) audit_success(s, k, old, before);
        } else {
            state_.unlocked[k] = 0;
            if (params_.audit) ++audit_.locks;
        }
        state_.accumulator[k] = 0.0;
        state_.visits[k] = 0;
    }

    void audit_success(StateId s, std::size_t k, double old, const std::vector<std::uint8_t>& before) {
        ++audit_.successes;
        const auto n = ++pair_updates_[k];
        audit_.max_updates_per_pair = std::max(audit_.max_updates_per_pair, n);
        if (n > audit_.ceiling) ++audit_.ceiling_violations;
        if (old - state_.q_values.values()[k] < params_.epsilon * (1.0 - 1e-12)) ++audit_.descent_violations;
        auto& hops = hop_cache_[s];
        if (hops.empty()) hops = hop_distances(spec_, s, /*directed=*/false);
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (before[i] == state_.unlocked[i]) continue;
            if (before[i] && !state_.unlocked[i]) {
                ++audit_.spurious_locks;
                continue;
            }
            ++audit_.unlocked_pairs;
            const auto t = static_cast<StateId>(i / spec_.num_actions());
            const double d = hops[t] == kUnreachable ? std::numeric_limits<double>::infinity() : hops[t];
            if (!Unlock::in_range(d, params_)) ++audit_.radius_violations;
        }
    }

    const MdpSpec& spec_;
    PdqlParams params_;
    PdqlState state_;
    Rng rng_;
    std::vector<std::uint64_t> counts_;
    StateId cursor_ = 0;
    std::uint32_t horizon_ = 1;
    std::uint64_t attempts_ = 0;
    std::uint64_t successes_ = 0;
    UpdateAudit audit_;
    std::vector<std::uint64_t> pair_updates_;
    std::vector<std::vector<std::uint32_t>> hop_cache_;
};

using PdqlEngine = DelayedQEngine<LocalUnlock>;
using DqlEngine = DelayedQEngine<GlobalUnlock>;

inline RunTrace pdql_run(const MdpSpec& spec, const PdqlParams& params, const ValueTable& oracle, std::uint64_t seed) {
    PdqlEngine engine(spec, params, seed);
    return engine.run(oracle, seed);
}

inline RunTrace dql_run(const MdpSpec& spec, const PdqlParams& params, const ValueTable& oracle, std::uint64_t seed) {
    DqlEngine engine(spec, params, seed);
    return engine.run(oracle, seed);
}

}  // namespace pdql
