#pragma once

// Overlap-aware placement of sub-MDP centers and Hoeffding fusion of the
// overlapping value estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/submdp.hpp"

namespace pdql {

/// Estimates needed per state: ceil((2 / eps) ln(2 S / delta)).
inline std::uint64_t overlap_requirement(double epsilon, double delta, std::uint64_t num_states) {
    detail::require_unit_interval(epsilon, "epsilon");
    detail::require_unit_interval(delta, "delta");
    if (num_states == 0) throw DomainError("S must be positive");
    const double n = (2.0 / epsilon) * std::log(2.0 * static_cast<double>(num_states) / delta);
    return static_cast<std::uint64_t>(std::max(1.0, detail::ceil_tol(n)));
}

struct CoveragePlan {
    std::vector<StateId> centers;                     ///< ascending
    std::vector<std::uint32_t> per_state_cover_count; ///< centers within coverage_radius of each state
    std::vector<std::uint32_t> requirement;           ///< min(target_overlap, ball size) per state
    std::vector<StateId> clamped_states;              ///< states whose requirement was clamped
    std::uint32_t coverage_radius = 0;
    std::uint64_t target_overlap = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["centers"] = centers;
        j["coverage_radius"] = coverage_radius;
        j["target_overlap"] = target_overlap;
        j["clamped_states"] = clamped_states;
        return j;
    }
};

/// Greedy covering: repeatedly add the state whose coverage ball holds the
/// most under-covered states (lowest index on ties) until each state has
/// min(N, achievable) centers within coverage_radius(gamma) hops.
inline CoveragePlan plan_centers(const MdpSpec& spec, double epsilon, double delta) {
    const std::size_t S = spec.num_states();
    CoveragePlan plan;
    plan.coverage_radius = coverage_radius(spec.discount());
    plan.target_overlap = overlap_requirement(epsilon, delta, S);

    // Hop balls are symmetric on the undirected transition graph, so the ball
    // around s is both "centers covering s" and "states covered by s".
    std::vector<std::vector<StateId>> ball(S);
    for (StateId s = 0; s < S; ++s) {
        const auto d = hop_distances(spec, s, /*directed=*/false);
        for (StateId t = 0; t < S; ++t)
            if (d[t] <= plan.coverage_radius) ball[s].push_back(t);
    }

    plan.requirement.resize(S);
    for (StateId s = 0; s < S; ++s) {
        const auto achievable = static_cast<std::uint64_t>(ball[s].size());
        plan.requirement[s] = static_cast<std::uint32_t>(std::min(plan.target_overlap, achievable));
        if (achievable < plan.target_overlap) plan.clamped_states.push_back(s);
    }

    plan.per_state_cover_count.assign(S, 0);
    std::vector<std::uint32_t> gain(S);
    for (StateId c = 0; c < S; ++c) gain[c] = static_cast<std::uint32_t>(ball[c].size());
    std::vector<bool> is_center(S, false);
    std::size_t unsatisfied = 0;
    for (StateId s = 0; s < S; ++s) {
        if (plan.requirement[s] == 0) {
            for (auto c : ball[s]) --gain[c];
        } else {
            ++unsatisfied;
        }
    }
    while (unsatisfied > 0) {
        StateId best = 0;
        std::uint32_t best_gain = 0;
        for (StateId c = 0; c < S; ++c)
            if (!is_center[c] && gain[c] > best_gain) {
                best = c;
                best_gain = gain[c];
            }
        if (best_gain == 0) break;  // unreachable: requirements never exceed ball sizes
        is_center[best] = true;
        gain[best] = 0;
        for (auto s : ball[best]) {
            if (plan.per_state_cover_count[s] >= plan.requirement[s]) continue;
            if (++plan.per_state_cover_count[s] == plan.requirement[s]) {
                --unsatisfied;
                for (auto c : ball[s])
                    if (!is_center[c]) --gain[c];
            }
        }
    }
    // Final counts include every center in range, not just the useful ones.
    std::fill(plan.per_state_cover_count.begin(), plan.per_state_cover_count.end(), 0);
    for (StateId c = 0; c < S; ++c)
        if (is_center[c]) {
            plan.centers.push_back(c);
            for (auto s : ball[c]) ++plan.per_state_cover_count[s];
        }
    return plan;
}

/// Mean of overlapping estimates together with the Hoeffding tail for the
/// deviation of that mean.
struct FusedEstimate {
    double value = 0.0;
    std::vector<double> error_bounds;

    std::size_t count() const noexcept { return error_bounds.size(); }

    /// 2 exp(-2 N^2 eps^2 / sum (2 eps_i)^2): Hoeffding with ranges 2 eps_i.
    double tail_bound(double epsilon) const {
        double denom = 0.0;
        for (double e : error_bounds) denom += (2.0 * e) * (2.0 * e);
        const double n = static_cast<double>(count());
        return std::min(1.0, 2.0 * std::exp(-2.0 * n * n * epsilon * epsilon / denom));
    }

    /// The published variant with an unsquared denominator sum 2 eps_i.
    double tail_bound_unsquared(double epsilon) const {
        double denom = 0.0;
        for (double e : error_bounds) denom += 2.0 * e;
        const double n = static_cast<double>(count());
        return std::min(1.0, 2.0 * std::exp(-2.0 * n * n * epsilon * epsilon / denom));
    }
};

struct Estimate {
    double value;
    double error_bound;
};

inline FusedEstimate fuse_estimates(const std::vector<Estimate>& estimates) {
    if (estimates.empty()) throw EmptyInput("fuse_estimates needs at least one estimate");
    FusedEstimate out;
    double sum = 0.0;
    for (const auto& e : estimates) {
        if (!(e.error_bound > 0.0)) throw DomainError("error bounds must be positive");
        sum += e.value;
        out.error_bounds.push_back(e.error_bound);
    }
    out.value = sum / static_cast<double>(estimates.size());
    return out;
}

}  // namespace pdql
