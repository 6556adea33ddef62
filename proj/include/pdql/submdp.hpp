#pragma once

// Local approximation: truncation radius, sub-MDP carving with boundary
// self-loops, and the distance-decaying error envelope.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"

namespace pdql {

namespace detail {

/// ceil() that ignores round-off just above an integer (log(0.25)/log(0.5)).
inline double ceil_tol(double x) {
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) return nearest;
    return std::ceil(x);
}

inline void require_unit_interval(double x, const char* name) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError(std::string(name) + " must lie in (0, 1), got " + std::to_string(x));
}

}  // namespace detail

/// log_gamma(eps (1 - gamma)), the un-rounded truncation horizon.
inline double truncation_log(double epsilon, double gamma) {
    detail::require_unit_interval(epsilon, "epsilon");
    detail::require_unit_interval(gamma, "gamma");
    return std::log(epsilon * (1.0 - gamma)) / std::log(gamma);
}

/// Smallest T >= 1 with gamma^T <= eps (1 - gamma): beyond T steps the
/// discounted tail contributes at most eps.
inline std::uint32_t truncation_radius(double epsilon, double gamma) {
    const double t = detail::ceil_tol(truncation_log(epsilon, gamma));
    return static_cast<std::uint32_t>(std::max(1.0, t));
}

/// ceil(log_gamma 0.5): distance within which sub-MDP estimates stay 2eps-accurate.
inline std::uint32_t coverage_radius(double gamma) {
    detail::require_unit_interval(gamma, "gamma");
    return static_cast<std::uint32_t>(std::max(1.0, detail::ceil_tol(std::log(0.5) / std::log(gamma))));
}

/// eps / gamma^distance.
inline double error_envelope(double epsilon, double gamma, double distance) {
    return epsilon / std::pow(gamma, distance);
}

struct SizeBound {
    double raw = 0.0;          ///< (log_gamma(eps (1 - gamma)))^A
    std::uint64_t value = 0;   ///< ceil(raw), saturated at limit + 1
    bool exceeds = false;      ///< raw exceeds the supplied state count
};

/// Sub-MDP state-count bound, reading log_gamma^A as the truncation log raised
/// to the A-th power (lattice ball volume).
inline SizeBound submdp_size_bound(double epsilon, double gamma, std::uint32_t num_actions,
                                   std::uint64_t num_states = std::numeric_limits<std::uint64_t>::max()) {
    if (num_actions == 0) throw DomainError("A must be positive");
    SizeBound b;
    b.raw = std::pow(truncation_log(epsilon, gamma), static_cast<double>(num_actions));
    const double rounded = std::max(1.0, detail::ceil_tol(b.raw));
    if (rounded > static_cast<double>(num_states) || !std::isfinite(rounded)) {
        b.exceeds = true;
        b.value = num_states == std::numeric_limits<std::uint64_t>::max() ? num_states : num_states + 1;
    } else {
        b.value = static_cast<std::uint64_t>(rounded);
    }
    return b;
}

/// BFS hop counts from `source` over nonzero-probability transitions
/// (self-loops ignored). `directed = false` also follows edges backwards.
inline std::vector<std::uint32_t> hop_distances(const MdpSpec& spec, StateId source, bool directed = true) {
    const std::size_t S = spec.num_states();
    std::vector<std::vector<StateId>> reverse;
    if (!directed) {
        reverse.resize(S);
        for (StateId s = 0; s < S; ++s)
            for (ActionId a = 0; a < spec.num_actions(); ++a)
                for (const auto& succ : spec.successors(s, a))
                    if (succ.prob > 0.0 && succ.next != s) reverse[succ.next].push_back(s);
    }
    std::vector<std::uint32_t> dist(S, kUnreachable);
    std::deque<StateId> frontier{source};
    dist[source] = 0;
    auto visit = [&](StateId from, StateId to) {
        if (dist[to] == kUnreachable) {
            dist[to] = dist[from] + 1;
            frontier.push_back(to);
        }
    };
    while (!frontier.empty()) {
        const StateId u = frontier.front();
        frontier.pop_front();
        for (ActionId a = 0; a < spec.num_actions(); ++a)
            for (const auto& succ : spec.successors(u, a))
                if (succ.prob > 0.0) visit(u, succ.next);
        if (!directed)
            for (auto v : reverse[u]) visit(u, v);
    }
    return dist;
}

/// A parent MDP restricted to {s : D(center, s) < radius}; transitions leaving
/// the set become self-loops that keep the parent's reward.
struct SubMdp {
    const MdpSpec* parent = nullptr;
    StateId center = 0;
    std::uint32_t radius = 0;
    std::vector<StateId> members;            ///< parent indices, ascending; local index = position
    std::vector<std::uint32_t> distance;     ///< hop distance from the center, per member
    std::vector<std::uint32_t> local_index;  ///< parent index -> local index, or kUnreachable
    MdpSpec local;

    std::size_t size() const noexcept { return members.size(); }
    bool contains(StateId parent_state) const { return local_index[parent_state] != kUnreachable; }
    StateId to_parent(StateId local_state) const { return members[local_state]; }
    StateId to_local(StateId parent_state) const { return local_index[parent_state]; }
};

/// Sub-MDP with an explicit radius (membership is strict: D < radius).
inline SubMdp build_submdp_radius(const MdpSpec& parent, StateId center, std::uint32_t radius) {
    if (center >= parent.num_states()) throw DomainError("center " + std::to_string(center) + " out of range");
    if (radius == 0) throw DomainError("radius must be positive");
    const auto dist = hop_distances(parent, center);
    std::vector<StateId> members;
    std::vector<std::uint32_t> member_dist;
    std::vector<std::uint32_t> local_index(parent.num_states(), kUnreachable);
    for (StateId s = 0; s < parent.num_states(); ++s)
        if (dist[s] < radius) {
            local_index[s] = static_cast<std::uint32_t>(members.size());
            members.push_back(s);
            member_dist.push_back(dist[s]);
        }
    const std::size_t n = members.size();
    const std::size_t A = parent.num_actions();
    std::vector<double> rewards(n * A);
    std::vector<std::vector<Successor>> rows(n * A);
    for (StateId local = 0; local < n; ++local)
        for (ActionId a = 0; a < A; ++a) {
            const StateId s = members[local];
            rewards[local * A + a] = parent.reward(s, a);
            std::map<StateId, double> mass;
            for (const auto& succ : parent.successors(s, a)) {
                const auto target = local_index[succ.next];
                mass[target == kUnreachable ? local : target] += succ.prob;
            }
            for (const auto& [next, p] : mass) rows[local * A + a].push_back({p, next});
        }
    MdpSpec local(n, A, parent.discount(), std::move(rewards), rows, Metric::hops());
    return SubMdp{&parent, center, radius, std::move(members), std::move(member_dist), std::move(local_index),
                  std::move(local)};
}

/// Sub-MDP centered on `center` with radius truncation_radius(epsilon, gamma).
inline SubMdp build_submdp(const MdpSpec& parent, StateId center, double epsilon) {
    return build_submdp_radius(parent, center, truncation_radius(epsilon, parent.discount()));
}

}  // namespace pdql
