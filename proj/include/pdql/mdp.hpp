#pragma once

// Tabular MDP model with a state-space distance metric, dense value tables,
// and generative sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdql/errors.hpp"
#include "pdql/random.hpp"

namespace pdql {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

struct Successor {
    double prob;
    StateId next;
};

/// Distance over states. Two kinds are supported:
///  - lattice: Manhattan distance on a row-major grid (last axis fastest),
///    wrap-aware on torus axes;
///  - hops: shortest-path length on the undirected graph of nonzero
///    transitions (filled in by MdpSpec).
class Metric {
public:
    enum class Kind { lattice, hops };

    static Metric lattice(std::vector<std::uint32_t> dims, bool wrap = false) {
        Metric m;
        m.kind_ = Kind::lattice;
        m.dims_ = std::move(dims);
        m.wrap_ = wrap;
        m.strides_.assign(m.dims_.size(), 1);
        for (std::size_t i = m.dims_.size(); i-- > 1;) m.strides_[i - 1] = m.strides_[i] * m.dims_[i];
        return m;
    }

    static Metric hops() {
        Metric m;
        m.kind_ = Kind::hops;
        return m;
    }

    Kind kind() const noexcept { return kind_; }
    const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
    bool wrap() const noexcept { return wrap_; }

    std::size_t lattice_size() const {
        std::size_t n = 1;
        for (auto d : dims_) n *= d;
        return n;
    }

    std::vector<std::uint32_t> coords(StateId s) const {
        std::vector<std::uint32_t> c(dims_.size());
        for (std::size_t i = 0; i < dims_.size(); ++i) c[i] = (s / strides_[i]) % dims_[i];
        return c;
    }

    StateId index(std::span<const std::uint32_t> coords) const {
        StateId s = 0;
        for (std::size_t i = 0; i < dims_.size(); ++i) s += coords[i] * strides_[i];
        return s;
    }

    double distance(StateId a, StateId b) const {
        if (kind_ == Kind::lattice) return lattice_distance(a, b);
        auto row = bfs(a);
        return row[b] == kUnreachable ? std::numeric_limits<double>::infinity() : row[b];
    }

    /// Distances from one source to every state.
    std::vector<double> distances_from(StateId a) const {
        std::vector<double> out(num_states_);
        if (kind_ == Kind::lattice) {
            for (StateId b = 0; b < num_states_; ++b) out[b] = lattice_distance(a, b);
        } else {
            auto row = bfs(a);
            for (StateId b = 0; b < num_states_; ++b)
                out[b] = row[b] == kUnreachable ? std::numeric_limits<double>::infinity() : row[b];
        }
        return out;
    }

private:
    friend class MdpSpec;

    double lattice_distance(StateId a, StateId b) const {
        double d = 0.0;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            const auto ca = static_cast<std::int64_t>((a / strides_[i]) % dims_[i]);
            const auto cb = static_cast<std::int64_t>((b / strides_[i]) % dims_[i]);
            std::int64_t delta = std::llabs(ca - cb);
            if (wrap_) delta = std::min<std::int64_t>(delta, dims_[i] - delta);
            d += static_cast<double>(delta);
        }
        return d;
    }

    std::vector<std::uint32_t> bfs(StateId source) const {
        std::vector<std::uint32_t> dist(num_states_, kUnreachable);
        std::deque<StateId> frontier{source};
        dist[source] = 0;
        while (!frontier.empty()) {
            const StateId u = frontier.front();
            frontier.pop_front();
            for (auto k = adj_offsets_[u]; k < adj_offsets_[u + 1]; ++k) {
                const StateId v = adj_[k];
                if (dist[v] == kUnreachable) {
                    dist[v] = dist[u] + 1;
                    frontier.push_back(v);
                }
            }
        }
        return dist;
    }

    Kind kind_ = Kind::lattice;
    std::vector<std::uint32_t> dims_;
    std::vector<std::uint32_t> strides_;
    bool wrap_ = false;
    std::size_t num_states_ = 0;
    // Undirected adjacency for the hops metric (CSR).
    std::vector<std::size_t> adj_offsets_;
    std::vector<StateId> adj_;
};

/// Full tabular MDP (S, A, T, R, gamma) plus a state metric.
/// Transitions are stored as compressed successor lists; immutable after
/// construction and safe to share across threads.
class MdpSpec {
public:
    /// `rows[s * A + a]` is the successor list of (s, a); `rewards[s * A + a]`
    /// its expected reward. Dimension mismatches raise StructuralError; the
    /// semantic invariants (sums, reward range, locality) are checked by
    /// validate_mdp.
    MdpSpec(std::size_t num_states, std::size_t num_actions, double discount, std::vector<double> rewards,
            const std::vector<std::vector<Successor>>& rows, Metric metric)
        : num_states_(num_states),
          num_actions_(num_actions),
          discount_(discount),
          rewards_(std::move(rewards)),
          metric_(std::move(metric)) {
        if (num_states_ == 0 || num_actions_ == 0) throw StructuralError("MDP needs at least one state and one action");
        if (num_states_ >= kUnreachable) throw StructuralError("too many states");
        const std::size_t pairs = num_states_ * num_actions_;
        if (rewards_.size() != pairs)
            throw StructuralError("reward table has " + std::to_string(rewards_.size()) + " entries, expected " +
                                  std::to_string(pairs));
        if (rows.size() != pairs)
            throw StructuralError("transition table has " + std::to_string(rows.size()) + " rows, expected " +
                                  std::to_string(pairs));
        offsets_.reserve(pairs + 1);
        offsets_.push_back(0);
        for (std::size_t i = 0; i < pairs; ++i) {
            const auto& row = rows[i];
            if (row.empty()) throw StructuralError("empty transition row at pair " + std::to_string(i));
            double acc = 0.0;
            for (const auto& succ : row) {
                if (succ.next >= num_states_)
                    throw StructuralError("successor " + std::to_string(succ.next) + " out of range at pair " +
                                          std::to_string(i));
                succ_.push_back(succ);
                acc += succ.prob;
                cdf_.push_back(acc);
            }
            offsets_.push_back(succ_.size());
        }
        metric_.num_states_ = num_states_;
        if (metric_.kind_ == Metric::Kind::lattice) {
            if (metric_.lattice_size() != num_states_)
                throw StructuralError("lattice dims do not multiply to num_states");
        } else {
            build_adjacency();
        }
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t num_pairs() const noexcept { return num_states_ * num_actions_; }
    double discount() const noexcept { return discount_; }
    const Metric& metric() const noexcept { return metric_; }

    double reward(StateId s, ActionId a) const { return rewards_[pair(s, a)]; }
    std::span<const double> rewards() const noexcept { return rewards_; }

    std::span<const Successor> successors(StateId s, ActionId a) const {
        const auto p = pair(s, a);
        return {succ_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
    }

    /// Running sums of the successor probabilities (for inverse-CDF draws).
    std::span<const double> cumulative(StateId s, ActionId a) const {
        const auto p = pair(s, a);
        return {cdf_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
    }

    std::size_t pair(StateId s, ActionId a) const noexcept { return static_cast<std::size_t>(s) * num_actions_ + a; }

    /// Successor lists in the constructor's layout (for copying or serialization).
    std::vector<std::vector<Successor>> rows() const {
        std::vector<std::vector<Successor>> out(num_pairs());
        for (std::size_t p = 0; p < num_pairs(); ++p) out[p].assign(succ_.begin() + offsets_[p], succ_.begin() + offsets_[p + 1]);
        return out;
    }

private:
    void build_adjacency() {
        std::vector<std::vector<StateId>> nbrs(num_states_);
        for (StateId s = 0; s < num_states_; ++s)
            for (ActionId a = 0; a < num_actions_; ++a)
                for (const auto& succ : successors(s, a))
                    if (succ.prob > 0.0 && succ.next != s) {
                        nbrs[s].push_back(succ.next);
                        nbrs[succ.next].push_back(s);
                    }
        metric_.adj_offsets_.assign(1, 0);
        for (auto& list : nbrs) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
            metric_.adj_.insert(metric_.adj_.end(), list.begin(), list.end());
            metric_.adj_offsets_.push_back(metric_.adj_.size());
        }
    }

    std::size_t num_states_;
    std::size_t num_actions_;
    double discount_;
    std::vector<double> rewards_;
    std::vector<std::size_t> offsets_;
    std::vector<Successor> succ_;
    std::vector<double> cdf_;
    Metric metric_;
};

/// Dense per-(state, action) values.
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions, double init = 0.0)
        : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, init) {}

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }

    double& operator()(StateId s, ActionId a) { return values_[static_cast<std::size_t>(s) * num_actions_ + a]; }
    double operator()(StateId s, ActionId a) const { return values_[static_cast<std::size_t>(s) * num_actions_ + a]; }

    std::span<const double> row(StateId s) const {
        return {values_.data() + static_cast<std::size_t>(s) * num_actions_, num_actions_};
    }

    /// max_a Q(s, a).
    double state_value(StateId s) const {
        auto r = row(s);
        return *std::max_element(r.begin(), r.end());
    }

    /// argmax_a Q(s, a), lowest index on ties.
    ActionId greedy_action(StateId s) const {
        auto r = row(s);
        return static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
    }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::size_t capacity() const noexcept { return values_.capacity(); }

    bool operator==(const QTable&) const = default;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> values_;
};

/// Dense per-state values.
class ValueTable {
public:
    ValueTable() = default;
    explicit ValueTable(std::size_t num_states, double init = 0.0) : values_(num_states, init) {}
    explicit ValueTable(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](StateId s) { return values_[s]; }
    double operator[](StateId s) const { return values_[s]; }
    std::span<const double> values() const noexcept { return values_; }

    static ValueTable from_q(const QTable& q) {
        ValueTable v(q.num_states());
        for (StateId s = 0; s < q.num_states(); ++s) v[s] = q.state_value(s);
        return v;
    }

    bool operator==(const ValueTable&) const = default;

private:
    std::vector<double> values_;
};

struct Policy {
    std::vector<ActionId> action;

    std::size_t size() const noexcept { return action.size(); }
    ActionId operator[](StateId s) const { return action[s]; }
    bool operator==(const Policy&) const = default;
};

struct TransitionSample {
    StateId next;
    double reward;
};

/// Draws s' ~ T(.|s, a) by inverse CDF; the reward is the expected R(s, a).
inline TransitionSample sample_transition(const MdpSpec& spec, StateId s, ActionId a, Rng& rng) {
    const auto succ = spec.successors(s, a);
    if (succ.size() == 1) return {succ[0].next, spec.reward(s, a)};
    const auto cdf = spec.cumulative(s, a);
    const double u = rng.uniform() * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), succ.size() - 1);
    return {succ[k].next, spec.reward(s, a)};
}

/// Counts of each successor of (s, a) over `n` independent draws. The result is
/// multinomial(n, T(.|s, a)), drawn by sequential conditional binomials for
/// large n and by individual inverse-CDF draws for small n.
inline void draw_successor_counts(const MdpSpec& spec, StateId s, ActionId a, std::uint64_t n, Rng& rng,
                                  std::span<std::uint64_t> counts) {
    const auto succ = spec.successors(s, a);
    std::fill(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(succ.size()), 0);
    if (n == 0) return;
    if (succ.size() == 1) {
        counts[0] = n;
        return;
    }
    constexpr std::uint64_t kDirectDrawLimit = 32;
    if (n <= kDirectDrawLimit) {
        const auto cdf = spec.cumulative(s, a);
        for (std::uint64_t i = 0; i < n; ++i) {
            const double u = rng.uniform() * cdf.back();
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            ++counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), succ.size() - 1)];
        }
        return;
    }
    double mass_left = spec.cumulative(s, a).back();
    std::uint64_t left = n;
    for (std::size_t k = 0; k + 1 < succ.size() && left > 0; ++k) {
        const double p = mass_left > 0.0 ? std::clamp(succ[k].prob / mass_left, 0.0, 1.0) : 0.0;
        counts[k] = rng.binomial(left, p);
        left -= counts[k];
        mass_left -= succ[k].prob;
    }
    counts[succ.size() - 1] += left;
}

}  // namespace pdql
