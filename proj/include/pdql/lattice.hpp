#pragma once

// Metric lattice MDP families: bounded grids and tori with slip noise and
// state-wise rewards scaled to [0, 1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/random.hpp"

namespace pdql {

struct RewardCell {
    std::int64_t cell = -1;  ///< state index; negative values count from the end
    double reward = 1.0;
};

struct RewardSpec {
    std::vector<RewardCell> goals;
    std::vector<RewardCell> hazards;
    double step_reward = 0.0;
    std::uint32_t random_goals = 0;    ///< extra goal cells placed from the seed
    std::uint32_t random_hazards = 0;  ///< extra hazard cells placed from the seed
};

struct LatticeConfig {
    std::vector<std::uint32_t> dims;
    bool wrap = false;
    double slip_prob = 0.0;
    RewardSpec reward;
    bool absorbing = false;  ///< goal cells self-loop under every action
    std::uint64_t seed = 0;

    std::size_t num_states() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline void check_lattice_config(const LatticeConfig& cfg) {
    if (cfg.dims.empty()) throw ConfigError("lattice needs at least one dimension");
    for (auto d : cfg.dims)
        if (d == 0) throw ConfigError("lattice dimensions must be positive");
    if (cfg.num_states() < 2) throw ConfigError("lattice must have at least 2 states");
    if (!(cfg.slip_prob >= 0.0 && cfg.slip_prob < 1.0)) throw ConfigError("slip_prob must lie in [0, 1)");
    bool any = cfg.reward.random_goals > 0 || cfg.reward.random_hazards > 0;
    for (const auto& g : cfg.reward.goals) any = any || g.reward != 0.0;
    for (const auto& h : cfg.reward.hazards) any = any || h.reward != 0.0;
    if (!any) throw ConfigError("reward spec needs at least one nonzero reward cell");
}

/// Affine map of all rewards onto [0, 1] (min -> 0, max -> 1); a constant
/// reward table maps to all zeros.
inline MdpSpec scale_rewards(const MdpSpec& spec) {
    const auto r = spec.rewards();
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    std::vector<double> scaled(r.size(), 0.0);
    if (*hi > *lo) {
        const double span = *hi - *lo;
        for (std::size_t i = 0; i < r.size(); ++i) scaled[i] = std::clamp((r[i] - *lo) / span, 0.0, 1.0);
    }
    return MdpSpec(spec.num_states(), spec.num_actions(), spec.discount(), std::move(scaled), spec.rows(),
                   spec.metric());
}

namespace detail {

inline StateId resolve_cell(std::int64_t cell, std::size_t num_states) {
    const auto n = static_cast<std::int64_t>(num_states);
    const std::int64_t idx = cell < 0 ? n + cell : cell;
    if (idx < 0 || idx >= n) throw ConfigError("reward cell " + std::to_string(cell) + " outside the lattice");
    return static_cast<StateId>(idx);
}

}  // namespace detail

struct CellRewards {
    std::vector<double> reward;  ///< raw r(s) before scaling
    std::vector<bool> goal;
};

inline CellRewards lattice_cell_rewards(const LatticeConfig& cfg) {
    const std::size_t S = cfg.num_states();
    CellRewards out{std::vector<double>(S, cfg.reward.step_reward), std::vector<bool>(S, false)};
    for (const auto& g : cfg.reward.goals) {
        const auto s = detail::resolve_cell(g.cell, S);
        out.reward[s] += g.reward;
        out.goal[s] = true;
    }
    for (const auto& h : cfg.reward.hazards) out.reward[detail::resolve_cell(h.cell, S)] += h.reward;
    Rng rng(derive_seed(cfg.seed, 0x72657761));
    for (std::uint32_t i = 0; i < cfg.reward.random_goals; ++i) {
        const auto s = rng.index(S);
        out.reward[s] += 0.5 + 0.5 * rng.uniform();
        out.goal[s] = true;
    }
    for (std::uint32_t i = 0; i < cfg.reward.random_hazards; ++i) out.reward[rng.index(S)] -= 0.5 + 0.5 * rng.uniform();
    return out;
}

/// Lattice MDP with one action per axis direction (A = 2 * |dims|). The chosen
/// move happens with probability 1 - slip; otherwise a uniformly random action
/// is executed. Moves off a bounded edge self-loop. R(s, a) is the reward of
/// the current cell, scaled to [0, 1].
inline MdpSpec make_lattice(const LatticeConfig& cfg, double gamma) {
    check_lattice_config(cfg);
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in (0, 1)");
    const std::size_t S = cfg.num_states();
    const std::size_t axes = cfg.dims.size();
    const std::size_t A = 2 * axes;
    const Metric metric = Metric::lattice(cfg.dims, cfg.wrap);
    const auto cells = lattice_cell_rewards(cfg);

    auto move = [&](StateId s, ActionId a) -> StateId {
        auto c = metric.coords(s);
        const std::size_t axis = a / 2;
        const std::int64_t extent = cfg.dims[axis];
        std::int64_t x = static_cast<std::int64_t>(c[axis]) + (a % 2 == 0 ? 1 : -1);
        if (cfg.wrap) {
            x = (x + extent) % extent;
        } else if (x < 0 || x >= extent) {
            return s;
        }
        c[axis] = static_cast<std::uint32_t>(x);
        return metric.index(c);
    };

    std::vector<double> rewards(S * A);
    std::vector<std::vector<Successor>> rows(S * A);
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a) {
            rewards[s * A + a] = cells.reward[s];
            std::map<StateId, double> mass;
            if (cfg.absorbing && cells.goal[s]) {
                mass[s] = 1.0;
            } else {
                mass[move(s, a)] += 1.0 - cfg.slip_prob;
                if (cfg.slip_prob > 0.0)
                    for (ActionId b = 0; b < A; ++b) mass[move(s, b)] += cfg.slip_prob / static_cast<double>(A);
            }
            for (const auto& [next, p] : mass) rows[s * A + a].push_back({p, next});
        }
    return scale_rewards(MdpSpec(S, A, gamma, std::move(rewards), rows, metric));
}

/// Most-square two-factor split of n, larger factor first (50 -> [10, 5]).
inline std::vector<std::uint32_t> most_square_dims(std::size_t n) {
    auto b = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (b * b > n) --b;
    while (b > 1 && n % b != 0) --b;
    if (b == 0) b = 1;
    return {static_cast<std::uint32_t>(n / b), static_cast<std::uint32_t>(b)};
}

/// Config for each size with dims = most-square split and a seed derived from
/// the base seed and S.
inline std::vector<LatticeConfig> size_sweep_configs(const LatticeConfig& base, const std::vector<std::size_t>& sizes) {
    if (!std::is_sorted(sizes.begin(), sizes.end())) throw ConfigError("sweep sizes must be sorted ascending");
    std::vector<LatticeConfig> out;
    for (auto S : sizes) {
        if (S < 2) throw ConfigError("sweep size " + std::to_string(S) + " is below 2");
        LatticeConfig cfg = base;
        cfg.dims = most_square_dims(S);
        cfg.seed = derive_seed(base.seed, S);
        out.push_back(std::move(cfg));
    }
    return out;
}

inline std::vector<MdpSpec> size_sweep(const LatticeConfig& base, const std::vector<std::size_t>& sizes, double gamma) {
    std::vector<MdpSpec> out;
    for (const auto& cfg : size_sweep_configs(base, sizes)) out.push_back(make_lattice(cfg, gamma));
    return out;
}

}  // namespace pdql
