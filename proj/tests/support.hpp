#pragma once

// Small MDP builders shared by the unit tests.

#include <cstdint>
#include <vector>

#include "pdql/lattice.hpp"
#include "pdql/mdp.hpp"
#include "pdql/random.hpp"

namespace pdql::test {

/// One state, one action, self-loop with reward r.
inline MdpSpec single_state(double r, double gamma) {
    return MdpSpec(1, 1, gamma, {r}, {{{1.0, 0}}}, Metric::lattice({1}));
}

/// Deterministic 1-D chain of n states: action 0 moves left, action 1 right,
/// edges self-loop, reward 1 only at the right end.
inline MdpSpec chain(std::size_t n, double gamma) {
    std::vector<double> rewards(n * 2, 0.0);
    std::vector<std::vector<Successor>> rows(n * 2);
    for (StateId s = 0; s < n; ++s) {
        rows[s * 2 + 0] = {{1.0, s == 0 ? s : s - 1}};
        rows[s * 2 + 1] = {{1.0, s + 1 == n ? s : s + 1}};
        if (s + 1 == n) rewards[s * 2] = rewards[s * 2 + 1] = 1.0;
    }
    return MdpSpec(n, 2, gamma, rewards, rows, Metric::lattice({static_cast<std::uint32_t>(n)}));
}

/// Lattice with `goals` random goal cells and `hazards` random hazard cells.
inline MdpSpec grid(std::vector<std::uint32_t> dims, double slip, double gamma, std::uint64_t seed,
                    std::uint32_t goals = 2, std::uint32_t hazards = 1, bool wrap = false) {
    LatticeConfig cfg;
    cfg.dims = std::move(dims);
    cfg.slip_prob = slip;
    cfg.wrap = wrap;
    cfg.seed = seed;
    cfg.reward.random_goals = goals;
    cfg.reward.random_hazards = hazards;
    return make_lattice(cfg, gamma);
}

/// Random 2-D lattice with at most `max_states` states and random slip.
inline MdpSpec random_grid(Rng& rng, std::size_t max_states, double gamma) {
    std::uint32_t w, h;
    do {
        w = static_cast<std::uint32_t>(2 + rng.index(14));
        h = static_cast<std::uint32_t>(1 + rng.index(14));
    } while (static_cast<std::size_t>(w) * h > max_states);
    const double slip = 0.3 * rng.uniform();
    return grid({w, h}, slip, gamma, rng.index(1u << 30), 1 + static_cast<std::uint32_t>(rng.index(3)),
                static_cast<std::uint32_t>(rng.index(3)));
}

}  // namespace pdql::test
