#include <gtest/gtest.h>

#include <map>

#include "pdql/lattice.hpp"
#include "pdql/submdp.hpp"
#include "pdql/validation.hpp"
#include "support.hpp"

using namespace pdql;

namespace {

LatticeConfig one_goal(std::vector<std::uint32_t> dims, double slip = 0.0) {
    LatticeConfig cfg;
    cfg.dims = std::move(dims);
    cfg.slip_prob = slip;
    cfg.reward.goals = {{-1, 1.0}};
    return cfg;
}

std::map<StateId, double> row_of(const MdpSpec& spec, StateId s, ActionId a) {
    std::map<StateId, double> out;
    for (const auto& succ : spec.successors(s, a)) out[succ.next] += succ.prob;
    return out;
}

}  // namespace

TEST(MakeLattice, DeterministicFourByFourValidates) {
    const auto spec = make_lattice(one_goal({4, 4}), 0.9);
    EXPECT_EQ(spec.num_states(), 16u);
    EXPECT_EQ(spec.num_actions(), 4u);
    EXPECT_TRUE(validate_mdp(spec).ok());
    for (StateId s = 0; s < 16; ++s)
        for (ActionId a = 0; a < 4; ++a) EXPECT_EQ(spec.successors(s, a).size(), 1u);
    // Only the goal cell (the last state) earns reward after scaling.
    EXPECT_EQ(spec.reward(15, 0), 1.0);
    EXPECT_EQ(spec.reward(0, 0), 0.0);
}

TEST(MakeLattice, SlipRowHandComputed) {
    const auto spec = make_lattice(one_goal({10, 5}, 0.2), 0.9);
    // Row-major: interior cell (4, 3) = 4 * 5 + 3 = 23; action 0 moves +x to (5, 3) = 28.
    const auto row = row_of(spec, 23, 0);
    ASSERT_EQ(row.size(), 4u);
    EXPECT_NEAR(row.at(28), 0.8 + 0.05, 1e-15);
    EXPECT_NEAR(row.at(18), 0.05, 1e-15);
    EXPECT_NEAR(row.at(24), 0.05, 1e-15);
    EXPECT_NEAR(row.at(22), 0.05, 1e-15);
    // Corner 0, action 1 (-x): the -x and -y moves self-loop.
    const auto corner = row_of(spec, 0, 1);
    EXPECT_NEAR(corner.at(0), 0.8 + 0.05 + 0.05, 1e-15);
    EXPECT_NEAR(corner.at(5), 0.05, 1e-15);
    EXPECT_NEAR(corner.at(1), 0.05, 1e-15);
    EXPECT_TRUE(validate_mdp(spec).ok());
}

TEST(MakeLattice, RingHasTwoUnitNeighbors) {
    auto cfg = one_goal({50});
    cfg.wrap = true;
    const auto spec = make_lattice(cfg, 0.9);
    EXPECT_EQ(spec.num_actions(), 2u);
    for (StateId s = 0; s < 50; ++s) {
        int near = 0;
        for (StateId t = 0; t < 50; ++t) near += (t != s && spec.metric().distance(s, t) == 1.0);
        EXPECT_EQ(near, 2);
    }
    EXPECT_EQ(spec.successors(0, 1)[0].next, 49u);
    EXPECT_TRUE(validate_mdp(spec).ok());
}

TEST(MakeLattice, AbsorbingGoalsSelfLoop) {
    auto cfg = one_goal({4, 4}, 0.1);
    cfg.absorbing = true;
    const auto spec = make_lattice(cfg, 0.9);
    for (ActionId a = 0; a < 4; ++a) {
        ASSERT_EQ(spec.successors(15, a).size(), 1u);
        EXPECT_EQ(spec.successors(15, a)[0].next, 15u);
    }
}

TEST(MakeLattice, InvalidConfigsAreConfigErrors) {
    EXPECT_THROW(make_lattice(one_goal({1}), 0.9), ConfigError);
    EXPECT_THROW(make_lattice(one_goal({4, 4}, 1.0), 0.9), ConfigError);
    EXPECT_THROW(make_lattice(one_goal({}), 0.9), ConfigError);
    LatticeConfig no_reward;
    no_reward.dims = {4, 4};
    EXPECT_THROW(make_lattice(no_reward, 0.9), ConfigError);
    auto outside = one_goal({4, 4});
    outside.reward.goals = {{16, 1.0}};
    EXPECT_THROW(make_lattice(outside, 0.9), ConfigError);
    EXPECT_THROW(make_lattice(one_goal({4, 4}), 1.0), ConfigError);
}

TEST(MakeLattice, SeedMatrixValidatesAndMetricMatchesHops) {
    for (std::uint64_t seed = 0; seed < 6; ++seed)
        for (double slip : {0.0, 0.1, 0.3})
            for (bool wrap : {false, true}) {
                const auto spec = test::grid({7, 5}, slip, 0.9, seed, 2, 2, wrap);
                EXPECT_TRUE(validate_mdp(spec).ok());
                if (slip == 0.0) continue;
                for (StateId s = 0; s < spec.num_states(); s += 3) {
                    const auto hops = hop_distances(spec, s);
                    for (StateId t = 0; t < spec.num_states(); ++t)
                        EXPECT_EQ(static_cast<double>(hops[t]), spec.metric().distance(s, t));
                }
            }
}

TEST(ScaleRewards, AffineMapToUnitInterval) {
    const MdpSpec raw(3, 1, 0.9, {-1.0, 0.0, 3.0}, {{{1.0, 0}}, {{1.0, 1}}, {{1.0, 2}}}, Metric::lattice({3}));
    const auto scaled = scale_rewards(raw);
    EXPECT_EQ(scaled.reward(0, 0), 0.0);
    EXPECT_EQ(scaled.reward(1, 0), 0.25);
    EXPECT_EQ(scaled.reward(2, 0), 1.0);
    const auto again = scale_rewards(scaled);
    for (StateId s = 0; s < 3; ++s) EXPECT_EQ(again.reward(s, 0), scaled.reward(s, 0));
}

TEST(ScaleRewards, UnitRangeUnchangedAndConstantToZero) {
    const MdpSpec unit(2, 1, 0.9, {0.0, 1.0}, {{{1.0, 0}}, {{1.0, 1}}}, Metric::lattice({2}));
    EXPECT_EQ(scale_rewards(unit).reward(1, 0), 1.0);
    EXPECT_EQ(scale_rewards(unit).reward(0, 0), 0.0);
    const MdpSpec flat(2, 1, 0.9, {0.7, 0.7}, {{{1.0, 0}}, {{1.0, 1}}}, Metric::lattice({2}));
    EXPECT_EQ(scale_rewards(flat).reward(0, 0), 0.0);
    EXPECT_EQ(scale_rewards(flat).reward(1, 0), 0.0);
}

TEST(SizeSweep, MostSquareFactorizations) {
    const auto base = one_goal({2});
    EXPECT_EQ(size_sweep_configs(base, {50})[0].dims, (std::vector<std::uint32_t>{10, 5}));
    EXPECT_EQ(size_sweep_configs(base, {49})[0].dims, (std::vector<std::uint32_t>{7, 7}));
    EXPECT_EQ(size_sweep_configs(base, {200})[0].dims, (std::vector<std::uint32_t>{20, 10}));
    EXPECT_EQ(size_sweep_configs(base, {13})[0].dims, (std::vector<std::uint32_t>{13, 1}));
}

TEST(SizeSweep, ExperimentSizesProduceSixSpecs) {
    auto base = one_goal({2}, 0.1);
    base.reward.random_goals = 2;
    const auto specs = size_sweep(base, {50, 200, 500, 1000, 1500, 2000}, 0.9);
    ASSERT_EQ(specs.size(), 6u);
    EXPECT_EQ(specs[5].num_states(), 2000u);
    for (const auto& s : specs) EXPECT_EQ(s.num_actions(), 4u);
}

TEST(SizeSweep, SeedsDerivedPerSizeAndOtherFieldsKept) {
    auto base = one_goal({2}, 0.15);
    base.seed = 77;
    base.wrap = true;
    const auto cfgs = size_sweep_configs(base, {20, 30});
    EXPECT_NE(cfgs[0].seed, cfgs[1].seed);
    EXPECT_EQ(cfgs[0].seed, size_sweep_configs(base, {20})[0].seed);
    EXPECT_TRUE(cfgs[1].wrap);
    EXPECT_EQ(cfgs[1].slip_prob, 0.15);
}

TEST(SizeSweep, RejectsUnsortedAndTinySizes) {
    const auto base = one_goal({2});
    EXPECT_THROW(size_sweep_configs(base, {200, 50}), ConfigError);
    EXPECT_THROW(size_sweep_configs(base, {1, 50}), ConfigError);
}
