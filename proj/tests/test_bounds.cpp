#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "pdql/bounds.hpp"

using namespace pdql;

namespace {

const std::vector<double> kEpsGrid{0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
const std::vector<double> kDeltaGrid{0.001, 0.01, 0.05, 0.1, 0.5};
const std::vector<double> kGammaGrid{0.5, 0.8, 0.9, 0.95};
const std::vector<std::uint64_t> kSGrid{2, 10, 50, 200, 1000, 2000};
const std::vector<std::uint64_t> kAGrid{1, 2, 4, 8};

void for_grid(const std::function<void(const BoundInputs&)>& f) {
    for (double e : kEpsGrid)
        for (double d : kDeltaGrid)
            for (double g : kGammaGrid)
                for (auto S : kSGrid)
                    for (auto A : kAGrid) f({e, d, g, S, A});
}

enum class Direction { up, down };

/// Checks f along one coordinate of the grid: `up` means nondecreasing.
template <class F, class T>
void check_along(const F& f, const std::vector<T>& values, T BoundInputs::*field, Direction dir, const char* what) {
    for (double e : kEpsGrid)
        for (double d : kDeltaGrid)
            for (double g : kGammaGrid)
                for (auto S : kSGrid)
                    for (auto A : kAGrid) {
                        BoundInputs in{e, d, g, S, A};
                        double prev = NAN;
                        for (const T& v : values) {
                            in.*field = v;
                            const double x = static_cast<double>(f(in));
                            if (!std::isnan(prev)) {
                                if (dir == Direction::up)
                                    EXPECT_GE(x, prev * (1 - 1e-12)) << what << " eps=" << e << " d=" << d << " g=" << g
                                                                     << " S=" << S << " A=" << A;
                                else
                                    EXPECT_LE(x, prev * (1 + 1e-12)) << what << " eps=" << e << " d=" << d << " g=" << g
                                                                     << " S=" << S << " A=" << A;
                            }
                            prev = x;
                        }
                    }
}

}  // namespace

TEST(BoundGoldens, QLowerBound) {
    const BoundInputs in{0.1, 0.1, 0.5, 10, 2};
    EXPECT_NEAR(radius_term(in), 18.679, 1e-3);
    const auto q = q_lower_bound_detail(in);
    EXPECT_NEAR(q.raw, 2155.77, 0.01);
    EXPECT_EQ(q.value, 2156u);
    EXPECT_FALSE(q.saturated);
}

TEST(BoundGoldens, OverlapBound) { EXPECT_EQ(overlap_bound({0.01, 0.001, 0.9, 1000, 4}), 2902u); }

TEST(BoundGoldens, SubmdpCount) {
    const auto clamp = submdp_count_bound_detail({0.01, 0.001, 0.9, 1000, 4});
    EXPECT_NEAR(clamp.raw, 0.082, 1e-3);
    EXPECT_EQ(clamp.value, 1u);
    EXPECT_TRUE(clamp.saturated);
    EXPECT_EQ(submdp_count_bound({0.5, 0.001, 0.5, 1000, 2}), 7601u);
    // A single state sits deep in the clamp regime at the first example's parameters.
    EXPECT_EQ(submdp_count_bound({0.01, 0.001, 0.9, 1, 4}), 1u);
}

TEST(BoundGoldens, Radii) {
    EXPECT_EQ(truncation_radius(0.01, 0.9), 66u);
    EXPECT_EQ(coverage_radius(0.9), 7u);
}

TEST(QLowerBound, NonincreasingInEpsilon) {
    for (double g : kGammaGrid)
        for (auto S : kSGrid) {
            std::uint64_t prev = UINT64_MAX;
            for (double e = 0.05; e <= 0.5 + 1e-9; e += 0.05) {
                const auto q = q_lower_bound({e, 0.01, g, S, 4});
                EXPECT_LE(q, prev);
                prev = q;
            }
        }
}

TEST(QLowerBound, LargerDeltaGivesSmallerQ) {
    EXPECT_LT(q_lower_bound({0.1, 0.5, 0.9, 100, 4}), q_lower_bound({0.1, 0.001, 0.9, 100, 4}));
}

TEST(QLowerBound, DomainErrors) {
    EXPECT_THROW(q_lower_bound({0.0, 0.1, 0.9, 10, 2}), DomainError);
    EXPECT_THROW(q_lower_bound({0.1, 0.1, 0.9, 0, 2}), DomainError);
    EXPECT_THROW(q_lower_bound({0.1, 0.1, 0.9, 10, 0}), DomainError);
}

TEST(OverlapBound, SmallestValueInDomain) {
    // (2/eps) ln(2S/delta) > 2 ln 2 for eps, delta < 1 and S >= 1, so the
    // clamp at 1 is never active and the smallest reachable value is 2.
    EXPECT_EQ(overlap_bound({0.999, 0.999, 0.9, 1, 1}), 2u);
    for (double e : {0.9, 0.99})
        for (double d : {0.9, 0.99}) EXPECT_GE(overlap_bound({e, d, 0.9, 1, 1}), 2u);
}

TEST(OverlapBound, DoublingSAddsTwoLnTwoOverEps) {
    for (double e : kEpsGrid)
        for (double d : kDeltaGrid)
            for (std::uint64_t S : {1u, 7u, 50u, 1000u}) {
                const auto a = overlap_bound({e, d, 0.9, S, 1});
                const auto b = overlap_bound({e, d, 0.9, 2 * S, 1});
                EXPECT_NEAR(static_cast<double>(b - a), (2.0 / e) * std::log(2.0), 1.0);
            }
}

TEST(SubmdpSampleComplexity, DoublingAMoreThanDoubles) {
    for (double e : {0.05, 0.1, 0.2})
        for (double g : {0.5, 0.9})
            for (std::uint64_t A : {1u, 2u, 4u}) {
                const double x = submdp_sample_complexity({e, 0.01, g, 100, A});
                const double y = submdp_sample_complexity({e, 0.01, g, 100, 2 * A});
                EXPECT_GT(y, 2 * x) << e << " " << g << " " << A;
            }
}

TEST(SubmdpSampleComplexity, ReducesWhenRadiusTermIsOne) {
    // eps (1 - gamma) = gamma makes the truncation log exactly 1, so B = 1.
    const BoundInputs unit{0.5, 0.05, 1.0 / 3.0, 10, 3};
    EXPECT_NEAR(radius_term(unit), 1.0, 1e-12);
    const double g1 = 1.0 - unit.gamma, A = 3.0;
    const double reduced = A / (0.25 * g1 * g1 * g1) * std::log(A / (0.05 * g1)) * std::log(2.0);
    EXPECT_NEAR(submdp_sample_complexity(unit), reduced, 1e-9 * reduced);
}

TEST(NaiveTotal, SingleStateAndLinearity) {
    const BoundInputs one{0.1, 0.01, 0.9, 1, 4};
    EXPECT_EQ(naive_total_bound(one), submdp_sample_complexity(one));
    const BoundInputs s{0.1, 0.01, 0.9, 37, 4}, s10{0.1, 0.01, 0.9, 370, 4};
    EXPECT_NEAR(naive_total_bound(s10) / naive_total_bound(s), 10.0, 1e-12);
}

TEST(NaiveTotal, DominatesPdqlTotalOnHighDiscountGrid) {
    // The sharpening holds for eps <= 0.1, gamma >= 0.9 and A >= 2, where the
    // sub-MDP size term is large. Outside that corner the constants-1
    // evaluations can cross.
    for (double e : {0.01, 0.02, 0.05, 0.1})
        for (double d : kDeltaGrid)
            for (double g : {0.9, 0.95, 0.99})
                for (auto S : kSGrid)
                    for (std::uint64_t A : {2u, 4u, 8u}) {
                        const BoundInputs in{e, d, g, S, A};
                        EXPECT_GE(naive_total_bound(in), pdql_total_bound(in))
                            << "eps=" << e << " d=" << d << " g=" << g << " S=" << S << " A=" << A;
                    }
}

TEST(PdqlTotalBound, RatioToDelayedQShrinksWithS) {
    double prev = INFINITY;
    for (std::uint64_t S : {50u, 200u, 500u, 1000u, 1500u, 2000u}) {
        const BoundInputs in{0.01, 0.001, 0.9, S, 4};
        const double dql = comparison_rows(in)[0].value;
        const double ratio = pdql_total_bound(in) / dql;
        EXPECT_LT(ratio, prev);
        prev = ratio;
    }
}

TEST(PdqlTotalBound, SmallerGammaShrinksBound) {
    EXPECT_LT(pdql_total_bound({0.05, 0.01, 0.5, 100, 4}), pdql_total_bound({0.05, 0.01, 0.9, 100, 4}));
}

TEST(PdqlTotalBound, CompositionalFormIsReported) {
    // The two forms differ by simplification steps; only positivity is asserted.
    for (double e : {0.01, 0.1})
        for (std::uint64_t S : {50u, 2000u}) {
            const BoundInputs in{e, 0.001, 0.9, S, 4};
            const double closed = pdql_total_bound(in), comp = pdql_total_compositional(in);
            EXPECT_GT(comp, 0.0);
            EXPECT_TRUE(std::isfinite(comp));
            RecordProperty("ratio_eps" + std::to_string(e) + "_S" + std::to_string(S), std::to_string(comp / closed));
        }
}

TEST(ComparisonTable, SevenRowsWithFinitePdqlRow) {
    const auto report = comparison_bounds({0.01, 0.001, 0.9, 1000, 4});
    const std::vector<std::string> ids{"delayed_q", "speedy_q", "vrql", "q_ucb", "ucb_multistage", "phased_q", "pdql"};
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(report.rows[i].id, ids[i]);
    const auto* pdql = report.find("pdql");
    ASSERT_NE(pdql, nullptr);
    EXPECT_TRUE(std::isfinite(pdql->value));
    EXPECT_GT(pdql->value, 0.0);
    EXPECT_FALSE(pdql->saturated());
    EXPECT_NEAR(pdql->value, pdql_total_bound({0.01, 0.001, 0.9, 1000, 4}), 1e-6 * pdql->value);
    ASSERT_NE(report.find("q_lower_bound"), nullptr);
    EXPECT_EQ(report.find("truncation_radius")->value, 66.0);
    EXPECT_EQ(report.find("overlap_bound")->value, 2902.0);
    EXPECT_EQ(report.find("submdp_count_bound")->flags, "clamped-to-1");
    EXPECT_EQ(report.find("submdp_size_bound")->flags, "exceeds-S");
}

TEST(ComparisonTable, DelayedQOverPdqlGrowsWithInverseEpsilon) {
    double prev = 0.0;
    for (double e : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        const auto rows = comparison_rows({e, 0.001, 0.9, 1000, 4});
        const double ratio = rows[0].value / rows[6].value;
        EXPECT_GT(ratio, prev);
        prev = ratio;
    }
}

TEST(ComparisonTable, PrefactorsLinearInA) {
    for (std::uint64_t A : {1u, 2u, 4u}) {
        const auto a = comparison_rows({0.05, 0.01, 0.9, 100, A});
        const auto b = comparison_rows({0.05, 0.01, 0.9, 100, 3 * A});
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i].prefactor / a[i].prefactor, 3.0, 1e-12) << a[i].id;
    }
}

TEST(ComparisonTable, OverlapTailBothForms) {
    const auto report = comparison_bounds({0.01, 0.001, 0.9, 1000, 4});
    const double sq = report.find("overlap_tail_squared")->value;
    const double unsq = report.find("overlap_tail_unsquared")->value;
    EXPECT_GT(sq, 0.0);
    EXPECT_LE(sq, 1.0);
    EXPECT_GT(unsq, 0.0);
    EXPECT_LE(unsq, 1.0);
}

TEST(BoundGrid, PositiveAndFinite) {
    for_grid([](const BoundInputs& in) {
        EXPECT_GE(q_lower_bound(in), 1u);
        EXPECT_GE(overlap_bound(in), 1u);
        EXPECT_GE(submdp_count_bound(in), 1u);
        EXPECT_GE(delayed_q_batch_size(in), 1u);
        const double t = pdql_total_bound(in);
        EXPECT_TRUE(std::isfinite(t) && t > 0.0);
        const double n = naive_total_bound(in);
        EXPECT_TRUE(std::isfinite(n) && n > 0.0);
        for (const auto& row : comparison_rows(in))
            if (!row.saturated()) {
                EXPECT_TRUE(std::isfinite(row.value) && row.value > 0.0) << row.id;
            }
    });
}

TEST(BoundGrid, MonotoneDirections) {
    using D = Direction;
    auto q = [](const BoundInputs& in) { return q_lower_bound(in); };
    auto overlap = [](const BoundInputs& in) { return overlap_bound(in); };
    auto count = [](const BoundInputs& in) { return submdp_count_bound(in); };
    auto sub = [](const BoundInputs& in) { return submdp_sample_complexity(in); };
    auto naive = [](const BoundInputs& in) { return naive_total_bound(in); };
    auto thm = [](const BoundInputs& in) { return pdql_total_bound(in); };
    auto dqlm = [](const BoundInputs& in) { return delayed_q_batch_size(in); };

    check_along(q, kEpsGrid, &BoundInputs::epsilon, D::down, "q/eps");
    check_along(q, kDeltaGrid, &BoundInputs::delta, D::down, "q/delta");
    check_along(q, kSGrid, &BoundInputs::num_states, D::up, "q/S");
    check_along(q, kAGrid, &BoundInputs::num_actions, D::up, "q/A");
    check_along(overlap, kEpsGrid, &BoundInputs::epsilon, D::down, "overlap/eps");
    check_along(overlap, kDeltaGrid, &BoundInputs::delta, D::down, "overlap/delta");
    check_along(overlap, kSGrid, &BoundInputs::num_states, D::up, "overlap/S");
    // The count divides by the ball-volume term, which grows with A.
    check_along(count, kDeltaGrid, &BoundInputs::delta, D::down, "count/delta");
    check_along(count, kSGrid, &BoundInputs::num_states, D::up, "count/S");
    check_along(count, kAGrid, &BoundInputs::num_actions, D::down, "count/A");
    check_along(sub, kEpsGrid, &BoundInputs::epsilon, D::down, "sub/eps");
    check_along(sub, kDeltaGrid, &BoundInputs::delta, D::down, "sub/delta");
    check_along(sub, kAGrid, &BoundInputs::num_actions, D::up, "sub/A");
    check_along(naive, kSGrid, &BoundInputs::num_states, D::up, "naive/S");
    check_along(thm, kEpsGrid, &BoundInputs::epsilon, D::down, "thm/eps");
    check_along(thm, kDeltaGrid, &BoundInputs::delta, D::down, "thm/delta");
    check_along(thm, kSGrid, &BoundInputs::num_states, D::up, "thm/S");
    check_along(thm, kAGrid, &BoundInputs::num_actions, D::up, "thm/A");
    check_along(dqlm, kEpsGrid, &BoundInputs::epsilon, D::down, "dqlm/eps");
    check_along(dqlm, kSGrid, &BoundInputs::num_states, D::up, "dqlm/S");
}
