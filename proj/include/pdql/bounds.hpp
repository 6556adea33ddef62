#pragma once

// Closed-form sample-complexity and sampling-parameter calculators.
//
// All values are O~-evaluations with asymptotic constants taken as 1 and
// natural logarithms throughout. "log_gamma^A" is read as
// (log_gamma(eps (1 - gamma)))^A.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pdql/coverage.hpp"
#include "pdql/errors.hpp"
#include "pdql/submdp.hpp"

namespace pdql {

struct BoundInputs {
    double epsilon = 0.01;
    double delta = 0.001;
    double gamma = 0.9;
    std::uint64_t num_states = 1;
    std::uint64_t num_actions = 1;

    void check() const {
        detail::require_unit_interval(epsilon, "epsilon");
        detail::require_unit_interval(delta, "delta");
        detail::require_unit_interval(gamma, "gamma");
        if (num_states == 0) throw DomainError("S must be positive");
        if (num_actions == 0) throw DomainError("A must be positive");
    }

    double S() const { return static_cast<double>(num_states); }
    double A() const { return static_cast<double>(num_actions); }
};

/// (log_gamma(eps (1 - gamma)))^A, the sub-MDP size term.
inline double radius_term(const BoundInputs& in) {
    return std::pow(truncation_log(in.epsilon, in.gamma), in.A());
}

struct IntegerBound {
    std::uint64_t value = 1;
    bool saturated = false;
    double raw = 0.0;
};

/// Batch size q for which a batch mean stays within eps of its expectation
/// for every update attempt with confidence 1 - delta:
///   ln((2SA/eps) ln(2/delta) (1/B + A/(eps(1-gamma)))) / (2 eps^2 (1-gamma)^2).
inline IntegerBound q_lower_bound_detail(const BoundInputs& in) {
    in.check();
    const double e = in.epsilon, g = in.gamma;
    const double inner = (2.0 * in.S() * in.A() / e) * std::log(2.0 / in.delta) *
                         (1.0 / radius_term(in) + in.A() / (e * (1.0 - g)));
    IntegerBound out;
    if (!(inner > 1.0)) {
        out.saturated = true;
        return out;
    }
    out.raw = std::log(inner) / (2.0 * e * e * (1.0 - g) * (1.0 - g));
    const double c = detail::ceil_tol(out.raw);
    if (c >= 9.0e18) {
        out.value = std::numeric_limits<std::uint64_t>::max();
        out.saturated = true;
    } else {
        out.value = static_cast<std::uint64_t>(std::max(1.0, c));
    }
    return out;
}

inline std::uint64_t q_lower_bound(const BoundInputs& in) { return q_lower_bound_detail(in).value; }

/// ceil((2 / eps) ln(2 S / delta)).
inline std::uint64_t overlap_bound(const BoundInputs& in) {
    in.check();
    return overlap_requirement(in.epsilon, in.delta, in.num_states);
}

/// max(1, ceil((2 S / (eps B)) ln(2 / delta))).
inline IntegerBound submdp_count_bound_detail(const BoundInputs& in) {
    in.check();
    IntegerBound out;
    out.raw = (2.0 * in.S() / (in.epsilon * radius_term(in))) * std::log(2.0 / in.delta);
    out.value = static_cast<std::uint64_t>(std::max(1.0, detail::ceil_tol(out.raw)));
    out.saturated = out.raw < 1.0;
    return out;
}

inline std::uint64_t submdp_count_bound(const BoundInputs& in) { return submdp_count_bound_detail(in).value; }

/// (A B / (eps^2 (1-gamma)^3)) ln(A B / (delta (1-gamma))) ln(1/eps).
inline double submdp_sample_complexity(const BoundInputs& in) {
    in.check();
    const double ab = in.A() * radius_term(in);
    const double g1 = 1.0 - in.gamma;
    return ab / (in.epsilon * in.epsilon * g1 * g1 * g1) * std::log(ab / (in.delta * g1)) * std::log(1.0 / in.epsilon);
}

/// One sub-MDP per state: S x submdp_sample_complexity.
inline double naive_total_bound(const BoundInputs& in) { return in.S() * submdp_sample_complexity(in); }

/// (SA / (eps^3 (1-gamma)^3)) ln(A / (delta (1-gamma))) ln(1/eps) ln(1/delta).
inline double pdql_total_bound(const BoundInputs& in) {
    in.check();
    const double g1 = 1.0 - in.gamma;
    const double e = in.epsilon;
    return in.S() * in.A() / (e * e * e * g1 * g1 * g1) * std::log(in.A() / (in.delta * g1)) * std::log(1.0 / e) *
           std::log(1.0 / in.delta);
}

/// submdp_count_bound x submdp_sample_complexity (unrounded count).
inline double pdql_total_compositional(const BoundInputs& in) {
    return submdp_count_bound_detail(in).raw * submdp_sample_complexity(in);
}

/// Delayed Q-learning batch size with its published schedule
///   m = ln(3 S A (1 + S A kappa) / delta) / (2 eps^2 (1-gamma)^2), kappa = 1/((1-gamma) eps).
inline std::uint64_t delayed_q_batch_size(const BoundInputs& in) {
    in.check();
    const double sa = in.S() * in.A();
    const double g1 = 1.0 - in.gamma;
    const double kappa = 1.0 / (g1 * in.epsilon);
    const double m = std::log(3.0 * sa * (1.0 + sa * kappa) / in.delta) / (2.0 * in.epsilon * in.epsilon * g1 * g1);
    return static_cast<std::uint64_t>(std::max(1.0, std::min(9.0e18, detail::ceil_tol(m))));
}

/// One evaluated row: value = prefactor x log_factor.
struct BoundRow {
    std::string id;
    double prefactor = 0.0;   ///< polynomial part, linear in S A
    double log_factor = 1.0;  ///< product of the logarithmic terms
    double value = 0.0;
    std::string formula;
    std::string flags;

    bool saturated() const { return !flags.empty(); }
};

namespace detail {

inline BoundRow make_row(std::string id, double prefactor, double log_factor, std::string formula) {
    BoundRow row{std::move(id), prefactor, log_factor, prefactor * log_factor, std::move(formula), ""};
    if (!(log_factor > 0.0)) row.flags = "nonpositive-log-factor";
    if (!std::isfinite(row.value)) row.flags = "overflow";
    return row;
}

}  // namespace detail

/// The seven comparison rows for model-free PAC-MDP learners.
inline std::vector<BoundRow> comparison_rows(const BoundInputs& in) {
    in.check();
    const double S = in.S(), A = in.A(), e = in.epsilon, d = in.delta, g1 = 1.0 - in.gamma;
    const double sa = S * A;
    using std::log;
    using std::pow;
    std::vector<BoundRow> rows;
    rows.push_back(detail::make_row("delayed_q", sa / (pow(e, 4) * pow(g1, 8)),
                                    log(sa / (d * e * g1)) * log(1 / d) * log(1 / (e * g1)),
                                    "SA/(e^4(1-g)^8) ln(SA/(d e (1-g))) ln(1/d) ln(1/(e(1-g)))"));
    rows.push_back(detail::make_row("speedy_q", sa / (pow(e, 2) * pow(g1, 4)), log(sa / d),
                                    "SA/(e^2(1-g)^4) ln(SA/d)"));
    rows.push_back(detail::make_row("vrql", sa / (pow(e, 2) * pow(g1, 3)), log(sa / (d * g1)) * log(1 / e),
                                    "SA/(e^2(1-g)^3) ln(SA/(d(1-g))) ln(1/e)"));
    rows.push_back(detail::make_row("q_ucb", sa / (pow(e, 2) * pow(g1, 7)),
                                    log(sa) * log(1 / d) * log(1 / e) * log(1 / g1),
                                    "SA/(e^2(1-g)^7) ln(SA) ln(1/d) ln(1/e) ln(1/(1-g))"));
    rows.push_back(detail::make_row("ucb_multistage", sa / (pow(e, 2) * pow(g1, 5.5)),
                                    log(sa) * log(1 / d) * log(1 / (e * g1)),
                                    "SA/(e^2(1-g)^5.5) ln(SA) ln(1/d) ln(1/(e(1-g)))"));
    rows.push_back(detail::make_row("phased_q", sa / pow(e, 2), log((sa / d) * log(1 / e)) * log(1 / e),
                                    "SA/e^2 ln((SA/d) ln(1/e)) ln(1/e)"));
    rows.push_back(detail::make_row("pdql", sa / (pow(e, 3) * pow(g1, 3)),
                                    log(A / (d * g1)) * log(1 / e) * log(1 / d),
                                    "SA/(e^3(1-g)^3) ln(A/(d(1-g))) ln(1/e) ln(1/d)"));
    return rows;
}

struct BoundReport {
    BoundInputs inputs;
    std::vector<BoundRow> rows;
    std::vector<std::string> interpretation;

    const BoundRow* find(std::string_view id) const {
        for (const auto& r : rows)
            if (r.id == id) return &r;
        return nullptr;
    }
};

/// Table rows plus every sampling-parameter and sub-MDP expression.
inline BoundReport comparison_bounds(const BoundInputs& in) {
    BoundReport report{in, comparison_rows(in),
                       {"O~-evaluations, constants suppressed", "natural logarithms",
                        "log_gamma^A read as (log_gamma(eps(1-gamma)))^A"}};
    auto scalar = [&](std::string id, double value, std::string formula, std::string flags = "") {
        report.rows.push_back({std::move(id), value, 1.0, value, std::move(formula), std::move(flags)});
    };
    const auto q = q_lower_bound_detail(in);
    scalar("q_lower_bound", static_cast<double>(q.value),
           "ceil(ln((2SA/e) ln(2/d) (1/B + A/(e(1-g)))) / (2 e^2 (1-g)^2))", q.saturated ? "saturated" : "");
    scalar("overlap_bound", static_cast<double>(overlap_bound(in)), "ceil((2/e) ln(2S/d))");
    const auto count = submdp_count_bound_detail(in);
    scalar("submdp_count_bound", static_cast<double>(count.value), "max(1, ceil((2S/(e B)) ln(2/d)))",
           count.saturated ? "clamped-to-1" : "");
    const auto size = submdp_size_bound(in.epsilon, in.gamma, static_cast<std::uint32_t>(in.num_actions), in.num_states);
    scalar("submdp_size_bound", size.raw, "(log_g(e(1-g)))^A", size.exceeds ? "exceeds-S" : "");
    scalar("submdp_sample_complexity", submdp_sample_complexity(in), "(AB/(e^2(1-g)^3)) ln(AB/(d(1-g))) ln(1/e)");
    scalar("naive_total_bound", naive_total_bound(in), "S (AB/(e^2(1-g)^3)) ln(AB/(d(1-g))) ln(1/e)");
    scalar("pdql_total_compositional", pdql_total_compositional(in), "submdp_count x submdp_sample_complexity");
    scalar("truncation_radius", truncation_radius(in.epsilon, in.gamma), "ceil(log_g(e(1-g)))");
    scalar("coverage_radius", coverage_radius(in.gamma), "ceil(log_g 0.5)");
    scalar("dql_batch_size", static_cast<double>(delayed_q_batch_size(in)),
           "ceil(ln(3SA(1+SA k)/d) / (2 e^2 (1-g)^2)), k = 1/(e(1-g))");
    // Overlap tail at N = overlap_bound with per-estimate error 2e, both forms.
    const double n = static_cast<double>(overlap_bound(in));
    const double e = in.epsilon;
    scalar("overlap_tail_squared", std::min(1.0, 2.0 * std::exp(-2.0 * n * n * e * e / (n * 16.0 * e * e))),
           "2 exp(-2N^2e^2 / sum (2e_i)^2), e_i = 2e");
    scalar("overlap_tail_unsquared", std::min(1.0, 2.0 * std::exp(-2.0 * n * n * e * e / (n * 4.0 * e))),
           "2 exp(-2N^2e^2 / sum 2e_i), e_i = 2e");
    return report;
}

}  // namespace pdql
