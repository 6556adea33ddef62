#pragma once

// Structural and metric checks on an MdpSpec: distributions, reward range,
// metric axioms, and unit-distance locality of the transition kernel.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "pdql/errors.hpp"
#include "pdql/mdp.hpp"
#include "pdql/random.hpp"

namespace pdql {

struct CheckResult {
    CheckResult() = default;
    explicit CheckResult(std::string check_name) : name(std::move(check_name)) {}

    std::string name;
    bool passed = true;
    std::uint64_t checked = 0;
    std::uint64_t violations = 0;
    std::string first_violation;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool metric_exhaustive = false;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    const CheckResult* find(std::string_view name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }

    std::vector<std::string> failed() const {
        std::vector<std::string> out;
        for (const auto& c : checks)
            if (!c.passed) out.push_back(c.name);
        return out;
    }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& c : checks) {
            os << (c.passed ? "pass " : "FAIL ") << c.name << " (" << c.checked << " checked, " << c.violations
               << " violations)";
            if (!c.passed) os << ": " << c.first_violation;
            os << '\n';
        }
        return os.str();
    }
};

class ValidationFailure : public Error {
public:
    explicit ValidationFailure(ValidationReport report)
        : Error(describe(report)), report_(std::move(report)) {}

    const ValidationReport& report() const noexcept { return report_; }

    bool violated(std::string_view name) const {
        const auto* c = report_.find(name);
        return c != nullptr && !c->passed;
    }

private:
    static std::string describe(const ValidationReport& r) {
        std::string msg = "MDP validation failed:";
        for (const auto& name : r.failed()) msg += " " + name;
        return msg;
    }

    ValidationReport report_;
};

namespace detail {

template <class Describe>
void record(CheckResult& c, bool ok, Describe&& where) {
    ++c.checked;
    if (!ok) {
        if (c.violations == 0) c.first_violation = where();
        ++c.violations;
        c.passed = false;
    }
}

}  // namespace detail

inline constexpr std::size_t kExhaustiveMetricLimit = 256;
inline constexpr double kDistributionTolerance = 1e-9;

/// Checks every invariant of an MdpSpec and returns the report, or throws
/// ValidationFailure (carrying the same report) if any check fails. Metric
/// axioms are exhaustive for S <= 256 and sampled on `sample_budget` random
/// triples above that; locality is always exhaustive.
inline ValidationReport validate_mdp(const MdpSpec& spec, std::uint64_t sample_budget = 20000, std::uint64_t seed = 0) {
    using detail::record;
    const std::size_t S = spec.num_states();
    const std::size_t A = spec.num_actions();
    ValidationReport report;

    CheckResult discount{"discount"};
    record(discount, spec.discount() > 0.0 && spec.discount() < 1.0,
           [&] { return "gamma=" + std::to_string(spec.discount()); });

    CheckResult distribution{"distribution"};
    CheckResult rewards{"reward_range"};
    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a) {
            double sum = 0.0;
            bool nonneg = true;
            for (const auto& succ : spec.successors(s, a)) {
                sum += succ.prob;
                nonneg = nonneg && succ.prob >= 0.0;
            }
            auto where = [&] { return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")"; };
            record(distribution, nonneg && std::abs(sum - 1.0) <= kDistributionTolerance,
                   [&] { return where() + " sums to " + std::to_string(sum); });
            const double r = spec.reward(s, a);
            record(rewards, r >= 0.0 && r <= 1.0, [&] { return where() + " reward " + std::to_string(r); });
        }

    // Metric axioms. Rows are cached per source so each check is O(1).
    const Metric& metric = spec.metric();
    CheckResult nonneg{"metric_nonnegativity"};
    CheckResult identity{"metric_identity"};
    CheckResult symmetry{"metric_symmetry"};
    CheckResult triangle{"metric_triangle"};
    constexpr double kSlack = 1e-9;
    auto check_pair = [&](StateId x, StateId y, double dxy, double dyx) {
        auto where = [&] { return "(" + std::to_string(x) + ", " + std::to_string(y) + ") d=" + std::to_string(dxy); };
        record(nonneg, dxy >= 0.0, where);
        record(identity, (x == y) == (dxy == 0.0), where);
        record(symmetry, std::abs(dxy - dyx) <= kSlack, where);
    };
    auto check_triangle = [&](StateId x, StateId y, StateId z, double dxz, double dxy, double dyz) {
        record(triangle, dxz <= dxy + dyz + kSlack, [&] {
            return "(" + std::to_string(x) + ", " + std::to_string(y) + ", " + std::to_string(z) + ")";
        });
    };

    if (S <= kExhaustiveMetricLimit) {
        report.metric_exhaustive = true;
        std::vector<std::vector<double>> d(S);
        for (StateId x = 0; x < S; ++x) d[x] = metric.distances_from(x);
        for (StateId x = 0; x < S; ++x)
            for (StateId y = 0; y < S; ++y) check_pair(x, y, d[x][y], d[y][x]);
        for (StateId x = 0; x < S; ++x)
            for (StateId y = 0; y < S; ++y)
                for (StateId z = 0; z < S; ++z) check_triangle(x, y, z, d[x][z], d[x][y], d[y][z]);
    } else {
        Rng rng(derive_seed(seed, 0x6d657472));
        for (std::uint64_t i = 0; i < sample_budget; ++i) {
            const auto x = static_cast<StateId>(rng.index(S));
            const auto y = static_cast<StateId>(rng.index(S));
            const auto z = static_cast<StateId>(rng.index(S));
            const double dxy = metric.distance(x, y), dyx = metric.distance(y, x);
            const double dyz = metric.distance(y, z), dxz = metric.distance(x, z);
            check_pair(x, y, dxy, dyx);
            check_pair(x, x, metric.distance(x, x), metric.distance(x, x));
            check_triangle(x, y, z, dxz, dxy, dyz);
        }
    }

    // Locality: nonzero-probability successors lie within unit distance, and
    // the unit neighborhood (other than s itself) has at most A states.
    CheckResult support{"locality_support"};
    CheckResult neighborhood{"locality_neighborhood"};
    for (StateId s = 0; s < S; ++s) {
        const auto row = metric.distances_from(s);
        std::uint64_t near = 0;
        for (StateId t = 0; t < S; ++t)
            if (t != s && row[t] <= 1.0) ++near;
        record(neighborhood, near <= A,
               [&] { return "state " + std::to_string(s) + " has " + std::to_string(near) + " neighbors"; });
        for (ActionId a = 0; a < A; ++a)
            for (const auto& succ : spec.successors(s, a))
                if (succ.prob > 0.0)
                    record(support, row[succ.next] <= 1.0, [&] {
                        return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ") reaches " +
                               std::to_string(succ.next) + " at distance " + std::to_string(row[succ.next]);
                    });
    }

    report.checks = {discount, distribution, rewards, nonneg, identity, symmetry, triangle, support, neighborhood};
    if (!report.ok()) throw ValidationFailure(report);
    return report;
}

}  // namespace pdql
