#pragma once

// Run traces: time-stamped mean error, locked fraction and update counts,
// plus the sampling schedule that decides when a point is taken.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdql/errors.hpp"

namespace pdql {

struct TracePoint {
    std::uint64_t timestep = 0;
    double mean_error = 0.0;
    double locked_fraction = 0.0;
    std::uint64_t updates = 0;

    bool operator==(const TracePoint&) const = default;
};

struct RunTrace {
    std::vector<TracePoint> samples;
    std::optional<std::uint64_t> converged_at;  ///< learner's own stopping event (all locked)
    bool budget_exhausted = false;
    std::uint64_t timesteps = 0;                ///< samples consumed in total
    nlohmann::ordered_json config_snapshot = nlohmann::ordered_json::object();

    const TracePoint& last() const {
        if (samples.empty()) throw EmptyInput("trace has no points");
        return samples.back();
    }
};

/// When to take trace points. Linear mode records at multiples of `stride`;
/// geometric mode records at stride * growth^k, which keeps traces short when
/// runs span many orders of magnitude. At most one point is kept per
/// learner step, so batched learners record at batch boundaries.
class TraceSchedule {
public:
    enum class Mode { linear, geometric };

    explicit TraceSchedule(std::uint64_t stride = 1000, Mode mode = Mode::linear, double growth = 1.1)
        : stride_(std::max<std::uint64_t>(stride, 1)), mode_(mode), growth_(growth), next_(stride_) {
        if (mode_ == Mode::geometric && !(growth_ > 1.0)) throw DomainError("geometric trace growth must exceed 1");
    }

    std::uint64_t stride() const noexcept { return stride_; }
    Mode mode() const noexcept { return mode_; }
    double growth() const noexcept { return growth_; }

    bool due(std::uint64_t t) const noexcept { return t >= next_; }

    /// Moves the next due time strictly past t.
    void advance(std::uint64_t t) {
        if (mode_ == Mode::linear) {
            next_ = (t / stride_ + 1) * stride_;
            return;
        }
        while (next_ <= t) {
            const double grown = std::ceil(static_cast<double>(next_) * growth_);
            next_ = grown >= 1.8e19 ? UINT64_MAX : std::max(next_ + 1, static_cast<std::uint64_t>(grown));
        }
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["trace_stride"] = stride_;
        j["trace_mode"] = mode_ == Mode::linear ? "linear" : "geometric";
        if (mode_ == Mode::geometric) j["trace_growth"] = growth_;
        return j;
    }

private:
    std::uint64_t stride_;
    Mode mode_;
    double growth_;
    std::uint64_t next_;
};

/// Appends points to a trace: one at t = 0, one whenever the schedule is due,
/// and a final one at the end of the run.
class TraceRecorder {
public:
    TraceRecorder(RunTrace& trace, TraceSchedule schedule) : trace_(trace), schedule_(schedule) {}

    template <class Probe>
    void start(Probe&& probe) {
        push(0, probe);
    }

    template <class Probe>
    void step(std::uint64_t t, Probe&& probe) {
        if (!schedule_.due(t)) return;
        push(t, probe);
        schedule_.advance(t);
    }

    template <class Probe>
    void finish(std::uint64_t t, Probe&& probe) {
        push(t, probe);
    }

private:
    template <class Probe>
    void push(std::uint64_t t, Probe& probe) {
        if (!trace_.samples.empty() && trace_.samples.back().timestep >= t) {
            if (trace_.samples.back().timestep == t) trace_.samples.back() = probe(t);
            return;
        }
        trace_.samples.push_back(probe(t));
    }

    RunTrace& trace_;
    TraceSchedule schedule_;
};

/// First traced timestep from which |mean_error| <= epsilon holds at every
/// later traced point. Empty when the last point misses.
inline std::optional<std::uint64_t> sustained_convergence(const RunTrace& trace, double epsilon) {
    std::optional<std::uint64_t> first;
    for (const auto& p : trace.samples) {
        if (std::abs(p.mean_error) <= epsilon) {
            if (!first) first = p.timestep;
        } else {
            first.reset();
        }
    }
    return first;
}

/// `%.17g` keeps doubles round-trippable and byte-stable.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_trace_csv(const RunTrace& trace, std::ostream& out) {
    out << "timestep,mean_error,locked_fraction,updates\n";
    for (const auto& p : trace.samples)
        out << p.timestep << ',' << format_double(p.mean_error) << ',' << format_double(p.locked_fraction) << ','
            << p.updates << '\n';
}

inline void write_trace_csv(const RunTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_trace_csv(trace, out);
}

}  // namespace pdql
