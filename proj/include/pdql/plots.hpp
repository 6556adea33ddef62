#pragma once

// Deterministic SVG figures: (a) samples-to-convergence against S per
// learner with error bars, (b) mean error against timestep for one S.
// Output depends only on the inputs: fixed number formatting, stable series
// order and no timestamps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pdql/experiment.hpp"
#include "pdql/trace.hpp"

namespace pdql {

namespace svg {

inline constexpr int kWidth = 720;
inline constexpr int kHeight = 480;
inline constexpr int kLeft = 90;
inline constexpr int kRight = 170;
inline constexpr int kTop = 40;
inline constexpr int kBottom = 60;

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return palette[i % 8];
}

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

inline std::string label(double x) {
    char buf[32];
    if (x != 0.0 && (std::abs(x) >= 1e5 || std::abs(x) < 1e-2)) {
        std::snprintf(buf, sizeof buf, "%.1e", x);
    } else {
        std::snprintf(buf, sizeof buf, "%.4g", x);
    }
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Maps data to pixels on a linear or log10 axis.
struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    double px_lo = 0.0, px_hi = 1.0;

    double map(double v) const {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double x = log ? std::log10(std::max(v, lo)) : v;
        const double f = b > a ? (x - a) / (b - a) : 0.5;
        return px_lo + f * (px_hi - px_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
                const double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) out.push_back(v);
            }
            if (out.size() < 2) out = {lo, hi};
            return out;
        }
        for (int i = 0; i <= 5; ++i) out.push_back(lo + (hi - lo) * i / 5.0);
        return out;
    }
};

struct Series {
    std::string name;
    std::vector<double> x, y, err;
};

inline std::string render(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series, bool logx, bool logy, double hline = NAN,
                          const std::string& hline_label = "") {
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
           std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " + std::to_string(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           escape(title) + "</text>\n";

    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (logx && !(s.x[i] > 0)) continue;
            const double e = s.err.empty() ? 0.0 : s.err[i];
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, logy ? s.y[i] : s.y[i] - e);
            yhi = std::max(yhi, s.y[i] + e);
        }
    if (std::isfinite(hline)) {
        ylo = std::min(ylo, hline);
        yhi = std::max(yhi, hline);
    }
    const bool empty = !(xlo <= xhi);
    if (empty) {
        xlo = logx ? 1.0 : 0.0;
        xhi = logx ? 10.0 : 1.0;
        ylo = logy ? 1.0 : 0.0;
        yhi = logy ? 10.0 : 1.0;
    }
    if (logy && !(ylo > 0)) ylo = yhi > 0 ? yhi * 1e-3 : 1.0;
    if (xhi == xlo) {
        xlo = logx ? xlo / 2 : xlo - 1;
        xhi = logx ? xhi * 2 : xhi + 1;
    }
    if (yhi == ylo) {
        ylo = logy ? ylo / 2 : ylo - 1;
        yhi = logy ? yhi * 2 : yhi + 1;
    }
    if (!logy) {
        const double pad = 0.05 * (yhi - ylo);
        ylo -= pad;
        yhi += pad;
    }
    const Axis ax{xlo, xhi, logx, double(kLeft), double(kWidth - kRight)};
    const Axis ay{ylo, yhi, logy, double(kHeight - kBottom), double(kTop)};

    // frame and ticks
    out += "<rect x=\"" + std::to_string(kLeft) + "\" y=\"" + std::to_string(kTop) + "\" width=\"" +
           std::to_string(kWidth - kLeft - kRight) + "\" height=\"" + std::to_string(kHeight - kTop - kBottom) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const auto x = num(ax.map(t));
        out += "<line x1=\"" + x + "\" y1=\"" + std::to_string(kHeight - kBottom) + "\" x2=\"" + x + "\" y2=\"" +
               std::to_string(kHeight - kBottom + 5) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + x + "\" y=\"" + std::to_string(kHeight - kBottom + 19) + "\" text-anchor=\"middle\">" +
               label(t) + "</text>\n";
    }
    for (double t : ay.ticks()) {
        const auto y = num(ay.map(t));
        out += "<line x1=\"" + std::to_string(kLeft - 5) + "\" y1=\"" + y + "\" x2=\"" + std::to_string(kLeft) +
               "\" y2=\"" + y + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + std::to_string(kLeft - 8) + "\" y=\"" + y + "\" text-anchor=\"end\" dy=\"4\">" +
               label(t) + "</text>\n";
    }
    out += "<text x=\"" + std::to_string((kLeft + kWidth - kRight) / 2) + "\" y=\"" + std::to_string(kHeight - 15) +
           "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
    out += "<text x=\"18\" y=\"" + std::to_string((kTop + kHeight - kBottom) / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " + std::to_string((kTop + kHeight - kBottom) / 2) +
           ")\">" + escape(ylabel) + "</text>\n";

    if (empty) {
        out += "<text x=\"" + std::to_string((kLeft + kWidth - kRight) / 2) + "\" y=\"" +
               std::to_string((kTop + kHeight - kBottom) / 2) + "\" text-anchor=\"middle\" fill=\"gray\">no data</text>\n";
    }
    if (std::isfinite(hline) && !empty) {
        const auto y = num(ay.map(hline));
        out += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + y + "\" x2=\"" + std::to_string(kWidth - kRight) +
               "\" y2=\"" + y + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
        out += "<text x=\"" + std::to_string(kWidth - kRight - 4) + "\" y=\"" + y +
               "\" text-anchor=\"end\" dy=\"-4\" fill=\"gray\">" + escape(hline_label) + "</text>\n";
    }

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        out += "<g class=\"series\" data-name=\"" + escape(s.name) + "\" stroke=\"" + color(k) + "\" fill=\"" +
               color(k) + "\">\n";
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (logx && !(s.x[i] > 0)) continue;
            pts += (pts.empty() ? "" : " ") + num(ax.map(s.x[i])) + "," + num(ay.map(s.y[i]));
        }
        out += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (!s.err.empty())
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const auto x = num(ax.map(s.x[i]));
                const double lo = logy ? std::max(s.y[i] - s.err[i], ylo) : s.y[i] - s.err[i];
                out += "<line x1=\"" + x + "\" y1=\"" + num(ay.map(lo)) + "\" x2=\"" + x + "\" y2=\"" +
                       num(ay.map(s.y[i] + s.err[i])) + "\"/>\n";
                out += "<circle cx=\"" + x + "\" cy=\"" + num(ay.map(s.y[i])) + "\" r=\"3\"/>\n";
            }
        out += "</g>\n";
        const int ly = kTop + 14 + static_cast<int>(k) * 18;
        const int lx = kWidth - kRight + 12;
        out += "<line x1=\"" + std::to_string(lx) + "\" y1=\"" + std::to_string(ly - 4) + "\" x2=\"" +
               std::to_string(lx + 18) + "\" y2=\"" + std::to_string(ly - 4) + "\" stroke=\"" + color(k) +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + std::to_string(lx + 24) + "\" y=\"" + std::to_string(ly) + "\">" + escape(s.name) +
               "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace svg

/// Figure (a): one series per learner with uncensored sizes.
inline std::string figure_a_svg(const std::vector<ConvergenceRecord>& records) {
    std::vector<svg::Series> series;
    for (const auto& row : aggregate(records)) {
        if (!row.mean_samples) continue;
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.name == row.learner; });
        if (it == series.end()) {
            series.push_back({row.learner, {}, {}, {}});
            it = series.end() - 1;
        }
        it->x.push_back(static_cast<double>(row.S));
        it->y.push_back(*row.mean_samples);
        it->err.push_back(row.std_samples);
    }
    return svg::render("Samples to epsilon-optimality vs state-space size", "S (states)", "samples to convergence",
                       series, false, true);
}

/// Seed-averaged mean error on a shared log-spaced timestep grid; each trace
/// contributes its last value at or before each grid point.
inline svg::Series average_curve(const std::string& name, const std::vector<RunTrace>& traces, std::size_t points = 120) {
    svg::Series s{name, {}, {}, {}};
    std::uint64_t tmin = UINT64_MAX, tmax = 0;
    for (const auto& t : traces)
        for (const auto& p : t.samples)
            if (p.timestep > 0) {
                tmin = std::min(tmin, p.timestep);
                tmax = std::max(tmax, p.timestep);
            }
    if (tmax == 0) return s;
    const double a = std::log10(static_cast<double>(tmin)), b = std::log10(static_cast<double>(tmax));
    for (std::size_t k = 0; k < points; ++k) {
        const double x = std::pow(10.0, points > 1 ? a + (b - a) * static_cast<double>(k) / (points - 1) : b);
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& t : traces) {
            auto it = std::upper_bound(t.samples.begin(), t.samples.end(), x,
                                       [](double v, const TracePoint& p) { return v < static_cast<double>(p.timestep); });
            if (it == t.samples.begin()) continue;
            sum += std::prev(it)->mean_error;
            ++n;
        }
        if (n == 0) continue;
        s.x.push_back(x);
        s.y.push_back(sum / static_cast<double>(n));
    }
    return s;
}

/// Figure (b): mean error vs timestep per learner, with the epsilon line.
inline std::string figure_b_svg(const std::map<std::string, std::vector<RunTrace>>& traces,
                                const std::vector<std::string>& order, std::size_t S, double epsilon) {
    std::vector<svg::Series> series;
    for (const auto& name : order) {
        auto it = traces.find(name);
        if (it == traces.end()) continue;
        auto s = average_curve(name, it->second);
        if (!s.x.empty()) series.push_back(std::move(s));
    }
    return svg::render("Mean error vs samples, S = " + std::to_string(S), "timestep (samples)",
                       "mean error E[V - V*]", series, true, false, epsilon, "epsilon");
}

/// Writes plots/figure_a.svg and plots/figure_b.svg under `out`.
inline void emit_plots(const std::vector<ConvergenceRecord>& records,
                       const std::map<std::string, std::vector<RunTrace>>& traces, std::size_t figure_b_size,
                       double epsilon, const std::filesystem::path& out) {
    std::filesystem::create_directories(out / "plots");
    std::vector<std::string> order;
    for (const auto& r : records)
        if (std::find(order.begin(), order.end(), r.learner) == order.end()) order.push_back(r.learner);
    for (const auto& [name, _] : traces)
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    detail::write_text(out / "plots" / "figure_a.svg", figure_a_svg(records));
    detail::write_text(out / "plots" / "figure_b.svg", figure_b_svg(traces, order, figure_b_size, epsilon));
}

/// Rebuilds the figures from a finished output directory.
inline void emit_plots_from_dir(const std::filesystem::path& dir) {
    std::ifstream rec(dir / "records.csv");
    if (!rec) throw Error("no records.csv in " + dir.string());
    const auto records = read_records_csv(rec);
    std::ifstream cfg_in(dir / "config.json");
    if (!cfg_in) throw Error("no config.json in " + dir.string());
    const auto meta = nlohmann::ordered_json::parse(cfg_in);
    const auto& exp = meta.at("experiment");
    const std::size_t fb = exp.at("figure_b_size").get<std::size_t>();
    const double epsilon = exp.at("epsilon").get<double>();
    std::map<std::string, std::vector<RunTrace>> traces;
    for (const auto& r : records) {
        if (r.S != fb) continue;
        std::ifstream t(dir / "traces" / (detail::trace_basename(r.learner, r.S, r.seed) + ".csv"));
        if (t) traces[r.learner].push_back(read_trace_csv(t));
    }
    emit_plots(records, traces, fb, epsilon, dir);
}

}  // namespace pdql
