#pragma once

// Benchmark harness: learner dispatch, concurrent sweeps with one oracle
// solve per environment, convergence records, aggregation and scaling fits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pdql/bounds.hpp"
#include "pdql/config.hpp"
#include "pdql/coverage.hpp"
#include "pdql/delayed_q.hpp"
#include "pdql/lattice.hpp"
#include "pdql/oracle.hpp"
#include "pdql/phased_q.hpp"
#include "pdql/qlearning.hpp"
#include "pdql/trace.hpp"
#include "pdql/vrql.hpp"

namespace pdql {

namespace detail {

template <class T>
T override_or(const nlohmann::ordered_json& o, const char* key, T fallback) {
    return o.contains(key) ? o.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Shared sample budget for one environment: multiplier x the overall bound
/// at the experiment's (eps, delta, gamma).
inline std::uint64_t shared_budget(const ExperimentConfig& cfg, const MdpSpec& spec, double multiplier) {
    const BoundInputs in{cfg.epsilon, cfg.delta, cfg.gamma, spec.num_states(), spec.num_actions()};
    return detail::saturating_budget(pdql_total_bound(in), multiplier);
}

/// Fully resolved PDQL / DQL parameters for one learner entry.
inline PdqlParams delayed_params(const LearnerSpec& l, const ExperimentConfig& cfg, const MdpSpec& spec) {
    const auto& o = l.overrides;
    const double eps = detail::override_or(o, "epsilon", cfg.epsilon);
    const double mult = detail::override_or(o, "budget_multiplier", cfg.budget_multiplier);
    const std::uint64_t S = spec.num_states(), A = spec.num_actions();
    PdqlParams p = l.name == "dql"
                       ? dql_params(eps, cfg.delta, cfg.gamma, S, A, mult, detail::override_or(o, "shared_q", false))
                       : default_params(eps, cfg.delta, cfg.gamma, S, A, mult);
    p.max_timesteps = detail::override_or(o, "max_timesteps", shared_budget(cfg, spec, mult));
    if (o.contains("q")) p.override_q(o.at("q").get<std::uint64_t>());
    if (o.contains("unlock_radius")) p.override_unlock_radius(o.at("unlock_radius").get<std::uint32_t>());
    p.audit = detail::override_or(o, "audit", false);
    p.rollout_estimate = detail::override_or(o, "rollout_estimate", false);
    p.trace = cfg.trace;
    return p;
}

inline RunTrace run_learner(const LearnerSpec& l, const ExperimentConfig& cfg, const MdpSpec& spec,
                            const ValueTable& oracle, std::uint64_t seed) {
    const auto& o = l.overrides;
    const std::uint64_t budget = shared_budget(cfg, spec, cfg.budget_multiplier);
    RunTrace trace;
    if (l.name == "pdql") {
        trace = pdql_run(spec, delayed_params(l, cfg, spec), oracle, seed);
    } else if (l.name == "dql") {
        trace = dql_run(spec, delayed_params(l, cfg, spec), oracle, seed);
    } else if (l.name == "qlearning") {
        QLearningParams p;
        p.gamma = cfg.gamma;
        p.exploration = detail::override_or(o, "exploration", p.exploration);
        p.lr_power = detail::override_or(o, "lr_power", p.lr_power);
        if (o.contains("lr")) p.constant_lr = o.at("lr").get<double>();
        if (o.contains("initial_value")) p.initial_value = o.at("initial_value").get<double>();
        p.budget = detail::override_or(o, "budget", std::min(budget, cfg.sample_cap));
        p.trace = cfg.trace;
        trace = qlearning_run(spec, p, oracle, seed);
    } else if (l.name == "pql") {
        PhasedQParams p;
        p.gamma = cfg.gamma;
        p.phase_length = detail::override_or(
            o, "phase_length", default_phase_length(cfg.epsilon, cfg.delta, cfg.gamma, spec.num_states(), spec.num_actions()));
        p.budget = detail::override_or(o, "budget", budget);
        p.max_phases = detail::override_or<std::uint64_t>(o, "max_phases", 2 * truncation_radius(cfg.epsilon, cfg.gamma));
        if (o.contains("initial_value")) p.initial_value = o.at("initial_value").get<double>();
        trace = pql_run(spec, p, oracle, seed);
    } else if (l.name == "vrql") {
        VrqlParams p;
        p.gamma = cfg.gamma;
        p.epochs = detail::override_or(o, "epochs", p.epochs);
        p.inner_iterations = detail::override_or(o, "inner_iterations", p.inner_iterations);
        p.recenter_base = detail::override_or(o, "recenter_base", p.recenter_base);
        p.recenter_growth = detail::override_or(o, "recenter_growth", p.recenter_growth);
        p.budget = detail::override_or(o, "budget", budget);
        if (o.contains("initial_value")) p.initial_value = o.at("initial_value").get<double>();
        p.trace = cfg.trace;
        trace = vrql_run(spec, p, oracle, seed);
    } else {
        throw ConfigError("unknown learner '" + l.name + "'");
    }
    trace.config_snapshot["label"] = l.label;
    return trace;
}

struct ConvergenceRecord {
    std::string learner;  ///< learner label
    std::size_t S = 0;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> samples_to_convergence;
    double final_mean_error = std::numeric_limits<double>::quiet_NaN();
    std::optional<std::uint64_t> all_locked_at;
    std::uint64_t timesteps = 0;
    std::string error;

    bool censored() const noexcept { return !samples_to_convergence.has_value(); }
};

inline ConvergenceRecord make_record(const std::string& label, std::size_t S, std::uint64_t seed, const RunTrace& trace,
                                     double epsilon) {
    ConvergenceRecord r;
    r.learner = label;
    r.S = S;
    r.seed = seed;
    r.samples_to_convergence = sustained_convergence(trace, epsilon);
    if (!trace.samples.empty()) r.final_mean_error = trace.samples.back().mean_error;
    r.all_locked_at = trace.converged_at;
    r.timesteps = trace.timesteps;
    return r;
}

/// One value-iteration solve per (S, env seed), counted.
class OracleCache {
public:
    const OptimalValues& get(const MdpSpec& spec, std::uint64_t env_seed, double tolerance) {
        const auto key = std::make_pair(spec.num_states(), env_seed);
        std::shared_ptr<Entry> entry;
        {
            std::lock_guard lock(mutex_);
            auto& slot = entries_[key];
            if (!slot) slot = std::make_shared<Entry>();
            entry = slot;
        }
        std::call_once(entry->once, [&] {
            entry->values = value_iteration(spec, tolerance);
            ++solves_;
        });
        return entry->values;
    }

    std::size_t solves() const noexcept { return solves_.load(); }

private:
    struct Entry {
        std::once_flag once;
        OptimalValues values;
    };
    std::mutex mutex_;
    std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<Entry>> entries_;
    std::atomic<std::size_t> solves_{0};
};

/// Per-cell learner seed, shared by every learner so paired runs see the
/// same stream family.
inline std::uint64_t cell_seed(std::uint64_t global_seed, std::size_t S, std::uint64_t seed) {
    return derive_seed(derive_seed(global_seed, S), seed);
}

/// Runs `f(i)` for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
        });
    for (auto& t : workers) t.join();
}

struct Environment {
    LatticeConfig config;
    MdpSpec spec;
};

struct ExperimentResult {
    std::vector<ConvergenceRecord> records;                ///< sorted by (learner order, S, seed)
    std::map<std::string, std::vector<RunTrace>> figure_b; ///< traces at S = figure_b_size, per label
    std::size_t figure_b_size = 0;
    std::size_t oracle_solves = 0;
    std::size_t num_actions = 0;
    nlohmann::ordered_json metadata;

    std::size_t converged() const {
        return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                      [](const auto& r) { return !r.censored(); }));
    }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline std::string trace_basename(const std::string& label, std::size_t S, std::uint64_t seed) {
    return label + "_" + std::to_string(S) + "_" + std::to_string(seed);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace detail

inline void write_records_csv(const std::vector<ConvergenceRecord>& records, std::ostream& out) {
    out << "learner,S,seed,samples_to_convergence,censored,final_mean_error,all_locked_at,timesteps,error\n";
    for (const auto& r : records) {
        out << detail::csv_field(r.learner) << ',' << r.S << ',' << r.seed << ',';
        if (r.samples_to_convergence) out << *r.samples_to_convergence;
        out << ',' << (r.censored() ? "true" : "false") << ',' << format_double(r.final_mean_error) << ',';
        if (r.all_locked_at) out << *r.all_locked_at;
        out << ',' << r.timesteps << ',' << detail::csv_field(r.error) << '\n';
    }
}

/// Parses the output of write_records_csv.
inline std::vector<ConvergenceRecord> read_records_csv(std::istream& in) {
    std::string line;
    std::getline(in, line);
    std::vector<ConvergenceRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                f.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        f.push_back(std::move(cur));
        if (f.size() != 9) throw StructuralError("records.csv row has " + std::to_string(f.size()) + " fields");
        ConvergenceRecord r;
        r.learner = f[0];
        r.S = std::stoul(f[1]);
        r.seed = std::stoull(f[2]);
        if (!f[3].empty()) r.samples_to_convergence = std::stoull(f[3]);
        r.final_mean_error = std::stod(f[5]);
        if (!f[6].empty()) r.all_locked_at = std::stoull(f[6]);
        r.timesteps = std::stoull(f[7]);
        r.error = f[8];
        out.push_back(std::move(r));
    }
    return out;
}

inline RunTrace read_trace_csv(std::istream& in) {
    RunTrace t;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c, d;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        std::getline(ss, d, ',');
        t.samples.push_back({std::stoull(a), std::stod(b), std::stod(c), std::stoull(d)});
    }
    if (!t.samples.empty()) t.timesteps = t.samples.back().timestep;
    return t;
}

/// Generates every environment, solves each oracle once, runs every
/// (learner, S, seed) cell on up to `jobs` threads and, when `write` is set,
/// writes records, summary, traces and config snapshot under output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1, bool write = true);

struct SummaryRow {
    std::string learner;
    std::size_t S = 0;
    std::optional<double> mean_samples;  ///< empty when every seed was censored
    double std_samples = 0.0;
    std::size_t n = 0;
    std::size_t n_censored = 0;
};

/// Mean and sample standard deviation of samples-to-convergence over the
/// converged seeds of each (learner, S); learner order follows first appearance.
inline std::vector<SummaryRow> aggregate(const std::vector<ConvergenceRecord>& records) {
    std::vector<std::string> order;
    std::map<std::pair<std::string, std::size_t>, std::vector<const ConvergenceRecord*>> groups;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.learner) == order.end()) order.push_back(r.learner);
        groups[{r.learner, r.S}].push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& learner : order)
        for (const auto& [key, group] : groups) {
            if (key.first != learner) continue;
            SummaryRow row{learner, key.second, std::nullopt, 0.0, group.size(), 0};
            std::vector<double> xs;
            for (const auto* r : group) {
                if (r->censored()) {
                    ++row.n_censored;
                } else {
                    xs.push_back(static_cast<double>(*r->samples_to_convergence));
                }
            }
            if (!xs.empty()) {
                double mean = 0.0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                double ss = 0.0;
                for (double x : xs) ss += (x - mean) * (x - mean);
                row.mean_samples = mean;
                row.std_samples = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
            }
            out.push_back(std::move(row));
        }
    return out;
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
    out << "learner,S,mean_samples,std_samples,n_censored\n";
    for (const auto& r : rows) {
        out << detail::csv_field(r.learner) << ',' << r.S << ',';
        if (r.mean_samples) {
            out << format_double(*r.mean_samples) << ',' << format_double(r.std_samples);
        } else {
            out << "censored,censored";
        }
        out << ',' << r.n_censored << '\n';
    }
}

enum class ScalingModel { SAlogA, SAlogSA };

inline const char* model_name(ScalingModel m) { return m == ScalingModel::SAlogA ? "SAlogA" : "SAlogSA"; }

inline double scaling_feature(ScalingModel m, double S, double A) {
    return m == ScalingModel::SAlogA ? S * A * std::log(A) : S * A * std::log(S * A);
}

struct ModelFit {
    ScalingModel model = ScalingModel::SAlogA;
    double coefficient = 0.0;  ///< c in mean_samples = c x feature
    double residual_norm = 0.0;
    double relative_residual = 0.0;  ///< residual_norm / ||y||
};

struct FitReport {
    std::string learner;
    std::vector<std::size_t> sizes;
    ModelFit salog_a;
    ModelFit salog_sa;

    ScalingModel better() const {
        return salog_a.residual_norm <= salog_sa.residual_norm ? ScalingModel::SAlogA : ScalingModel::SAlogSA;
    }
};

/// One-parameter least squares through the origin of mean_samples against
/// c S A ln A and c S A ln(SA), for one learner's uncensored sizes.
inline FitReport fit_scaling(const std::vector<SummaryRow>& summary, const std::string& learner, std::size_t A) {
    FitReport rep;
    rep.learner = learner;
    std::vector<double> S, y;
    for (const auto& r : summary)
        if (r.learner == learner && r.mean_samples) {
            rep.sizes.push_back(r.S);
            S.push_back(static_cast<double>(r.S));
            y.push_back(*r.mean_samples);
        }
    if (rep.sizes.size() < 3)
        throw InsufficientData("fit_scaling needs at least 3 uncensored sizes for '" + learner + "', got " +
                               std::to_string(rep.sizes.size()));
    double yy = 0.0;
    for (double v : y) yy += v * v;
    auto fit = [&](ScalingModel m) {
        ModelFit f;
        f.model = m;
        double xy = 0.0, xx = 0.0;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double x = scaling_feature(m, S[i], static_cast<double>(A));
            xy += x * y[i];
            xx += x * x;
        }
        if (!(xx > 0.0)) throw InsufficientData("scaling feature vanishes (A = 1 makes S A ln A zero)");
        f.coefficient = xy / xx;
        double rr = 0.0;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double e = y[i] - f.coefficient * scaling_feature(m, S[i], static_cast<double>(A));
            rr += e * e;
        }
        f.residual_norm = std::sqrt(rr);
        f.relative_residual = yy > 0.0 ? f.residual_norm / std::sqrt(yy) : 0.0;
        return f;
    };
    rep.salog_a = fit(ScalingModel::SAlogA);
    rep.salog_sa = fit(ScalingModel::SAlogSA);
    return rep;
}

inline nlohmann::ordered_json to_json(const FitReport& r) {
    auto one = [](const ModelFit& f) {
        return nlohmann::ordered_json{{"coefficient", f.coefficient},
                                      {"residual_norm", f.residual_norm},
                                      {"relative_residual", f.relative_residual}};
    };
    return {{"learner", r.learner},
            {"sizes", r.sizes},
            {"SAlogA", one(r.salog_a)},
            {"SAlogSA", one(r.salog_sa)},
            {"better", model_name(r.better())}};
}

// ---------------------------------------------------------------------------

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs, bool write) {
    cfg.check();
    ExperimentResult result;
    result.figure_b_size = cfg.figure_b_size;

    std::vector<Environment> envs;
    for (auto& lc : cfg.environments()) envs.push_back({lc, make_lattice(lc, cfg.gamma)});
    result.num_actions = envs.front().spec.num_actions();

    OracleCache oracles;
    parallel_for(envs.size(), jobs, [&](std::size_t i) {
        oracles.get(envs[i].spec, envs[i].config.seed, cfg.oracle_tolerance);
    });

    struct Cell {
        std::size_t learner, env;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t l = 0; l < cfg.learners.size(); ++l)
        for (std::size_t e = 0; e < envs.size(); ++e)
            for (auto seed : cfg.seeds) cells.push_back({l, e, seed});

    namespace fs = std::filesystem;
    const fs::path root(cfg.output_dir);
    if (write) fs::create_directories(root / "traces");

    result.records.resize(cells.size());
    std::vector<std::optional<RunTrace>> kept(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const auto& c = cells[i];
        const auto& l = cfg.learners[c.learner];
        const auto& env = envs[c.env];
        const std::size_t S = env.spec.num_states();
        try {
            const auto& oracle = oracles.get(env.spec, env.config.seed, cfg.oracle_tolerance);
            RunTrace trace = run_learner(l, cfg, env.spec, oracle.v, cell_seed(cfg.global_seed, S, c.seed));
            trace.config_snapshot["S"] = S;
            trace.config_snapshot["run_seed"] = c.seed;
            result.records[i] = make_record(l.label, S, c.seed, trace, cfg.epsilon);
            if (write) {
                const auto base = root / "traces" / detail::trace_basename(l.label, S, c.seed);
                write_trace_csv(trace, base.string() + ".csv");
                detail::write_text(base.string() + ".json", trace.config_snapshot.dump(2) + "\n");
            }
            if (S == cfg.figure_b_size) kept[i] = std::move(trace);
        } catch (const std::exception& e) {
            ConvergenceRecord r;
            r.learner = l.label;
            r.S = S;
            r.seed = c.seed;
            r.error = e.what();
            result.records[i] = std::move(r);
        }
    });
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (kept[i]) result.figure_b[cfg.learners[cells[i].learner].label].push_back(std::move(*kept[i]));
    result.oracle_solves = oracles.solves();

    auto& meta = result.metadata;
    meta["experiment"] = cfg.to_json();
    nlohmann::ordered_json env_meta = nlohmann::ordered_json::array();
    for (const auto& env : envs) {
        nlohmann::ordered_json e;
        e["S"] = env.spec.num_states();
        e["A"] = env.spec.num_actions();
        e["dims"] = env.config.dims;
        e["env_seed"] = env.config.seed;
        const auto& o = oracles.get(env.spec, env.config.seed, cfg.oracle_tolerance);
        e["oracle_iterations"] = o.iterations;
        double mean_v = 0.0;
        for (double v : o.v.values()) mean_v += v;
        e["oracle_mean_value"] = mean_v / static_cast<double>(env.spec.num_states());
        e["coverage"] = plan_centers(env.spec, cfg.epsilon, cfg.delta).to_json();
        env_meta.push_back(std::move(e));
    }
    meta["environments"] = std::move(env_meta);
    meta["oracle_solves"] = result.oracle_solves;

    if (write) {
        std::ostringstream rec, sum;
        write_records_csv(result.records, rec);
        write_summary_csv(aggregate(result.records), sum);
        detail::write_text(root / "records.csv", rec.str());
        detail::write_text(root / "summary.csv", sum.str());
        detail::write_text(root / "config.json", meta.dump(2) + "\n");
    }
    return result;
}

}  // namespace pdql
