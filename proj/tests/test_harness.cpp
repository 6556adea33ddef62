#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pdql/config.hpp"
#include "pdql/experiment.hpp"
#include "pdql/plots.hpp"

using namespace pdql;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
[experiment]
epsilon = 0.05
delta = 0.05
gamma = 0.9
seeds = 2
trace_stride = 500

[env]
sizes = [12, 16]
slip_prob = 0.1
seed = 4

[env.reward]
random_goals = 1

[[learner]]
name = "qlearning"
budget = 30000

[[learner]]
name = "pql"
phase_length = 3
max_phases = 20
)";

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("pdql_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int error_line(const std::string& text) {
    try {
        parse_experiment_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

ConvergenceRecord record(const std::string& learner, std::size_t S, std::uint64_t seed,
                         std::optional<std::uint64_t> samples) {
    ConvergenceRecord r;
    r.learner = learner;
    r.S = S;
    r.seed = seed;
    r.samples_to_convergence = samples;
    r.final_mean_error = 0.01;
    r.timesteps = samples.value_or(1000);
    return r;
}

}  // namespace

TEST(ExperimentConfig, ParsesValidConfig) {
    const auto cfg = parse_experiment_config(kSmall);
    EXPECT_EQ(cfg.epsilon, 0.05);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1}));
    EXPECT_EQ(cfg.sizes, (std::vector<std::size_t>{12, 16}));
    ASSERT_EQ(cfg.learners.size(), 2u);
    EXPECT_EQ(cfg.learners[0].label, "qlearning");
    EXPECT_EQ(cfg.learners[1].overrides.at("phase_length").get<std::uint64_t>(), 3u);
    EXPECT_EQ(cfg.environments().size(), 2u);
}

TEST(ExperimentConfig, ExplicitSeedList) {
    std::string text = kSmall;
    text.replace(text.find("seeds = 2"), 9, "seeds = [5, 9]");
    EXPECT_EQ(parse_experiment_config(text).seeds, (std::vector<std::uint64_t>{5, 9}));
}

TEST(ExperimentConfig, MalformedTomlReportsLine) {
    EXPECT_EQ(error_line("[experiment]\nepsilon = 0.1\ngamma = = 0.9\n"), 3);
}

TEST(ExperimentConfig, UnknownKeyReportsItsLine) {
    std::string text = kSmall;
    text.replace(text.find("slip_prob"), 9, "slip_prop");
    const int line = error_line(text);
    std::istringstream in(text);
    std::string l;
    int n = 0, want = -1;
    while (std::getline(in, l)) {
        ++n;
        if (l.rfind("slip_prop", 0) == 0) want = n;
    }
    EXPECT_EQ(line, want);
}

TEST(ExperimentConfig, Rejections) {
    std::string unknown = kSmall;
    unknown.replace(unknown.find("\"pql\""), 5, "\"sarsa\"");
    EXPECT_GT(error_line(unknown), 0);

    std::string both = kSmall;
    both.replace(both.find("sizes = [12, 16]"), 16, "sizes = [12, 16]\ndims = [4, 4]");
    EXPECT_GT(error_line(both), 0);

    std::string zero_seeds = kSmall;
    zero_seeds.replace(zero_seeds.find("seeds = 2"), 9, "seeds = 0");
    EXPECT_GT(error_line(zero_seeds), 0);

    std::string wrong_type = kSmall;
    wrong_type.replace(wrong_type.find("epsilon = 0.05"), 14, "epsilon = \"small\"");
    EXPECT_GT(error_line(wrong_type), 0);

    std::string dup = kSmall;
    dup += "\n[[learner]]\nname = \"pql\"\n";
    EXPECT_THROW(parse_experiment_config(dup), ConfigError);

    EXPECT_THROW(parse_experiment_config("[experiment]\nepsilon = 0.1\n"), ConfigError);
}

TEST(RunExperiment, DeterministicLatticeConvergesWithPhasedQ) {
    const auto cfg = parse_experiment_config(R"(
[experiment]
epsilon = 0.05
delta = 0.05
gamma = 0.9
seeds = 1
trace_stride = 64
[env]
dims = [4, 4]
[env.reward]
goals = [{ cell = -1, reward = 1.0 }]
[[learner]]
name = "pql"
phase_length = 1
)");
    const auto result = run_experiment(cfg, 1, false);
    ASSERT_EQ(result.records.size(), 1u);
    const auto& r = result.records[0];
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_FALSE(r.censored());
    EXPECT_LE(std::abs(r.final_mean_error), cfg.epsilon);
    EXPECT_EQ(result.oracle_solves, 1u);
}

TEST(RunExperiment, ZeroBudgetCensorsEveryCell) {
    std::string text = kSmall;
    text.replace(text.find("gamma = 0.9"), 11, "gamma = 0.9\nbudget_multiplier = 0.0");
    text.replace(text.find("budget = 30000"), 14, "budget = 0");
    text += "\n[[learner]]\nname = \"pdql\"\n";
    auto cfg = parse_experiment_config(text);
    cfg.learners[1].overrides["budget"] = 0;
    const auto result = run_experiment(cfg, 1, false);
    EXPECT_EQ(result.records.size(), 3u * 2u * 2u);
    EXPECT_EQ(result.converged(), 0u);
    for (const auto& r : result.records) {
        EXPECT_TRUE(r.censored());
        EXPECT_TRUE(r.error.empty()) << r.error;
        EXPECT_EQ(r.timesteps, 0u);
    }
}

TEST(RunExperiment, RecordCountAndOracleSolves) {
    const auto cfg = parse_experiment_config(kSmall);
    const auto result = run_experiment(cfg, 1, false);
    EXPECT_EQ(result.records.size(), cfg.learners.size() * cfg.sizes.size() * cfg.seeds.size());
    EXPECT_EQ(result.oracle_solves, cfg.sizes.size());
    std::size_t censored = 0;
    for (const auto& r : result.records) censored += r.censored();
    std::size_t summed = 0;
    for (const auto& row : aggregate(result.records)) summed += row.n_censored;
    EXPECT_EQ(summed, censored);
}

TEST(RunExperiment, OutputsAreByteIdenticalAcrossRunsAndJobCounts) {
    auto cfg = parse_experiment_config(kSmall);
    const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
    cfg.output_dir = a.string();
    run_experiment(cfg, 1, true);
    cfg.output_dir = b.string();
    run_experiment(cfg, 1, true);
    cfg.output_dir = c.string();
    run_experiment(cfg, 2, true);
    for (const char* f : {"records.csv", "summary.csv"}) {
        const auto ref = slurp(a / f);
        EXPECT_FALSE(ref.empty());
        EXPECT_EQ(ref, slurp(b / f)) << f;
        EXPECT_EQ(ref, slurp(c / f)) << f;
    }
    for (const auto& entry : fs::directory_iterator(a / "traces")) {
        const auto name = entry.path().filename();
        EXPECT_EQ(slurp(entry.path()), slurp(c / "traces" / name)) << name;
    }
    std::ifstream in(a / "records.csv");
    const auto back = read_records_csv(in);
    std::ostringstream again;
    write_records_csv(back, again);
    EXPECT_EQ(again.str(), slurp(a / "records.csv"));
    EXPECT_TRUE(nlohmann::ordered_json::parse(slurp(a / "config.json")).contains("environments"));
}

TEST(RunExperiment, FailingCellIsCensoredWithMessage) {
    std::string text = kSmall;
    text += "\n[[learner]]\nname = \"pdql\"\nq = 0\n";
    const auto result = run_experiment(parse_experiment_config(text), 1, false);
    std::size_t failed = 0;
    for (const auto& r : result.records)
        if (r.learner == "pdql") {
            EXPECT_TRUE(r.censored());
            EXPECT_NE(r.error.find("q must be at least 1"), std::string::npos);
            ++failed;
        } else {
            EXPECT_TRUE(r.error.empty());
        }
    EXPECT_EQ(failed, 4u);
}

TEST(Aggregate, HandComputedStatistics) {
    const std::vector<ConvergenceRecord> recs{record("x", 10, 0, 100), record("x", 10, 1, 200), record("x", 10, 2, 600),
                                              record("x", 20, 0, 50), record("y", 10, 0, std::nullopt),
                                              record("y", 10, 1, std::nullopt)};
    const auto rows = aggregate(recs);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].S, 10u);
    EXPECT_DOUBLE_EQ(*rows[0].mean_samples, 300.0);
    // deviations -200, -100, 300: sum of squares 140000 over 2.
    EXPECT_NEAR(rows[0].std_samples, std::sqrt(70000.0), 1e-9);
    EXPECT_EQ(rows[1].std_samples, 0.0);
    EXPECT_EQ(*rows[1].mean_samples, 50.0);
    EXPECT_FALSE(rows[2].mean_samples);
    EXPECT_EQ(rows[2].n_censored, 2u);
    std::ostringstream out;
    write_summary_csv(rows, out);
    EXPECT_NE(out.str().find("y,10,censored,censored,2"), std::string::npos);
}

TEST(FitScaling, RecoversTheGeneratingModel) {
    const std::size_t A = 4;
    for (auto model : {ScalingModel::SAlogA, ScalingModel::SAlogSA}) {
        std::vector<SummaryRow> rows;
        for (std::size_t S : {50u, 200u, 500u, 1000u})
            rows.push_back({"m", S, 3.0 * scaling_feature(model, static_cast<double>(S), A), 0.0, 1, 0});
        const auto fit = fit_scaling(rows, "m", A);
        EXPECT_EQ(fit.better(), model);
        const auto& f = model == ScalingModel::SAlogA ? fit.salog_a : fit.salog_sa;
        EXPECT_NEAR(f.coefficient, 3.0, 1e-9);
        EXPECT_NEAR(f.residual_norm, 0.0, 1e-6);
    }
}

TEST(FitScaling, NeedsThreeUncensoredSizes) {
    std::vector<SummaryRow> rows{{"m", 10, 100.0, 0.0, 1, 0}, {"m", 20, 200.0, 0.0, 1, 0},
                                 {"m", 40, std::nullopt, 0.0, 1, 1}, {"n", 80, 5.0, 0.0, 1, 0}};
    EXPECT_THROW(fit_scaling(rows, "m", 4), InsufficientData);
    rows[2].mean_samples = 400.0;
    EXPECT_NO_THROW(fit_scaling(rows, "m", 4));
    EXPECT_THROW(fit_scaling(rows, "m", 1), InsufficientData);
}

TEST(Plots, EmptyInputRendersNoDataPanel) {
    const auto svg = figure_a_svg({});
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("no data"), std::string::npos);
    EXPECT_NE(figure_b_svg({}, {}, 16, 0.05).find("no data"), std::string::npos);
}

TEST(Plots, OneSeriesPerLearnerAndStableBytes) {
    const std::vector<ConvergenceRecord> recs{record("alpha", 10, 0, 100), record("alpha", 20, 0, 300),
                                              record("beta", 10, 0, 150), record("beta", 20, 0, 500),
                                              record("gamma", 10, 0, std::nullopt)};
    const auto svg = figure_a_svg(recs);
    EXPECT_NE(svg.find(">alpha<"), std::string::npos);
    EXPECT_NE(svg.find(">beta<"), std::string::npos);
    EXPECT_EQ(svg.find(">gamma<"), std::string::npos);
    EXPECT_EQ(svg, figure_a_svg(recs));
}

TEST(Plots, EmitFromDirectoryWritesBothFigures) {
    auto cfg = parse_experiment_config(kSmall);
    const auto dir = scratch("plots");
    cfg.output_dir = dir.string();
    cfg.figure_b_size = 16;
    run_experiment(cfg, 1, true);
    emit_plots_from_dir(dir);
    const auto b = slurp(dir / "plots" / "figure_b.svg");
    EXPECT_NE(slurp(dir / "plots" / "figure_a.svg").find("</svg>"), std::string::npos);
    EXPECT_NE(b.find(">qlearning<"), std::string::npos);
    EXPECT_NE(b.find("epsilon"), std::string::npos);
}

TEST(SustainedConvergence, IgnoresTransientDips) {
    RunTrace t;
    t.samples = {{0, 1.0}, {10, 0.01}, {20, 0.5}, {30, 0.02}, {40, -0.03}, {50, 0.01}};
    EXPECT_EQ(sustained_convergence(t, 0.05), 30u);
    t.samples.push_back({60, 0.2});
    EXPECT_FALSE(sustained_convergence(t, 0.05));
    EXPECT_FALSE(sustained_convergence(RunTrace{}, 0.05));
}

TEST(TraceSchedule, LinearAndGeometricDueTimes) {
    TraceSchedule lin(100);
    std::vector<std::uint64_t> hits;
    for (std::uint64_t t = 1; t <= 450; ++t)
        if (lin.due(t)) {
            hits.push_back(t);
            lin.advance(t);
        }
    EXPECT_EQ(hits, (std::vector<std::uint64_t>{100, 200, 300, 400}));

    TraceSchedule geo(100, TraceSchedule::Mode::geometric, 2.0);
    hits.clear();
    for (std::uint64_t t = 1; t <= 1000; ++t)
        if (geo.due(t)) {
            hits.push_back(t);
            geo.advance(t);
        }
    EXPECT_EQ(hits, (std::vector<std::uint64_t>{100, 200, 400, 800}));
    EXPECT_THROW(TraceSchedule(10, TraceSchedule::Mode::geometric, 1.0), DomainError);
}
