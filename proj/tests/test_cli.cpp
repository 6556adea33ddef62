#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;  ///< stdout and stderr interleaved
};

Outcome run(const std::string& args) {
    const std::string cmd = std::string(PDQL_CLI) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) o.output += buf.data();
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("pdql_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

const char* kSweep = R"(
[experiment]
epsilon = 0.05
delta = 0.05
gamma = 0.9
seeds = 2
trace_stride = 200
figure_b_size = 12
[env]
sizes = [8, 12, 16]
slip_prob = 0.0
[env.reward]
random_goals = 1
[[learner]]
name = "pql"
phase_length = 2
max_phases = 60
[[learner]]
name = "qlearning"
budget = 20000
)";

// Three-cell line; 0 -> 2 skips a cell and breaks locality.
const char* kBadSpec = R"({"num_states": 3, "num_actions": 2, "discount": 0.9,
 "rewards": [[0, 0], [0, 0], [1, 1]],
 "transitions": [[[1.0, 2]], [[1.0, 1]], [[1.0, 0]], [[1.0, 2]], [[1.0, 1]], [[1.0, 2]]],
 "metric": "lattice", "lattice_dims": [3], "lattice_wrap": false})";

}  // namespace

TEST(Cli, BoundsTextListsEveryRow) {
    const auto o = run("bounds --epsilon 0.01 --delta 0.001 --gamma 0.9 --states 1000 --actions 4");
    EXPECT_EQ(o.code, 0);
    for (const char* id : {"delayed_q", "speedy_q", "vrql", "q_ucb", "ucb_multistage", "phased_q", "pdql"})
        EXPECT_NE(o.output.find(id), std::string::npos) << id;
}

TEST(Cli, BoundsCsvHeader) {
    const auto o = run("--format csv bounds");
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(o.output.rfind("bound_id,value,formula,flags\n", 0), 0u);
}

TEST(Cli, BoundsRejectsOutOfRangeInputs) { EXPECT_EQ(run("bounds --gamma 1.5").code, 1); }

TEST(Cli, MalformedConfigExitsOneWithLine) {
    const auto dir = scratch("bad_config");
    const auto cfg = write(dir / "bad.toml", "[experiment]\nepsilon = 0.1\ngamma = = 0.9\n");
    const auto o = run("run " + cfg.string());
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.output.find("line 3"), std::string::npos) << o.output;
}

TEST(Cli, ExportThenValidate) {
    const auto dir = scratch("validate");
    const auto cfg = write(dir / "c.toml", kSweep);
    const auto spec = dir / "spec.json";
    ASSERT_EQ(run("export " + cfg.string() + " --size 12 -o " + spec.string()).code, 0);
    const auto good = run("validate " + spec.string());
    EXPECT_EQ(good.code, 0) << good.output;
    const auto bad = run("validate " + write(dir / "bad.json", kBadSpec).string());
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("locality_support"), std::string::npos) << bad.output;
}

TEST(Cli, SweepThenPlotWritesBothFigures) {
    const auto dir = scratch("sweep");
    const auto cfg = write(dir / "c.toml", kSweep);
    const auto out = dir / "out";
    const auto o = run("sweep " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("fit pql"), std::string::npos) << o.output;
    fs::remove_all(out / "plots");
    const auto p = run("plot " + out.string());
    EXPECT_EQ(p.code, 0) << p.output;
    EXPECT_TRUE(fs::exists(out / "plots" / "figure_a.svg"));
    EXPECT_TRUE(fs::exists(out / "plots" / "figure_b.svg"));
}

TEST(Cli, AllCensoredSweepExitsTwo) {
    const auto dir = scratch("censored");
    std::string text = kSweep;
    text.replace(text.find("budget = 20000"), 14, "budget = 0");
    text.replace(text.find("max_phases = 60"), 15, "max_phases = 0");
    const auto o = run("run " + write(dir / "c.toml", text).string() + " --out " + (dir / "out").string());
    EXPECT_EQ(o.code, 2) << o.output;
}

TEST(Cli, JobsAfterSubcommandGiveIdenticalRecords) {
    const auto dir = scratch("jobs");
    const auto cfg = write(dir / "c.toml", kSweep);
    ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir / "one").string()).code, 0);
    ASSERT_EQ(run("run " + cfg.string() + " --jobs 2 --out " + (dir / "two").string()).code, 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const auto a = slurp(dir / "one" / "records.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "two" / "records.csv"));
}
