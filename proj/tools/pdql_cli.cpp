// Command-line front end: bounds, validate, run, sweep, plot, export.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pdql.hpp"

namespace {

using pdql::ordered_json;

enum class Format { text, csv, json };

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void print_bounds(const pdql::BoundReport& report, Format format) {
    if (format == Format::csv) {
        std::cout << "bound_id,value,formula,flags\n";
        for (const auto& r : report.rows)
            std::cout << r.id << ',' << pdql::format_double(r.value) << ',' << pdql::detail::csv_field(r.formula) << ','
                      << r.flags << '\n';
        return;
    }
    if (format == Format::json) {
        ordered_json j;
        j["inputs"] = {{"epsilon", report.inputs.epsilon},
                       {"delta", report.inputs.delta},
                       {"gamma", report.inputs.gamma},
                       {"states", report.inputs.num_states},
                       {"actions", report.inputs.num_actions}};
        j["interpretation"] = report.interpretation;
        ordered_json rows = ordered_json::array();
        for (const auto& r : report.rows)
            rows.push_back({{"bound_id", r.id},
                            {"value", r.value},
                            {"prefactor", r.prefactor},
                            {"log_factor", r.log_factor},
                            {"formula", r.formula},
                            {"flags", r.flags}});
        j["bounds"] = std::move(rows);
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::printf("%-26s %14s  %-10s %s\n", "bound_id", "value", "flags", "formula");
    for (const auto& r : report.rows)
        std::printf("%-26s %14s  %-10s %s\n", r.id.c_str(), fmt(r.value).c_str(), r.flags.empty() ? "-" : r.flags.c_str(),
                    r.formula.c_str());
    for (const auto& note : report.interpretation) std::printf("# %s\n", note.c_str());
}

void print_summary(const pdql::ExperimentResult& result, Format format) {
    const auto rows = pdql::aggregate(result.records);
    if (format == Format::csv) {
        pdql::write_summary_csv(rows, std::cout);
        return;
    }
    if (format == Format::json) {
        ordered_json j = ordered_json::array();
        for (const auto& r : rows)
            j.push_back({{"learner", r.learner},
                         {"S", r.S},
                         {"mean_samples", r.mean_samples ? ordered_json(*r.mean_samples) : ordered_json("censored")},
                         {"std_samples", r.std_samples},
                         {"n_censored", r.n_censored}});
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::printf("%-18s %6s %16s %14s %10s\n", "learner", "S", "mean_samples", "std_samples", "censored");
    for (const auto& r : rows)
        std::printf("%-18s %6zu %16s %14s %7zu/%zu\n", r.learner.c_str(), r.S,
                    r.mean_samples ? fmt(*r.mean_samples).c_str() : "censored", fmt(r.std_samples).c_str(),
                    r.n_censored, r.n);
    for (const auto& r : result.records)
        if (!r.error.empty())
            std::fprintf(stderr, "cell %s S=%zu seed=%llu failed: %s\n", r.learner.c_str(), r.S,
                         static_cast<unsigned long long>(r.seed), r.error.c_str());
}

void print_fits(const pdql::ExperimentResult& result, const std::vector<pdql::LearnerSpec>& learners) {
    const auto rows = pdql::aggregate(result.records);
    for (const auto& l : learners) {
        try {
            const auto fit = pdql::fit_scaling(rows, l.label, result.num_actions);
            std::printf("fit %-14s SAlogA residual %s  SAlogSA residual %s  better %s\n", l.label.c_str(),
                        fmt(fit.salog_a.relative_residual).c_str(), fmt(fit.salog_sa.relative_residual).c_str(),
                        pdql::model_name(fit.better()));
        } catch (const pdql::InsufficientData& e) {
            std::printf("fit %-14s skipped: %s\n", l.label.c_str(), e.what());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic Delayed Q-learning laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t jobs = 1;
    Format format = Format::text;
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s, seed_set = true; }, "Global seed mixed into every run")
        ->capture_default_str();
    app.add_option("--jobs", jobs, "Concurrent experiment cells")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--format", format, "Output format")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Format>{{"text", Format::text}, {"csv", Format::csv}, {"json", Format::json}},
            CLI::ignore_case));

    auto* bounds = app.add_subcommand("bounds", "Evaluate sample-complexity bounds");
    pdql::BoundInputs in;
    bounds->add_option("--epsilon", in.epsilon)->capture_default_str();
    bounds->add_option("--delta", in.delta)->capture_default_str();
    bounds->add_option("--gamma", in.gamma)->capture_default_str();
    bounds->add_option("--states", in.num_states)->capture_default_str();
    bounds->add_option("--actions", in.num_actions)->capture_default_str();

    auto* validate = app.add_subcommand("validate", "Check an MDP JSON file against the model invariants");
    std::string spec_path;
    std::size_t budget = 20000;
    validate->add_option("spec", spec_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
    validate->add_option("--budget", budget, "Sampled metric triples when S > 256")->capture_default_str();

    std::string config_path, out_dir;
    auto* run = app.add_subcommand("run", "Run every learner and seed on the configured environments");
    run->add_option("config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Override [experiment].output_dir");
    auto* sweep = app.add_subcommand("sweep", "Run the size sweep, then write plots and scaling fits");
    sweep->add_option("config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out_dir, "Override [experiment].output_dir");

    auto* plot = app.add_subcommand("plot", "Rebuild figures from a finished output directory");
    std::string plot_dir;
    plot->add_option("dir", plot_dir)->required()->check(CLI::ExistingDirectory);

    auto* exporter = app.add_subcommand("export", "Write the MDP of a config's environment as JSON");
    std::size_t export_size = 0;
    std::string export_path;
    exporter->add_option("config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
    exporter->add_option("-o,--output", export_path, "Destination JSON")->required();
    exporter->add_option("--size", export_size, "Sweep size to export (default: first)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bounds) {
            print_bounds(pdql::comparison_bounds(in), format);
            return 0;
        }
        if (*validate) {
            const auto spec = pdql::load_mdp(spec_path);
            try {
                const auto report = pdql::validate_mdp(spec, budget, seed);
                std::cout << report.to_text();
                return 0;
            } catch (const pdql::ValidationFailure& e) {
                std::cout << e.report().to_text();
                std::cerr << e.what() << '\n';
                return 1;
            }
        }
        if (*run || *sweep) {
            auto cfg = pdql::load_experiment_config(config_path);
            if (seed_set) cfg.global_seed = seed;
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            const auto result = pdql::run_experiment(cfg, jobs);
            print_summary(result, format);
            if (*sweep) {
                pdql::emit_plots(result.records, result.figure_b, cfg.figure_b_size, cfg.epsilon, cfg.output_dir);
                if (format == Format::text) print_fits(result, cfg.learners);
            }
            if (result.converged() == 0) {
                std::fprintf(stderr, "every cell is censored (%zu records)\n", result.records.size());
                return 2;
            }
            return 0;
        }
        if (*plot) {
            pdql::emit_plots_from_dir(plot_dir);
            std::cout << "wrote " << (std::filesystem::path(plot_dir) / "plots").string() << '\n';
            return 0;
        }
        if (*exporter) {
            const auto cfg = pdql::load_experiment_config(config_path);
            const auto envs = cfg.environments();
            const pdql::LatticeConfig* chosen = &envs.front();
            for (const auto& e : envs)
                if (e.num_states() == export_size) chosen = &e;
            if (export_size != 0 && chosen->num_states() != export_size)
                throw pdql::ConfigError("size " + std::to_string(export_size) + " is not in the sweep");
            pdql::save_mdp(pdql::make_lattice(*chosen, cfg.gamma), export_path);
            return 0;
        }
    } catch (const pdql::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const pdql::StructuralError& e) {
        std::cerr << "invalid MDP: " << e.what() << '\n';
        return 1;
    } catch (const pdql::DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
