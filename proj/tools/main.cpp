#include <exception>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "vtok/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Video-latent token toolkit: merge benchmarks, sampling demos, cost reports"};
    app.set_version_flag("--version", vtok::kVersion);
    app.require_subcommand(1);

    vtok::cli::CommonArgs args;
    std::function<int(const vtok::cli::CommonArgs&)> command;

    const auto add_common = [&args](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", args.out_path, "Report output path (default: stdout)");
        sub->add_option("--seed", args.seed, "Run seed (overrides the config file)");
        sub->add_option("--format", args.format, "Report format")
            ->check(CLI::IsMember({"json", "csv"}))
            ->default_val("json");
    };

    CLI::App* merge_bench = app.add_subcommand(
        "merge-bench", "Sweep merge settings over synthetic scenes and report errors");
    add_common(merge_bench);
    merge_bench->callback([&] { command = vtok::cli::run_merge_bench; });

    CLI::App* sample_demo = app.add_subcommand(
        "sample-demo", "Run standard and object-centric sampling against an exact oracle");
    add_common(sample_demo);
    sample_demo->callback([&] { command = vtok::cli::run_sample_demo; });

    CLI::App* cost_report = app.add_subcommand(
        "cost-report", "Attention FLOP and map-storage estimates for a model spec");
    add_common(cost_report);
    cost_report->callback([&] { command = vtok::cli::run_cost_report; });

    CLI11_PARSE(app, argc, argv);

    args.seed_overridden = app.get_subcommands().front()->count("--seed") > 0;

    try {
        return command(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
