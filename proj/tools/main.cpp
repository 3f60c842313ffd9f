// Command line front end. Deliberately thin: all work happens behind
// the C API of the shared library, which this binary is the reference
// consumer of.
#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <xensemble.h>

int main(int argc, char** argv) {
    CLI::App app{"Ensemble defense toolkit: input denoising + output model "
                 "verification against adversarial and out-of-distribution inputs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(xe_version()));

    struct Args {
        std::string config;
        std::string out;
        std::string format = "text";
        std::uint64_t seed = 0;
        bool has_seed = false;
        int workers = 0;
        bool quiet = false;
    } args;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "Generate the train/test/ood datasets"},
        {"train-pool", "Train the target model and the verification pool"},
        {"rank-ensembles", "Enumerate serving teams and rank them by kappa diversity"},
        {"attack", "Generate adversarial example batches against the target model"},
        {"defend", "Run the defense over benign, adversarial and ood sources"},
        {"ood", "Out-of-distribution detection metrics"},
        {"threat", "Grey-box and white-box adaptive attack scenarios"},
        {"report", "Merge stage reports into one summary"},
    };
    std::string chosen;
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", args.config, "Experiment config file (JSON)");
        sub->add_option("--out", args.out, "Experiment directory")->required();
        CLI::Option* seed_opt =
            sub->add_option("--seed", args.seed, "Override the config seed");
        sub->add_option("--workers", args.workers, "Worker thread count");
        sub->add_option("--format", args.format, "Stdout format: text, csv or json");
        sub->add_flag("--quiet", args.quiet, "Suppress the stdout echo");
        sub->callback([&args, &chosen, name = name, seed_opt] {
            chosen = name;
            args.has_seed = seed_opt->count() > 0;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // Usage problems are config errors (exit 2); --help/--version exit 0.
        return code == 0 ? 0 : 2;
    }

    xe_run_options run{};
    run.command = chosen.c_str();
    run.config_path = args.config.empty() ? nullptr : args.config.c_str();
    run.out_dir = args.out.c_str();
    run.format = args.format.c_str();
    run.has_seed = args.has_seed ? 1 : 0;
    run.seed = args.seed;
    run.workers = args.workers;
    run.quiet = args.quiet ? 1 : 0;

    const xe_status status = xe_run(&run);
    if (status != XE_OK) {
        std::cerr << "error: " << xe_last_error() << "\n";
        return int(status);
    }
    return 0;
}
