#include "kqsd/errors.hpp"
#include "kqsd/experiment.hpp"
#include "kqsd/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Kinetic quasi-stationary distribution engine"};
    app.set_version_flag("--version", std::string(kqsd::engine_version));
    app.require_subcommand(1);

    std::string config_path;
    kqsd::RunOptions opts;
    std::uint64_t seed_value = 0;

    CLI::App* run = app.add_subcommand("run", "Execute one experiment config");
    run->add_option("config", config_path, "JSON config or manifest.json from an earlier run")
        ->required();
    run->add_option("--output-dir", opts.output_dir, "Write artifacts here (overrides config)");
    CLI::Option* seed_opt =
        run->add_option("--seed", seed_value, "Override the config seed");
    run->add_option("--threads", opts.threads,
                    "Worker threads (0: take the config's value)");
    run->add_flag("--verbose", opts.verbose, "Chatty progress on stderr");

    CLI::App* cat = app.add_subcommand("catalog", "List built-in models and parameters");

    CLI11_PARSE(app, argc, argv);

    if (cat->parsed()) {
        std::cout << kqsd::catalog_text();
        return 0;
    }

    if (*seed_opt) opts.seed = seed_value;
    try {
        const int status = kqsd::run_experiment_file(config_path, opts);
        if (status == 2) std::cerr << "kqsd: statistical check failed\n";
        if (status == 3) std::cerr << "kqsd: result inconclusive\n";
        return status;
    } catch (const kqsd::ConfigError& e) {
        std::cerr << "kqsd: config error: " << e.what() << "\n";
        for (const auto& key : e.offending_keys) std::cerr << "  - " << key << "\n";
        return 1;
    } catch (const kqsd::Error& e) {
        std::cerr << "kqsd: error: " << e.what() << "\n";
        return 1;
    }
}
