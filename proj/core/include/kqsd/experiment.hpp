#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace kqsd {

struct RunOptions {
    std::string output_dir;                   // overrides the config's directory
    std::optional<std::uint64_t> seed;        // overrides the config's seed
    unsigned threads = 0;                     // 0: take the config's value (default 1)
    bool verbose = false;
};

// Executes one experiment described by a JSON config (or a manifest produced
// by an earlier run) and writes manifest.json, summary.txt, and the
// kind-specific artifacts into the output directory.  Returns the CI status:
// 0 pass, 2 statistical fail, 3 inconclusive.  Validation problems throw
// ConfigError (listing every offending key); runtime failures throw Error.
int run_experiment_text(const std::string& config_text, const RunOptions& opts);
int run_experiment_file(const std::string& config_path, const RunOptions& opts);

// Deterministic listing of the built-in models and their parameters.
std::string catalog_text();

}  // namespace kqsd
