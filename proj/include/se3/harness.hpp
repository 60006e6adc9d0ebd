#pragma once

// Batch commands behind the CLI. Each returns a JSON report and an exit code:
// 0 success, 1 tolerance breach. ConfigError / ArgumentError map to 2 and IoError to 3 at the
// CLI boundary.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "se3/run_config.hpp"

namespace se3 {

enum ExitCode : int { kExitOk = 0, kExitTolerance = 1, kExitUsage = 2, kExitIo = 3 };

struct CommandResult {
    nlohmann::json report;
    int exit_code = kExitOk;
};

/// Writes train/test JSONL, manifest.json and the resolved config into data.dir.
CommandResult cmd_gen_data(const RunConfig& config);

struct TrainOptions {
    std::optional<std::string> resume;  // checkpoint to continue from
    bool quiet = true;                   // suppress per-interval progress on stderr
};

/// Trains to train.steps, logging metrics.jsonl and writing checkpoint.bin (+ checkpoint.json)
/// into output_dir. A non-finite loss aborts with the last good parameters checkpointed.
CommandResult cmd_train(const RunConfig& config, const TrainOptions& options = {});

struct EvalOptions {
    std::optional<std::string> checkpoint;  // defaults to output_dir/checkpoint.bin
    bool untrained = false;                 // score a freshly initialized model instead
};

/// {mse_position, mse_velocity, delta_eq, n_samples, seed, ...} on the test split.
CommandResult cmd_eval(const RunConfig& config, const EvalOptions& options = {});

/// Per-layer and end-to-end Δ_EQ of a random model plus the algebraic residuals; exit 1 when
/// any check exceeds its tolerance.
CommandResult cmd_check_equivariance(const RunConfig& config, bool break_equivariance);

struct BenchOptions {
    std::vector<int> degrees{2, 4, 6, 8};
    std::vector<std::size_t> points{1000, 10000, 100000};
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    bool memoize = true;  // false: time the naive path alone
};

/// Memoized vs naive SH throughput; exit 1 when the J=8, largest-count speedup is below 5x.
CommandResult cmd_bench_sh(const BenchOptions& options);

struct ModelBenchOptions {
    std::vector<std::size_t> points{64, 128, 256, 512};
    std::size_t neighbors = 16;
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
};

/// Forward-pass wall-clock of the configured model against point count.
CommandResult cmd_bench_model(const RunConfig& config, const ModelBenchOptions& options);

/// Wigner-D, Clebsch-Gordan and spherical-harmonic residuals.
CommandResult cmd_so3_verify(std::uint64_t seed);

/// Coefficient of determination of a least-squares line through (log x, log y).
double loglog_r2(const std::vector<double>& x, const std::vector<double>& y);

/// Human-readable table for a report (the CLI's --human mode).
std::string render_human(const nlohmann::json& report);

}  // namespace se3
