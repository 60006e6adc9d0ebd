#pragma once

// Declarative run configuration: a TOML-style file of [sections] with `key = value` lines,
// plus `section.key=value` overrides from the command line.
//
//   [data]   dir, n_train, n_test, seed, particles, dt, kappa, softening, ...
//   [model]  architecture, layers, degree, channels, heads, self_interaction, radial_hidden, plus_z
//   [train]  seed (required), steps, batch, lr, log_interval, checkpoint_interval, eval_samples
//   [eval]   rotations, samples
//   output_dir (top level)

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "se3/nbody.hpp"
#include "se3/nbody_model.hpp"

namespace se3 {

struct DataConfig {
    std::string dir = "data";
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::optional<std::uint64_t> seed;  // defaults to train.seed
    SimConfig sim;

    std::string train_path() const { return dir + "/train.jsonl"; }
    std::string test_path() const { return dir + "/test.jsonl"; }
};

struct TrainConfig {
    std::optional<std::uint64_t> seed;
    std::size_t steps = 5000;
    std::size_t batch = 32;
    double lr = 3e-3;
    std::size_t log_interval = 250;
    std::size_t checkpoint_interval = 1000;
    std::size_t eval_samples = 200;  // test samples scored at each log interval
};

struct EvalConfig {
    std::size_t rotations = 20;
    std::size_t samples = 50;
};

struct RunConfig {
    std::string task = "nbody";
    std::string output_dir = "runs/default";
    DataConfig data;
    TaskConfig model;
    TrainConfig train;
    EvalConfig eval;

    std::uint64_t seed() const;
    std::uint64_t data_seed() const { return data.seed.value_or(seed()); }
    /// Throws ConfigError naming the field.
    void validate() const;
};

/// Parses the file format above. Unknown keys and malformed values throw ConfigError with
/// origin:line.
RunConfig parse_run_config(std::string_view text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);
/// "section.key=value" (or "key=value" for top-level keys).
void apply_override(RunConfig& config, std::string_view assignment);

nlohmann::json to_json(const RunConfig& config);
/// Inverse of to_json; the same key set as the text format.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Renders the text format; parse_run_config(render(c)) reproduces c.
std::string render_run_config(const RunConfig& config);

nlohmann::json to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

}  // namespace se3
