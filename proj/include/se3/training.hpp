#pragma once

// Training loop state and its binary checkpoint.
//
// Checkpoint layout (little endian):
//   "SE3CKPT\0", u32 version, u64 n + n bytes of JSON metadata,
//   u64 count, then per parameter: u32 n + name, u32 rank, u64 dims[rank], f64 values[],
//   i64 optimizer steps, then per parameter (same order) f64 first moment[], f64 second moment[].

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "se3/run_config.hpp"

namespace se3 {

/// Batch for a given step: a pure function of (seed, step), so a resumed run draws the same batches.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t step, std::size_t batch, std::size_t n);

class Trainer {
public:
    Trainer(RunConfig config, Normalization norm);

    /// One Adam step on the batch for the current step index. Returns the pre-update loss.
    /// Throws NumericError, leaving parameters untouched, on a non-finite loss or gradient.
    double step(std::span<const Sample> train);

    std::size_t steps_done() const { return static_cast<std::size_t>(adam_.steps()); }
    const RunConfig& config() const { return config_; }
    const Normalization& normalization() const { return norm_; }
    const TaskModel& model() const { return model_; }
    const ParamStore& store() const { return store_; }
    ParamStore& store() { return store_; }
    const Adam& optimizer() const { return adam_; }

    void save(const std::string& path, const nlohmann::json& extra = nlohmann::json::object()) const;
    /// Restores parameters, optimizer state and normalization. The checkpoint's model section
    /// must match `config` (descriptive ConfigError otherwise).
    static Trainer load(const std::string& path, const RunConfig& config);

private:
    RunConfig config_;
    Normalization norm_;
    ParamStore store_;
    TaskModel model_;
    Adam adam_;
};

struct CheckpointData {
    nlohmann::json meta;
    ParamStore store;
    std::int64_t steps = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
};

void write_checkpoint(const std::string& path, const nlohmann::json& meta, const ParamStore& store, const Adam& adam);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace se3
