#pragma once

// Models for the N-body task: input encoding, the prediction head, the training loss,
// Δ_EQ, and a deliberately non-equivariant coordinate MLP for negative controls.

#include <optional>
#include <random>
#include <span>

#include "se3/model.hpp"
#include "se3/nbody.hpp"

namespace se3 {

enum class Architecture { Se3Transformer, Tfn, CoordinateMlp };

const char* architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

struct TaskConfig {
    Architecture arch = Architecture::Se3Transformer;
    std::size_t layers = 4;
    int degree = 2;
    std::size_t channels = 3;
    std::size_t heads = 1;
    SelfInteractionKind self_interaction = SelfInteractionKind::Attentive;
    std::size_t radial_hidden = 32;
    /// Extra invariant-breaking inputs: z coordinates as degree 0, (x, y, 0) as degree 1.
    bool plus_z = false;
    std::size_t mlp_hidden = 64;
    BasisOptions basis;
};

/// Dataset-wide scales, fitted on the training split.
struct Normalization {
    double position = 1.0;  // RMS of centered input positions
    double velocity = 1.0;  // RMS of input velocities
    double residual_position = 1.0;  // RMS of target - linear baseline
    double residual_velocity = 1.0;
};

Normalization fit_normalization(const SimConfig& sim, std::span<const Sample> train);

/// A batch laid out for the network. Fields are in the SH basis.
struct Encoded {
    std::size_t samples = 0;
    std::size_t particles = 0;
    ModelInput input;
    /// Normalized residual targets [N, 2, 3]: channel 0 position, channel 1 velocity.
    Tensor target;
};

/// Inputs: centered positions and velocities as degree 1, charge as degree 0, q_i q_j on edges,
/// fully connected within each sample.
Encoded encode(std::span<const Sample> batch, const SimConfig& sim, const Normalization& norm, bool plus_z);

struct TaskForward {
    Var fields;  // [N, 2, 3]
    std::vector<Var> alphas;
    std::vector<FiberFeature> layers;  // equivariant models only
};

class TaskModel {
public:
    TaskModel(const TaskConfig& config, ParamStore& store, std::uint64_t seed);

    const TaskConfig& config() const { return config_; }
    Fiber input_fiber() const;
    TaskForward forward(Tape& tape, const ParamStore& store, const Encoded& batch, const LayerOptions& options = {}) const;

private:
    TaskConfig config_;
    std::optional<Model> model_;
};

ModelConfig model_config(const TaskConfig& config);

/// Mean squared error of the normalized residuals.
Var task_loss(Var fields, const Encoded& batch);

/// Predicted states from network fields: x + vT + s_x out_0, v + s_v out_1.
std::vector<State> decode(const Tensor& fields, std::span<const Sample> batch, const SimConfig& sim,
                          const Normalization& norm);

std::vector<State> predict(const TaskModel& model, const ParamStore& store, std::span<const Sample> samples,
                           const SimConfig& sim, const Normalization& norm, std::size_t batch = 128);

struct EquivarianceReport {
    double delta_eq = 0.0;       // mean over rotations and samples
    double max_delta_eq = 0.0;
    double max_alpha_change = 0.0;  // max |α(gx) - α(x)|, attention models only
    std::vector<double> layer_delta_eq;  // worst relative error of each layer's whole output
};

/// Δ_EQ on the raw output fields: ‖D Φ(x) − Φ(g x)‖ / ‖D Φ(x)‖ per sample, over Haar rotations.
/// Translations are applied alongside when `translate` is set.
EquivarianceReport equivariance_error(const TaskModel& model, const ParamStore& store, std::span<const Sample> samples,
                                      const SimConfig& sim, const Normalization& norm, std::size_t rotations,
                                      std::mt19937_64& rng, bool translate = false);

}  // namespace se3
