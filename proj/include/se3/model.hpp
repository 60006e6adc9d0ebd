#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "se3/graph.hpp"
#include "se3/layers.hpp"

namespace se3 {

struct ModelConfig {
    Fiber input;
    Fiber output;
    std::size_t layers = 4;
    /// Hidden fibers carry degrees 0..hidden_degree with `channels` each.
    int hidden_degree = 2;
    std::size_t channels = 3;
    std::size_t heads = 1;
    LayerKind kind = LayerKind::Attention;
    SelfInteractionKind self_interaction = SelfInteractionKind::Attentive;
    std::size_t radial_hidden = 32;
    std::size_t edge_scalars = 0;
    bool scale_logits = false;
    /// Norm nonlinearity after every layer but the last.
    bool nonlinearity = true;
    /// Radii are divided by this before entering the radial nets.
    double radius_scale = 1.0;
    BasisOptions basis;
};

struct Model {
    ModelConfig config;
    Fiber hidden;
    std::vector<Layer> layers;

    int max_degree() const;
};

/// ConfigError names the offending field. Parameters are registered under "model/...".
Model build_model(const ModelConfig& config, ParamStore& store, std::uint64_t seed);

/// Parameter count implied by the config alone, for cross-checking the store.
std::size_t count_parameters(const ModelConfig& config);

struct ModelInput {
    std::vector<Vec3> positions;
    FeatureMap features;
    NeighborGraph graph;
};

struct ModelOutput {
    FiberFeature features;
    std::vector<Var> alphas;  // one per attention layer, [E, H]
    std::vector<FiberFeature> layers;  // after each layer (and its nonlinearity)
};

ModelOutput run_model(Tape& tape, const ParamStore& store, const Model& model, const ModelInput& input,
                      const LayerOptions& options = {});

}  // namespace se3
