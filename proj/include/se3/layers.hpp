#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "se3/equivariant_basis.hpp"
#include "se3/fiber.hpp"

namespace se3 {

enum class LayerKind { Tfn, Attention };
enum class SelfInteractionKind { Linear, Attentive };

struct LayerSpec {
    Fiber in;
    Fiber out;
    LayerKind kind = LayerKind::Attention;
    /// Heads partition the channels of every key/value degree evenly.
    std::size_t heads = 1;
    SelfInteractionKind self_interaction = SelfInteractionKind::Linear;
    std::size_t radial_hidden = 32;
    /// Scalar edge features fed to the radial nets next to the radius.
    std::size_t edge_scalars = 0;
    /// Divide logits by sqrt(per-head key width). Off by default.
    bool scale_logits = false;
};

/// Parameter layout of one layer; the numbers live in a ParamStore under `prefix`.
struct Layer {
    LayerSpec spec;
    std::string prefix;
    /// Keys and queries live on the output degrees also present in the input.
    Fiber key_fiber;
    std::map<std::pair<int, int>, RadialProfile> value_nets;  // (l_out, k_in)
    std::map<std::pair<int, int>, RadialProfile> key_nets;    // (l_key, k_in)
};

/// Validates the spec (ConfigError naming the field) and registers parameters.
Layer make_layer(ParamStore& store, const std::string& prefix, const LayerSpec& spec, std::mt19937_64& rng);

/// Per-forward edge data shared by every layer.
struct EdgeContext {
    const BasisSet* basis = nullptr;
    Var radial_input;  // [E, 1 + edge scalars]
    IndexList src;
    IndexList dst;
    std::size_t nodes = 0;
};

struct LayerOptions {
    /// Replace the softmax by 1/|N_i| (removes attention; used to relate to TFN).
    bool uniform_attention = false;
};

struct LayerOutput {
    FiberFeature features;
    std::optional<Var> alpha;  // [E, H] for attention layers
};

LayerOutput apply_layer(Tape& tape, const ParamStore& store, const Layer& layer, const EdgeContext& ctx,
                        const FiberFeature& in, const LayerOptions& options = {});

/// Sum over incoming edges of the TFN messages W^{lk}(x_j - x_i) f_j^k, per output degree.
FiberFeature tfn_messages(Tape& tape, const ParamStore& store, const Layer& layer, const EdgeContext& ctx,
                          const FiberFeature& in);

/// Softmax over each neighborhood of per-head q_i . k_ij -> [E, H].
Var attention_weights(Var logits, const EdgeContext& ctx);

/// Channel mixing per degree with weights prefix/l [C_out, C_in]; only degrees in both fibers.
FiberFeature linear_self_interaction(Tape& tape, const ParamStore& store, const std::string& prefix,
                                     const Fiber& in, const Fiber& out, const FiberFeature& feats);
/// Channel mixing with per-node weights from an MLP of the channel Gram matrix.
FiberFeature attentive_self_interaction(Tape& tape, const ParamStore& store, const std::string& prefix,
                                        const Fiber& in, const Fiber& out, const FiberFeature& feats);
/// The raw per-node weights [N, C_out, C_in] the attentive variant applies for one degree.
Var attentive_weights(Tape& tape, const ParamStore& store, const std::string& prefix, int degree,
                      std::size_t c_out, Var f);

void register_linear_self_interaction(ParamStore& store, const std::string& prefix, const Fiber& in,
                                      const Fiber& out, std::mt19937_64& rng);
void register_attentive_self_interaction(ParamStore& store, const std::string& prefix, const Fiber& in,
                                         const Fiber& out, std::mt19937_64& rng);

/// ReLU(LN(|f|)) f/|f| per degree, LN across channels with affine prefix/l/{gamma,beta};
/// |f| is guarded as sqrt(sum f^2 + 1e-12).
FiberFeature norm_nonlinearity(Tape& tape, const ParamStore& store, const std::string& prefix,
                               const FiberFeature& feats);
void register_norm_nonlinearity(ParamStore& store, const std::string& prefix, const Fiber& fiber);

/// Max over the nodes of each segment of every degree-0 channel -> [segments, C_0].
/// ConfigError when there are no degree-0 features.
Var invariant_pool(const FiberFeature& feats, IndexList node_segment, std::size_t segments);

}  // namespace se3
