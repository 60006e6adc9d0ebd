#include "se3/model.hpp"

#include <algorithm>
#include <cmath>

#include "se3/error.hpp"

namespace se3 {

namespace {

LayerSpec layer_spec(const ModelConfig& c, const Fiber& in, const Fiber& out) {
    LayerSpec s;
    s.in = in;
    s.out = out;
    s.kind = c.kind;
    s.heads = c.heads;
    s.self_interaction = c.self_interaction;
    s.radial_hidden = c.radial_hidden;
    s.edge_scalars = c.edge_scalars;
    s.scale_logits = c.scale_logits;
    return s;
}

std::vector<std::pair<Fiber, Fiber>> layer_fibers(const ModelConfig& c, const Fiber& hidden) {
    std::vector<std::pair<Fiber, Fiber>> out;
    for (std::size_t i = 0; i < c.layers; ++i) {
        out.emplace_back(i == 0 ? c.input : hidden, i + 1 == c.layers ? c.output : hidden);
    }
    return out;
}

void validate(const ModelConfig& c) {
    if (c.input.entries().empty()) throw ConfigError("model.input: fiber is empty");
    if (c.output.entries().empty()) throw ConfigError("model.output: fiber is empty");
    if (c.layers == 0) throw ConfigError("model.layers: must be at least 1");
    if (c.hidden_degree < 0) throw ConfigError("model.hidden_degree: must be >= 0");
    if (c.channels == 0) throw ConfigError("model.channels: must be positive");
    if (c.heads == 0) throw ConfigError("model.heads: must be positive");
    if (c.radial_hidden == 0) throw ConfigError("model.radial_hidden: must be positive");
    if (!(c.radius_scale > 0.0)) throw ConfigError("model.radius_scale: must be positive");
    const int top = std::max({c.input.max_degree(), c.output.max_degree(), c.hidden_degree});
    if (top > max_degree()) {
        throw ConfigError("model.hidden_degree: degree " + std::to_string(top) + " exceeds the supported maximum " +
                          std::to_string(max_degree()));
    }
    if (c.kind == LayerKind::Attention && c.channels % c.heads != 0) {
        throw ConfigError("model.heads: " + std::to_string(c.heads) + " does not divide channels=" + std::to_string(c.channels));
    }
}

}  // namespace

int Model::max_degree() const {
    return std::max({config.input.max_degree(), config.output.max_degree(), hidden.max_degree()});
}

Model build_model(const ModelConfig& config, ParamStore& store, std::uint64_t seed) {
    validate(config);
    Model model{config, Fiber::uniform(config.hidden_degree, config.channels), {}};
    std::mt19937_64 rng(seed);
    const auto fibers = layer_fibers(config, model.hidden);
    for (std::size_t i = 0; i < fibers.size(); ++i) {
        const std::string prefix = "model/layer" + std::to_string(i);
        try {
            model.layers.push_back(make_layer(store, prefix, layer_spec(config, fibers[i].first, fibers[i].second), rng));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
        if (config.nonlinearity && i + 1 < fibers.size()) register_norm_nonlinearity(store, prefix + "/norm", fibers[i].second);
    }
    return model;
}

std::size_t count_parameters(const ModelConfig& config) {
    validate(config);
    const Fiber hidden = Fiber::uniform(config.hidden_degree, config.channels);
    const auto fibers = layer_fibers(config, hidden);
    const std::size_t h = config.radial_hidden, in = 1 + config.edge_scalars;
    auto radial = [&](std::size_t nj, std::size_t ci, std::size_t co) {
        return (h * in + h) + 2 * h + (h * h + h) + 2 * h + (nj * co * ci * h + nj * co * ci);
    };
    std::size_t n = 0;
    for (std::size_t i = 0; i < fibers.size(); ++i) {
        const Fiber& fin = fibers[i].first;
        const Fiber& fout = fibers[i].second;
        for (const auto& [l, co] : fout.entries()) {
            for (const auto& [k, ci] : fin.entries()) {
                const auto nj = static_cast<std::size_t>(l + k - std::abs(l - k) + 1);
                n += radial(nj, ci, co);
                if (config.kind == LayerKind::Attention && fin.has(l)) n += radial(nj, ci, co);
            }
            const std::size_t ci = fin.channels(l);
            if (ci == 0) continue;
            if (config.kind == LayerKind::Attention) n += co * ci;  // query
            if (config.self_interaction == SelfInteractionKind::Linear) {
                n += co * ci;
            } else {
                n += (ci * ci * ci * ci + ci * ci) + (co * ci * ci * ci + co * ci);
            }
        }
        if (config.nonlinearity && i + 1 < fibers.size()) {
            for (const auto& [l, c] : fout.entries()) n += 2 * c;
        }
    }
    return n;
}

ModelOutput run_model(Tape& tape, const ParamStore& store, const Model& model, const ModelInput& input,
                      const LayerOptions& options) {
    const NeighborGraph& g = input.graph;
    if (input.positions.size() != g.nodes) {
        throw ArgumentError("run_model: " + std::to_string(input.positions.size()) + " positions for " + std::to_string(g.nodes) + " nodes");
    }
    const std::size_t scalars = g.edge_scalars ? g.edge_scalars->dim(1) : 0;
    if (scalars != model.config.edge_scalars) {
        throw ArgumentError("run_model: graph has " + std::to_string(scalars) + " edge scalars, model expects " +
                            std::to_string(model.config.edge_scalars));
    }
    const EdgeGeometry geo = relative_geometry(g, input.positions);
    const BasisSet basis(geo.vectors, model.max_degree(), model.config.basis);
    EdgeContext ctx;
    ctx.basis = &basis;
    ctx.radial_input = tape.constant(radial_input(geo.radii, g.edge_scalars ? &*g.edge_scalars : nullptr, model.config.radius_scale));
    ctx.src = make_index(g.src);
    ctx.dst = make_index(g.dst);
    ctx.nodes = g.nodes;
    for (std::size_t i = 0; i < g.nodes; ++i) {
        if (g.offsets[i] == g.offsets[i + 1]) throw ConfigError("run_model: node " + std::to_string(i) + " has an empty neighborhood");
    }

    FiberFeature h;
    for (const auto& [l, t] : input.features) h[l] = tape.constant(t);
    ModelOutput out;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        LayerOutput r = apply_layer(tape, store, model.layers[i], ctx, h, options);
        if (r.alpha) out.alphas.push_back(*r.alpha);
        h = std::move(r.features);
        if (model.config.nonlinearity && i + 1 < model.layers.size()) {
            h = norm_nonlinearity(tape, store, model.layers[i].prefix + "/norm", h);
        }
        out.layers.push_back(h);
    }
    out.features = std::move(h);
    return out;
}

}  // namespace se3
