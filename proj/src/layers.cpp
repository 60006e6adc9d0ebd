#include "se3/layers.hpp"

#include <cmath>

#include "se3/error.hpp"

namespace se3 {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (double& v : t.data) v = u(rng);
    return t;
}

std::string pair_name(int l, int k) { return std::to_string(l) + "_" + std::to_string(k); }

std::size_t dim_of(int l) { return static_cast<std::size_t>(2 * l + 1); }

Var degree_messages(Tape& tape, const ParamStore& store, const std::map<std::pair<int, int>, RadialProfile>& nets,
                    int l, const EdgeContext& ctx, const FiberFeature& in) {
    std::optional<Var> total;
    for (const auto& [k, f] : in) {
        const RadialProfile& net = nets.at({l, k});
        Var phi = radial_forward(tape, store, net, ctx.radial_input);
        Var m = edge_message(phi, ctx.basis->block(l, k).values, f, ctx.src);
        total = total ? add(*total, m) : m;
    }
    return *total;
}

}  // namespace

Layer make_layer(ParamStore& store, const std::string& prefix, const LayerSpec& spec, std::mt19937_64& rng) {
    if (spec.in.entries().empty()) throw ConfigError(prefix + ": input fiber is empty");
    if (spec.out.entries().empty()) throw ConfigError(prefix + ": output fiber is empty");
    if (spec.radial_hidden == 0) throw ConfigError(prefix + ": radial_hidden must be positive");
    Layer layer{spec, prefix, {}, {}, {}};
    if (spec.kind == LayerKind::Attention) {
        if (spec.heads == 0) throw ConfigError(prefix + ": heads must be positive");
        for (const auto& [l, c] : spec.out.entries()) {
            if (c % spec.heads != 0) {
                throw ConfigError(prefix + ": heads=" + std::to_string(spec.heads) + " does not divide the " +
                                  std::to_string(c) + " degree-" + std::to_string(l) + " channels");
            }
        }
        layer.key_fiber = spec.out.intersect(spec.in);
        if (layer.key_fiber.entries().empty()) {
            throw ConfigError(prefix + ": attention needs an output degree that is also an input degree");
        }
    }
    const std::size_t inputs = 1 + spec.edge_scalars;
    for (const auto& [l, co] : spec.out.entries()) {
        for (const auto& [k, ci] : spec.in.entries()) {
            const auto nj = static_cast<std::size_t>(l + k - std::abs(l - k) + 1);
            layer.value_nets.emplace(std::pair{l, k}, make_radial_profile(store, prefix + "/value/" + pair_name(l, k), inputs,
                                                                        spec.radial_hidden, nj, ci, co, rng));
        }
    }
    for (const auto& [l, c] : layer.key_fiber.entries()) {
        for (const auto& [k, ci] : spec.in.entries()) {
            const auto nj = static_cast<std::size_t>(l + k - std::abs(l - k) + 1);
            layer.key_nets.emplace(std::pair{l, k}, make_radial_profile(store, prefix + "/key/" + pair_name(l, k), inputs,
                                                                      spec.radial_hidden, nj, ci, c, rng));
        }
        const std::size_t ci = spec.in.channels(l);
        store.add(prefix + "/query/" + std::to_string(l), uniform({c, ci}, std::sqrt(3.0 / static_cast<double>(ci)), rng));
    }
    if (spec.self_interaction == SelfInteractionKind::Linear) {
        register_linear_self_interaction(store, prefix + "/si", spec.in, spec.out, rng);
    } else {
        register_attentive_self_interaction(store, prefix + "/si", spec.in, spec.out, rng);
    }
    return layer;
}

FiberFeature tfn_messages(Tape& tape, const ParamStore& store, const Layer& layer, const EdgeContext& ctx,
                          const FiberFeature& in) {
    FiberFeature out;
    for (const auto& [l, c] : layer.spec.out.entries()) {
        out[l] = segment_sum(degree_messages(tape, store, layer.value_nets, l, ctx, in), ctx.dst, ctx.nodes);
    }
    return out;
}

Var attention_weights(Var logits, const EdgeContext& ctx) { return segment_softmax(logits, ctx.dst, ctx.nodes); }

LayerOutput apply_layer(Tape& tape, const ParamStore& store, const Layer& layer, const EdgeContext& ctx,
                        const FiberFeature& in, const LayerOptions& options) {
    const LayerSpec& spec = layer.spec;
    check_conforms(in, spec.in, ctx.nodes, layer.prefix.c_str());
    LayerOutput result;
    FiberFeature aggregated;
    if (spec.kind == LayerKind::Tfn) {
        aggregated = tfn_messages(tape, store, layer, ctx, in);
    } else {
        const std::size_t edges = ctx.src->size();
        Var alpha;
        if (options.uniform_attention) {
            std::vector<double> degree(ctx.nodes, 0.0);
            for (std::size_t i : *ctx.dst) degree[i] += 1.0;
            Tensor a({edges, spec.heads});
            for (std::size_t e = 0; e < edges; ++e) {
                for (std::size_t h = 0; h < spec.heads; ++h) a[e * spec.heads + h] = 1.0 / degree[(*ctx.dst)[e]];
            }
            alpha = tape.constant(std::move(a));
        } else {
            std::optional<Var> logits;
            std::size_t key_width = 0;
            for (const auto& [l, c] : layer.key_fiber.entries()) {
                Var keys = degree_messages(tape, store, layer.key_nets, l, ctx, in);
                Var q = channel_mix(tape.param(store, layer.prefix + "/query/" + std::to_string(l)), in.at(l));
                Var dot = edge_dot(q, keys, ctx.dst, spec.heads);
                logits = logits ? add(*logits, dot) : dot;
                key_width += c / spec.heads * dim_of(l);
            }
            if (spec.scale_logits) logits = scale(*logits, 1.0 / std::sqrt(static_cast<double>(key_width)));
            alpha = attention_weights(*logits, ctx);
        }
        for (const auto& [l, c] : spec.out.entries()) {
            aggregated[l] = attend(alpha, degree_messages(tape, store, layer.value_nets, l, ctx, in), ctx.dst, ctx.nodes);
        }
        result.alpha = alpha;
    }
    const FiberFeature si = spec.self_interaction == SelfInteractionKind::Linear
                                ? linear_self_interaction(tape, store, layer.prefix + "/si", spec.in, spec.out, in)
                                : attentive_self_interaction(tape, store, layer.prefix + "/si", spec.in, spec.out, in);
    for (auto& [l, v] : aggregated) {
        auto it = si.find(l);
        result.features[l] = it == si.end() ? v : add(v, it->second);
    }
    return result;
}

void register_linear_self_interaction(ParamStore& store, const std::string& prefix, const Fiber& in,
                                      const Fiber& out, std::mt19937_64& rng) {
    for (const auto& [l, co] : out.entries()) {
        const std::size_t ci = in.channels(l);
        if (ci == 0) continue;
        store.add(prefix + "/" + std::to_string(l), uniform({co, ci}, std::sqrt(3.0 / static_cast<double>(ci)), rng));
    }
}

FiberFeature linear_self_interaction(Tape& tape, const ParamStore& store, const std::string& prefix,
                                     const Fiber& in, const Fiber& out, const FiberFeature& feats) {
    FiberFeature result;
    for (const auto& [l, co] : out.entries()) {
        if (!in.has(l)) continue;
        auto it = feats.find(l);
        if (it == feats.end()) throw ArgumentError(prefix + ": missing degree-" + std::to_string(l) + " features");
        result[l] = channel_mix(tape.param(store, prefix + "/" + std::to_string(l)), it->second);
    }
    return result;
}

void register_attentive_self_interaction(ParamStore& store, const std::string& prefix, const Fiber& in,
                                         const Fiber& out, std::mt19937_64& rng) {
    for (const auto& [l, co] : out.entries()) {
        const std::size_t ci = in.channels(l);
        if (ci == 0) continue;
        const std::size_t g = ci * ci;
        const std::string p = prefix + "/" + std::to_string(l);
        store.add(p + "/w0", uniform({g, g}, std::sqrt(6.0 / static_cast<double>(g)), rng));
        store.add(p + "/b0", Tensor({g}, 0.0));
        store.add(p + "/w1", uniform({co * ci, g}, std::sqrt(3.0 / static_cast<double>(g)) / std::sqrt(static_cast<double>(ci)), rng));
        store.add(p + "/b1", Tensor({co * ci}, 0.0));
    }
}

Var attentive_weights(Tape& tape, const ParamStore& store, const std::string& prefix, int degree,
                      std::size_t c_out, Var f) {
    const std::string p = prefix + "/" + std::to_string(degree);
    const std::size_t n = f.shape()[0], ci = f.shape()[1];
    Var h = relu(linear(gram(f), tape.param(store, p + "/w0"), tape.param(store, p + "/b0")));
    Var w = linear(h, tape.param(store, p + "/w1"), tape.param(store, p + "/b1"));
    return reshape(w, {n, c_out, ci});
}

FiberFeature attentive_self_interaction(Tape& tape, const ParamStore& store, const std::string& prefix,
                                        const Fiber& in, const Fiber& out, const FiberFeature& feats) {
    FiberFeature result;
    for (const auto& [l, co] : out.entries()) {
        if (!in.has(l)) continue;
        auto it = feats.find(l);
        if (it == feats.end()) throw ArgumentError(prefix + ": missing degree-" + std::to_string(l) + " features");
        result[l] = node_mix(attentive_weights(tape, store, prefix, l, co, it->second), it->second);
    }
    return result;
}

void register_norm_nonlinearity(ParamStore& store, const std::string& prefix, const Fiber& fiber) {
    for (const auto& [l, c] : fiber.entries()) {
        store.add(prefix + "/" + std::to_string(l) + "/gamma", Tensor({c}, 1.0));
        store.add(prefix + "/" + std::to_string(l) + "/beta", Tensor({c}, 0.0));
    }
}

FiberFeature norm_nonlinearity(Tape& tape, const ParamStore& store, const std::string& prefix,
                               const FiberFeature& feats) {
    FiberFeature out;
    for (const auto& [l, f] : feats) {
        const std::string p = prefix + "/" + std::to_string(l);
        Var norm = channel_norm(f);
        Var gain = relu(layer_norm(norm, tape.param(store, p + "/gamma"), tape.param(store, p + "/beta")));
        out[l] = scale_channels(f, div(gain, norm));
    }
    return out;
}

Var invariant_pool(const FiberFeature& feats, IndexList node_segment, std::size_t segments) {
    auto it = feats.find(0);
    if (it == feats.end()) throw ConfigError("invariant_pool: features have no degree-0 channels");
    const Shape& s = it->second.shape();
    return segment_max(reshape(it->second, {s[0], s[1]}), std::move(node_segment), segments);
}

}  // namespace se3
