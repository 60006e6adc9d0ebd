#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "se3/tensor.hpp"

namespace se3 {

/// Named learnable arrays with matching gradient buffers, kept in insertion order.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }
    void zero_grad();
    std::size_t parameter_count() const;

private:
    struct Entry {
        Tensor value;
        Tensor grad;
    };
    const Entry& entry(const std::string& name) const;

    std::vector<std::string> order_;
    std::map<std::string, Entry> entries_;
};

/// Names of the primitives a tape may record. Recording anything else throws,
/// naming the offending primitive.
bool primitive_registered(std::string_view name);
std::vector<std::string> registered_primitives();

class Tape;

/// Handle to one tape slot.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
};

/// grad_in[i] is null when input i does not need a gradient.
using Backward = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

/// Append-only record of one evaluation. Slots are written once, in forward order.
class Tape {
public:
    Var constant(Tensor value);
    /// Leaf bound to store[name]; backward() gradients land in the store via accumulate().
    Var param(const ParamStore& store, const std::string& name);
    Var record(std::string_view primitive, Tensor value, std::vector<Var> inputs, Backward backward);

    void backward(Var loss);
    /// Gradient of the last backward() loss w.r.t. a slot (zeros if unreached).
    Tensor grad(Var v) const;
    /// Adds parameter-leaf gradients into store.grad(name).
    void accumulate(ParamStore& store) const;

    std::size_t size() const { return nodes_.size(); }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const std::string& primitive(std::size_t id) const { return nodes_[id].primitive; }

private:
    struct Node {
        std::string primitive;
        Tensor value;
        std::vector<std::size_t> inputs;
        Backward backward;
        bool requires_grad = false;
        std::string param;
    };
    std::deque<Node> nodes_;  // stable addresses: Var::value() references survive later records
    std::vector<Tensor> grads_;
    std::vector<bool> has_grad_;
};

struct AdamConfig {
    double lr = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// One update from store gradients. Throws NumericError naming the first non-finite gradient.
    void step(ParamStore& store);

    std::int64_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

    // Moment buffers, exposed for checkpointing.
    Tensor& first_moment(const std::string& name, const Shape& shape);
    Tensor& second_moment(const std::string& name, const Shape& shape);
    void set_steps(std::int64_t t) { steps_ = t; }
    const std::map<std::string, Tensor>& first_moments() const { return m_; }
    const std::map<std::string, Tensor>& second_moments() const { return v_; }

private:
    AdamConfig config_;
    std::int64_t steps_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

inline IndexList make_index(std::vector<std::size_t> idx) {
    return std::make_shared<const std::vector<std::size_t>>(std::move(idx));
}

// ---- primitives -----------------------------------------------------------------------------

/// x [.., I] times W [O, I] transposed, plus b [O].
Var linear(Var x, Var w, Var b);
/// Normalizes over the last axis, then applies gamma/beta of that width.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var relu(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var x, double c);
Var sum(Var x);
Var reshape(Var x, Shape shape);

/// W [Co, Ci] applied to the channel axis of f [N, Ci, d].
Var channel_mix(Var w, Var f);
/// Per-node weights w [N, Co, Ci] applied to f [N, Ci, d].
Var node_mix(Var w, Var f);
/// Channel inner products of f [N, C, d] -> [N, C*C].
Var gram(Var f);
/// sqrt(sum_d f^2 + eps) of f [N, C, d] -> [N, C].
Var channel_norm(Var f, double eps = 1e-12);
/// f [N, C, d] times s [N, C].
Var scale_channels(Var f, Var s);

/// Fused kernel application over edges:
/// out[e, co, :] = sum_J sum_ci phi[e, J, co, ci] basis[e, J] f[src[e], ci, :].
/// phi [E, nJ, Co, Ci], basis [E, nJ, dl, dk] (constant), f [N, Ci, dk] -> [E, Co, dl].
Var edge_message(Var phi, std::shared_ptr<const Tensor> basis, Var f, IndexList src);
/// Per-head logits: q [N, C, d] at dst[e] dotted with k [E, C, d] over each head's channels -> [E, H].
Var edge_dot(Var q, Var k, IndexList dst, std::size_t heads);
/// Softmax of x [E, H] over the edges sharing a segment, per column, max-subtracted.
Var segment_softmax(Var x, IndexList segment, std::size_t segments);
/// out[dst[e], c, :] += alpha[e, head(c)] v[e, c, :]; alpha [E, H], v [E, C, d] -> [segments, C, d].
Var attend(Var alpha, Var v, IndexList dst, std::size_t segments);
/// Row sums of x [E, ...] grouped by segment -> [segments, ...].
Var segment_sum(Var x, IndexList segment, std::size_t segments);
/// Row maxima of x [N, F] grouped by segment -> [segments, F]. Every segment must be non-empty.
Var segment_max(Var x, IndexList segment, std::size_t segments);

}  // namespace se3
