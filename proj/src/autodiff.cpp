#include "se3/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "se3/error.hpp"

namespace se3 {

namespace {

const std::set<std::string, std::less<>>& registry() {
    static const std::set<std::string, std::less<>> names = {
        "constant", "param", "linear", "layer_norm", "relu", "add", "sub", "mul", "div",
        "scale", "sum", "reshape", "channel_mix", "node_mix", "gram", "channel_norm",
        "scale_channels", "edge_message", "edge_dot", "segment_softmax", "attend",
        "segment_sum", "segment_max",
    };
    return names;
}

}  // namespace

bool primitive_registered(std::string_view name) { return registry().count(name) != 0; }

std::vector<std::string> registered_primitives() { return {registry().begin(), registry().end()}; }

// ---- ParamStore -------------------------------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw ArgumentError("ParamStore: duplicate parameter '" + name + "'");
    Tensor grad(init.shape, 0.0);
    order_.push_back(name);
    return entries_.emplace(name, Entry{std::move(init), std::move(grad)}).first->second.value;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ArgumentError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return const_cast<Entry&>(entry(name)).value; }
const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return const_cast<Entry&>(entry(name)).grad; }
const Tensor& ParamStore::grad(const std::string& name) const { return entry(name).grad; }

void ParamStore::zero_grad() {
    for (auto& [name, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

// ---- Tape ----------------------------------------------------------------------------------

const Tensor& Var::value() const {
    if (tape == nullptr) throw ArgumentError("Var: not attached to a tape");
    return tape->value(id);
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{"constant", std::move(value), {}, {}, false, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, const std::string& name) {
    nodes_.push_back(Node{"param", store.value(name), {}, {}, true, name});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(std::string_view primitive, Tensor value, std::vector<Var> inputs, Backward backward) {
    if (!primitive_registered(primitive)) {
        throw CapabilityError("autodiff: unregistered primitive '" + std::string(primitive) + "'");
    }
    Node node{std::string(primitive), std::move(value), {}, {}, false, {}};
    for (const Var& v : inputs) {
        if (v.tape != this) throw ArgumentError("autodiff: input of '" + node.primitive + "' is on another tape");
        node.inputs.push_back(v.id);
        node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ArgumentError("Tape::backward: loss is on another tape");
    grads_.assign(nodes_.size(), Tensor{});
    has_grad_.assign(nodes_.size(), false);
    grads_[loss.id] = Tensor(nodes_[loss.id].value.shape, 1.0);
    has_grad_[loss.id] = true;
    std::vector<Tensor*> slots;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!has_grad_[i] || !node.backward) continue;
        slots.assign(node.inputs.size(), nullptr);
        for (std::size_t j = 0; j < node.inputs.size(); ++j) {
            const std::size_t in = node.inputs[j];
            if (!nodes_[in].requires_grad) continue;
            if (!has_grad_[in]) {
                grads_[in] = Tensor(nodes_[in].value.shape, 0.0);
                has_grad_[in] = true;
            }
            slots[j] = &grads_[in];
        }
        node.backward(grads_[i], slots);
    }
}

Tensor Tape::grad(Var v) const {
    if (v.id < has_grad_.size() && has_grad_[v.id]) return grads_[v.id];
    return Tensor(nodes_[v.id].value.shape, 0.0);
}

void Tape::accumulate(ParamStore& store) const {
    for (std::size_t i = 0; i < nodes_.size() && i < has_grad_.size(); ++i) {
        if (nodes_[i].param.empty() || !has_grad_[i]) continue;
        Tensor& g = store.grad(nodes_[i].param);
        const Tensor& src = grads_[i];
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
    }
}

// ---- Adam ----------------------------------------------------------------------------------

Tensor& Adam::first_moment(const std::string& name, const Shape& shape) {
    auto it = m_.find(name);
    if (it == m_.end()) it = m_.emplace(name, Tensor(shape, 0.0)).first;
    return it->second;
}

Tensor& Adam::second_moment(const std::string& name, const Shape& shape) {
    auto it = v_.find(name);
    if (it == v_.end()) it = v_.emplace(name, Tensor(shape, 0.0)).first;
    return it->second;
}

void Adam::step(ParamStore& store) {
    for (const auto& name : store.names()) {
        for (double g : store.grad(name).data) {
            if (!std::isfinite(g)) throw NumericError("Adam: non-finite gradient in parameter '" + name + "'");
        }
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (const auto& name : store.names()) {
        Tensor& p = store.value(name);
        const Tensor& g = store.grad(name);
        Tensor& m = first_moment(name, p.shape);
        Tensor& v = second_moment(name, p.shape);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            p[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        }
    }
}

}  // namespace se3
