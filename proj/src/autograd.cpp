#include "smat/autograd.hpp"

#include <stdexcept>

namespace smat::ag {

Tensor& ParameterSet::add(const std::string& name, Tensor init) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    Tensor grad = Tensor::zeros_like(init);
    auto [it, _] = entries_.emplace(name, Entry{std::move(init), std::move(grad)});
    return it->second.value;
}

ParameterSet::Entry& ParameterSet::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

Tensor& ParameterSet::value(const std::string& name) { return entry(name).value; }

const Tensor& ParameterSet::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.value;
}

Tensor& ParameterSet::grad(const std::string& name) { return entry(name).grad; }

void ParameterSet::zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
}

bool ParameterSet::same_values(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
        if (a->first != b->first) return false;
        if (!a->second.value.same_shape(b->second.value)) return false;
        for (std::size_t i = 0; i < a->second.value.size(); ++i)
            if (a->second.value[i] != b->second.value[i]) return false;
    }
    return true;
}

const Tensor& Var::value() const { return graph_->value(id_); }

const Tensor& Var::grad() const { return graph_->grad(id_); }

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Var Graph::constant(Tensor t) {
    nodes_.push_back(Node{std::move(t), {}, false, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::variable(Tensor t) {
    nodes_.push_back(Node{std::move(t), {}, record_, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::parameter(ParameterSet& params, const std::string& name) {
    auto& e = params.entry(name);
    auto it = param_nodes_.find(&e.value);
    if (it != param_nodes_.end()) return Var(this, it->second);
    Var v = variable(e.value);
    param_nodes_.emplace(&e.value, v.id());
    if (record_) param_links_.push_back({v.id(), &e.grad});
    return v;
}

Var Graph::make(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
    bool needs = false;
    if (record_) {
        for (const Var& p : parents) {
            if (p.graph() != this) throw std::invalid_argument("op mixes vars from different graphs");
            needs = needs || requires_grad(p.id());
        }
    }
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Graph::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Graph::backward(Var loss) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    if (loss.graph() != this || value(loss.id()).size() != 1)
        throw std::invalid_argument("backward needs a scalar node of this graph");
    grad(loss.id())[0] = 1.0;
    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.backward && n.grad.size() == n.value.size()) n.backward(*this, n.value, n.grad);
    }
    for (const ParamLink& link : param_links_) {
        const Node& n = nodes_[static_cast<std::size_t>(link.node)];
        if (n.grad.size() != n.value.size()) continue;
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*link.grad)[i] += n.grad[i];
    }
}

} // namespace smat::ag
