#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "smat/tensor.hpp"

namespace smat::ag {

/// Named trainable tensors with matching gradient buffers. Iteration order
/// is the lexicographic name order, which makes checkpoints and optimizer
/// updates deterministic.
class ParameterSet {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
    };

    Tensor& add(const std::string& name, Tensor init);
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    Entry& entry(const std::string& name);

    void zero_grad();
    std::size_t scalar_count() const;
    std::size_t size() const { return entries_.size(); }

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    /// Value-equality of every tensor (names, shapes, data).
    bool same_values(const ParameterSet& other) const;

private:
    std::map<std::string, Entry> entries_;
};

class Graph;

/// Handle to a node on a Graph. Cheap to copy; only valid while the graph
/// lives.
class Var {
public:
    Var() = default;
    Var(Graph* g, int id) : graph_(g), id_(id) {}

    bool valid() const { return graph_ != nullptr; }
    Graph* graph() const { return graph_; }
    int id() const { return id_; }

    const Tensor& value() const;
    /// Gradient after Graph::backward; zero-filled if nothing flowed here.
    const Tensor& grad() const;
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
    bool requires_grad() const;

private:
    Graph* graph_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse. A graph built with record=false stores values
/// only (inference).
class Graph {
public:
    /// Receives the node's own value and incoming gradient.
    using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& out_grad)>;

    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }

    Var constant(Tensor t);
    /// Leaf that receives a gradient (used for input-gradient checks).
    Var variable(Tensor t);
    /// Leaf bound to a stored parameter. Repeated lookups of the same name
    /// return the same node.
    Var parameter(ParameterSet& params, const std::string& name);

    /// Seeds d(loss)/d(loss) = 1 on a 1x1 node, propagates, then adds each
    /// bound parameter's gradient into its ParameterSet entry.
    void backward(Var loss);

    // Op-author interface.
    Var make(Tensor value, const std::vector<Var>& parents, BackwardFn fn);
    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor& grad(int id);
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    struct ParamLink {
        int node;
        Tensor* grad;
    };

    bool record_;
    std::vector<Node> nodes_;
    std::vector<ParamLink> param_links_;
    std::map<const Tensor*, int> param_nodes_;
};

} // namespace smat::ag
