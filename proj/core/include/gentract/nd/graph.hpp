#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gentract/nd/tensor.hpp"

namespace gentract::nd {

class Graph;

/// Handle to one node of a Graph. Cheap to copy; valid for the lifetime of
/// the graph that produced it.
struct Var {
    Graph* graph = nullptr;
    int id = -1;

    const Tensor& value() const;
    const std::vector<int>& shape() const;
};

/// Gradients of one scalar loss with respect to the graph's parameters,
/// keyed by the parameter tensor they were registered from. Parameters the
/// loss never touched report zero gradients.
class GradientMap {
public:
    Tensor grad(const Tensor& param) const;
    bool touched(const Tensor& param) const;

private:
    friend class Graph;
    std::unordered_map<const Tensor*, Tensor> grads_;
    std::unordered_map<const Tensor*, std::vector<int>> shapes_;
};

/// Forward trace of primitive operations. Nodes are appended in execution
/// order (so the trace is topologically sorted); backward replays it in
/// reverse without mutating any forward value.
class Graph {
public:
    using BackwardFn = std::function<void(const Graph&, int self, std::vector<Tensor>& grads)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Constant leaf: participates in forward only.
    Var input(Tensor value);

    /// Differentiable leaf bound to a master tensor. The value is copied at
    /// registration time; repeated registration of the same tensor returns
    /// the existing node so fan-out accumulates naturally.
    Var param(Tensor& master);

    int add_node(const char* op, Tensor value, std::vector<int> inputs, BackwardFn backward);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    const char* op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse-mode gradient of a scalar loss. Repeated calls on the same
    /// graph return identical results.
    GradientMap backward(Var loss) const;

    /// Gradient buffer accessor for backward functions: allocates a zero
    /// tensor congruent with node `id` on first touch.
    Tensor& grad_buf(int id, std::vector<Tensor>& grads) const;

private:
    struct Node {
        const char* op;
        Tensor value;
        std::vector<int> inputs;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::deque<Node> nodes_;
    std::vector<std::pair<const Tensor*, int>> params_;
    std::unordered_map<const Tensor*, int> param_ids_;
};

}  // namespace gentract::nd
