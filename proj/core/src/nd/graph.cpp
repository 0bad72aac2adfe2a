#include "gentract/nd/graph.hpp"

#include <stdexcept>

namespace gentract::nd {

const Tensor& Var::value() const { return graph->value(id); }
const std::vector<int>& Var::shape() const { return graph->value(id).shape(); }

Tensor GradientMap::grad(const Tensor& param) const {
    auto it = grads_.find(&param);
    if (it != grads_.end()) return it->second;
    auto sh = shapes_.find(&param);
    if (sh != shapes_.end()) return Tensor::zeros(sh->second);
    // Never registered on the trace at all: zero gradient, not an error.
    return Tensor::zeros(param.shape());
}

bool GradientMap::touched(const Tensor& param) const {
    auto it = grads_.find(&param);
    if (it == grads_.end()) return false;
    for (double g : it->second.vec()) {
        if (g != 0.0) return true;
    }
    return false;
}

Var Graph::input(Tensor value) {
    value.check_finite("graph input");
    nodes_.push_back(Node{"input", std::move(value), {}, false, nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Tensor& master) {
    auto it = param_ids_.find(&master);
    if (it != param_ids_.end()) return Var{this, it->second};
    master.check_finite("graph param");
    nodes_.push_back(Node{"param", master, {}, true, nullptr});
    const int id = static_cast<int>(nodes_.size()) - 1;
    params_.emplace_back(&master, id);
    param_ids_.emplace(&master, id);
    return Var{this, id};
}

int Graph::add_node(const char* op, Tensor value, std::vector<int> inputs, BackwardFn backward) {
    value.check_finite(op);
    bool rg = false;
    for (int in : inputs) rg = rg || requires_grad(in);
    nodes_.push_back(Node{op, std::move(value), std::move(inputs), rg, rg ? std::move(backward) : nullptr});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id, std::vector<Tensor>& grads) const {
    Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.empty()) g = Tensor::zeros(value(id).shape());
    return g;
}

GradientMap Graph::backward(Var loss) const {
    if (loss.graph != this) throw std::logic_error("backward: loss from a different graph");
    if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size()))
        throw std::logic_error("backward: invalid loss node");
    if (value(loss.id).numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");

    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss.id)] = Tensor::full(value(loss.id).shape(), 1.0);

    for (int id = loss.id; id >= 0; --id) {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (!node.requires_grad || !node.backward) continue;
        if (grads[static_cast<std::size_t>(id)].empty()) continue;  // not on the path to the loss
        node.backward(*this, id, grads);
    }

    GradientMap out;
    for (const auto& [master, id] : params_) {
        out.shapes_.emplace(master, value(id).shape());
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (!g.empty()) out.grads_.emplace(master, std::move(g));
    }
    return out;
}

}  // namespace gentract::nd
