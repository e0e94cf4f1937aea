#include "teddn/tape.hpp"

#include "teddn/error.hpp"

namespace teddn {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros(value.shape())) {}

void Parameter::zero_grad() {
    real* g = grad.data();
    for (long i = 0; i < grad.size(); ++i) g[i] = real(0);
}

Tensor Tape::watch(Parameter& p) {
    auto it = watched_.find(&p);
    if (it != watched_.end()) {
        return bind(p.value, it->second);
    }
    int node = record(p.value.shape(), Pull{});
    nodes_[node].keep_grad = true;
    hooks_.emplace_back(node, &p);
    watched_.emplace(&p, node);
    return bind(p.value, node);
}

Tensor Tape::watch(const Tensor& constant) {
    int node = record(constant.shape(), Pull{});
    nodes_[node].keep_grad = true;
    return bind(constant, node);
}

int Tape::record(std::vector<long> shape, Pull pull) {
    nodes_.push_back(Node{std::move(shape), Tensor{}, std::move(pull), false});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int node, const Tensor& g) {
    Node& n = nodes_.at(static_cast<std::size_t>(node));
    if (g.shape() != n.shape) {
        throw DimensionError("gradient shape " + g.shape_str() + " does not match node shape " +
                             shape_to_string(n.shape));
    }
    if (!n.grad.defined()) {
        n.grad = g.clone();
        return;
    }
    real* dst = n.grad.data();
    const real* src = g.data();
    for (long i = 0; i < g.size(); ++i) dst[i] += src[i];
}

Tensor Tape::bind(Tensor t, int node) {
    t.tape_ = this;
    t.node_ = node;
    return t;
}

Tape* Tape::joint(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->traced()) continue;
        if (tape == nullptr) {
            tape = t->tape();
        } else if (tape != t->tape()) {
            throw ContractError("operands recorded on different tapes");
        }
    }
    return tape;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this || loss.node() < 0) {
        throw ContractError("loss is not recorded on this tape");
    }
    if (loss.size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + loss.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor{};

    nodes_[loss.node()].grad = Tensor::full(loss.shape(), real(1));
    for (int i = loss.node(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.grad.defined()) continue;
        if (n.pull) {
            n.pull(n.grad, *this);
            if (!n.keep_grad) n.grad = Tensor{}; // interior grads are not needed past this point
        }
    }

    for (auto& [node, param] : hooks_) {
        const Tensor& g = nodes_[static_cast<std::size_t>(node)].grad;
        if (!g.defined()) continue;
        real* dst = param->grad.data();
        const real* src = g.data();
        for (long i = 0; i < g.size(); ++i) dst[i] += src[i];
    }
}

Tensor Tape::grad(const Tensor& t) const {
    if (t.tape() != this || t.node() < 0) {
        throw ContractError("tensor is not recorded on this tape");
    }
    const Node& n = nodes_[static_cast<std::size_t>(t.node())];
    if (!n.grad.defined()) return Tensor::zeros(n.shape);
    return n.grad;
}

} // namespace teddn
