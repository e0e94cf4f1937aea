#pragma once

#include "teddn/tensor.hpp"

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace teddn {

// A tensor registered for gradient accumulation and optimizer updates.
// grad always has the same shape as value and starts at zero.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string name_, Tensor value_);
    void zero_grad();
    long size() const { return value.size(); }
};

// Reverse-mode tape. Operations append nodes during the forward pass;
// backward() replays adjoints in reverse creation order and accumulates the
// results into Parameter::grad. Repeated backward calls accumulate further.
// A tape belongs to one logical owner; it is not thread-safe.
class Tape {
public:
    using Pull = std::function<void(const Tensor& upstream, Tape&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Traced leaf wired to a parameter; repeated watches of the same
    // parameter return the same leaf.
    Tensor watch(Parameter& p);
    // Traced leaf without parameter hookup (gradients readable via grad()).
    Tensor watch(const Tensor& constant);

    // Reverse sweep from a scalar loss recorded on this tape.
    void backward(const Tensor& loss);

    // Gradient of a traced tensor from the most recent backward() call.
    // Leaf gradients are retained; interior gradients are released during the
    // sweep and come back as zeros.
    Tensor grad(const Tensor& t) const;

    std::size_t node_count() const { return nodes_.size(); }

    // --- op plumbing ---
    int record(std::vector<long> shape, Pull pull);
    void accumulate(int node, const Tensor& g);
    Tensor bind(Tensor t, int node);

    // The common tape of the traced inputs (nullptr if none are traced).
    // Throws ContractError if two inputs live on different tapes.
    static Tape* joint(std::initializer_list<const Tensor*> inputs);

private:
    struct Node {
        std::vector<long> shape;
        Tensor grad;
        Pull pull;
        bool keep_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<int, Parameter*>> hooks_;
    std::unordered_map<const Parameter*, int> watched_;
};

} // namespace teddn
