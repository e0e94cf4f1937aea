#pragma once

#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>

namespace teddn::te {

// Scalar affine parameters of the importance normalization.
struct Params {
    Parameter gamma; // init 1
    Parameter beta;  // init 0
    real epsilon;    // > 0
};

Params make(real epsilon, const std::string& prefix);

// Mean over the node axis: (N, d) -> (d).
Tensor global_descriptor(const Tensor& x);

// Per-node dot product with the descriptor: c_i = <g, x_i>.
Tensor importance(const Tensor& g, const Tensor& x);

// (c - mean) / (population std + epsilon).
Tensor normalize_coeffs(const Tensor& c, real epsilon);

// x_i scaled by sigmoid(gamma * c_hat_i + beta).
Tensor enhance(const Tensor& x, const Tensor& c_hat, Params& p, Tape* tape);

// Full chain on one step: descriptor -> importance -> normalize -> enhance.
Tensor enhance_step(const Tensor& x, Params& p, Tape* tape);

// Same chain applied independently per leading index; the node axis is
// rank-2, features are the last axis. Accepts (N, d), (T, N, d), (B, T, N, d).
Tensor enhance_sequence(const Tensor& x, Params& p, Tape* tape);

} // namespace teddn::te
