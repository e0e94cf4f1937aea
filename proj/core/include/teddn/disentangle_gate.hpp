#pragma once

#include "teddn/cwam.hpp"
#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>
#include <utility>

namespace teddn::gate {

// Gate network over the per-(t, i) feature [day | week | node], width
// 2*d_t + d_n, with CWAM channel scaling in front.
struct Params {
    cwam::Params attention;
    Parameter w1; // (2*d_t + d_n, d_g)
    Parameter w2; // (d_g, 1)
};

Params make(long d_t, long d_n, long d_g, long ratio, Rng& rng, const std::string& prefix);

// day/week: (T, d_t); nodes: (N, d_n) -> omega (T, N, 1), entries in (0, 1).
Tensor gate_values(const Tensor& day, const Tensor& week, const Tensor& nodes, Params& p,
                   Tape* tape);

// Batched form: day/week (B, T, d_t) -> omega (B, T, N, 1). CWAM pooling
// stays within each sample.
Tensor gate_values_batched(const Tensor& day, const Tensor& week, const Tensor& nodes, Params& p,
                           Tape* tape);

// X1 = X * Omega (broadcast over channels), X2 = X - X1.
std::pair<Tensor, Tensor> split(const Tensor& x, const Tensor& omega);

} // namespace teddn::gate
