#pragma once

#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>
#include <vector>

namespace teddn::gc {

// Adaptive adjacency: two node embeddings, two mixing maps, a saturation
// factor.
struct GraphParams {
    Parameter e1; // (N, d_g)
    Parameter e2; // (N, d_g)
    Parameter w1; // (d_g, d_g)
    Parameter w2; // (d_g, d_g)
    real alpha;
};

// Residual propagation and hop fusion.
struct PropagationParams {
    real beta_res; // in [0, 1]
    long hops;     // k >= 1
    Parameter fuse; // (k * D, D)
};

GraphParams make_graph(long nodes, long d_g, real alpha, Rng& rng, const std::string& prefix);
PropagationParams make_propagation(real beta_res, long hops, long width, Rng& rng,
                                   const std::string& prefix);

// A = relu(tanh(alpha (M - M^T))), M = tanh(alpha E1 W1) tanh(alpha E2 W2)^T.
Tensor learn_adjacency(GraphParams& p, Tape* tape);
// Same computation with the parameters passed individually (streams may
// share the node embeddings while owning their mixers).
Tensor learn_adjacency(Parameter& e1, Parameter& e2, Parameter& w1, Parameter& w2, real alpha,
                       Tape* tape);

// P = D^-1 (A + I); every row sums to 1.
Tensor normalize_adjacency(const Tensor& a);

// H^(0) = H_in; H^(j) = beta H_in + (1 - beta) P H^(j-1); returns H^(0..k).
// H_in is (N, D) or batched (B, N, D); P is (N, N).
std::vector<Tensor> propagate(const Tensor& h_in, const Tensor& p, real beta_res, long hops);
std::vector<Tensor> propagate(const Tensor& h_in, const Tensor& p, const PropagationParams& pp);

// Concatenate the first k hop states on the feature axis and map through
// `fuse`.
Tensor hop_fusion(const std::vector<Tensor>& hops, long k, const Tensor& fuse);

// learn_adjacency -> normalize -> propagate -> hop_fusion.
Tensor forward(const Tensor& h_in, GraphParams& gp, PropagationParams& pp, Tape* tape);

// First line holds N, then N rows of N comma-separated values.
void export_adjacency_csv(const Tensor& a, const std::string& path);

} // namespace teddn::gc
