#pragma once

#include "teddn/tensor.hpp"

#include <vector>

namespace teddn::ops {

// Broadcast result shape under trailing-dimension alignment; a size-1 extent
// stretches. Throws DimensionError naming both shapes when incompatible.
std::vector<long> broadcast_shape(const std::vector<long>& a, const std::vector<long>& b);

// 2-D matrix product (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

// Binary element-wise ops with trailing-dimension broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Unary element-wise ops. relu'(0) == 0 and abs'(0) == 0 by convention.
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);

// Mean / sum over an axis set; reduced axes are removed unless keep_dims.
// An empty axis set returns the input unchanged.
Tensor reduce_sum(const Tensor& x, std::vector<int> axes, bool keep_dims = false);
Tensor reduce_mean(const Tensor& x, std::vector<int> axes, bool keep_dims = false);
// Mean over every axis, producing a rank-0 scalar.
Tensor mean_all(const Tensor& x);

// Concatenation along an axis; gradients split back to the inputs.
Tensor concat(const std::vector<Tensor>& xs, int axis);
// Inverse of concat for the given part sizes.
std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<long>& sizes);
// Contiguous range [start, start+len) along one axis.
Tensor slice(const Tensor& x, int axis, long start, long len);

// Same data, new shape (element count must match).
Tensor reshape(const Tensor& x, std::vector<long> shape);
// Axis permutation; `axes` must be a permutation of 0..rank-1.
Tensor permute(const Tensor& x, const std::vector<int>& axes);
// Row gather from a 2-D table; backward scatter-adds into the table.
Tensor gather_rows(const Tensor& table, const std::vector<long>& rows);

// Conveniences built on the primitives above.
Tensor scale(const Tensor& x, real c);                      // x * c
Tensor shift(const Tensor& x, real c);                      // x + c
Tensor neg(const Tensor& x);                                // -x
Tensor expand(const Tensor& x, const std::vector<long>& shape); // materialized broadcast

// Test hook: when enabled, the tanh adjoint is deliberately perturbed so the
// finite-difference checker can prove it catches broken gradients.
void set_adjoint_fault_for_testing(bool enabled);

} // namespace teddn::ops
