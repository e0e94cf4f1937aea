#pragma once

#include "teddn/tensor.hpp"

#include <functional>

namespace teddn {

// Central-difference gradient of the scalar function `f` at `x`.
// `f` is re-evaluated 2 * x.size() times on perturbed copies.
Tensor finite_difference_grad(const std::function<real(const Tensor&)>& f, const Tensor& x,
                              real h = static_cast<real>(1e-5));

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|); shapes must match.
real relative_error(const Tensor& a, const Tensor& b);

// Default acceptance threshold for relative_error against the analytic grad.
inline constexpr real kGradCheckTolerance = static_cast<real>(1e-4);

} // namespace teddn
