#pragma once

#include "teddn/rng.hpp"
#include "teddn/tensor.hpp"

#include <cmath>
#include <vector>

namespace teddn::testing {

inline Tensor random_tensor(Rng& rng, std::vector<long> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(lo, hi));
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return 1e30;
    double worst = 0;
    for (long i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return worst;
}

inline bool approx_equal(const Tensor& a, const Tensor& b, double tol = 1e-12) {
    return max_abs_diff(a, b) <= tol;
}

} // namespace teddn::testing
