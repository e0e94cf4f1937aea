#include "teddn/gradcheck.hpp"

#include "teddn/error.hpp"

#include <algorithm>
#include <cmath>

namespace teddn {

Tensor finite_difference_grad(const std::function<real(const Tensor&)>& f, const Tensor& x,
                              real h) {
    Tensor work = x.clone();
    Tensor grad = Tensor::zeros(x.shape());
    real* pw = work.data();
    real* pg = grad.data();
    const long n = x.size();
    for (long i = 0; i < n; ++i) {
        const real saved = pw[i];
        pw[i] = saved + h;
        const real fp = f(work);
        pw[i] = saved - h;
        const real fm = f(work);
        pw[i] = saved;
        pg[i] = (fp - fm) / (2 * h);
    }
    return grad;
}

real relative_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("relative_error: shapes " + a.shape_str() + " and " + b.shape_str() +
                             " differ");
    const real* pa = a.data();
    const real* pb = b.data();
    real worst = 0;
    const long n = a.size();
    for (long i = 0; i < n; ++i) {
        const real denom = std::max({static_cast<real>(1), std::fabs(pa[i]), std::fabs(pb[i])});
        worst = std::max(worst, std::fabs(pa[i] - pb[i]) / denom);
    }
    return worst;
}

} // namespace teddn
