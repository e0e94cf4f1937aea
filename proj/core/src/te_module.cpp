#include "teddn/te_module.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

namespace teddn::te {

Params make(real epsilon, const std::string& prefix) {
    if (epsilon <= 0)
        throw ConfigError("te: epsilon must be positive, got " + std::to_string(epsilon));
    return Params{
        Parameter(prefix + ".gamma", Tensor::scalar(1)),
        Parameter(prefix + ".beta", Tensor::scalar(0)),
        epsilon,
    };
}

Tensor global_descriptor(const Tensor& x) {
    if (x.rank() != 2) throw ContractError("te global_descriptor: expected (N, d), got " + x.shape_str());
    return ops::reduce_mean(x, {0});
}

Tensor importance(const Tensor& g, const Tensor& x) {
    if (g.rank() != 1 || x.rank() != 2 || g.extent(0) != x.extent(1))
        throw DimensionError("te importance: descriptor " + g.shape_str() +
                             " does not match features of " + x.shape_str());
    return ops::reduce_sum(ops::mul(x, g), {1});
}

Tensor normalize_coeffs(const Tensor& c, real epsilon) {
    if (c.rank() != 1) throw ContractError("te normalize_coeffs: expected rank 1, got " + c.shape_str());
    Tensor mu = ops::reduce_mean(c, {0}, true);
    Tensor centered = ops::sub(c, mu);
    Tensor variance = ops::reduce_mean(ops::mul(centered, centered), {0}, true);
    Tensor sigma = ops::sqrt(variance);
    return ops::div(centered, ops::shift(sigma, epsilon));
}

Tensor enhance(const Tensor& x, const Tensor& c_hat, Params& p, Tape* tape) {
    if (x.rank() != 2 || c_hat.rank() != 1 || c_hat.extent(0) != x.extent(0))
        throw DimensionError("te enhance: coefficients " + c_hat.shape_str() +
                             " do not match nodes of " + x.shape_str());
    Tensor gamma = tape ? tape->watch(p.gamma) : p.gamma.value;
    Tensor beta = tape ? tape->watch(p.beta) : p.beta.value;
    Tensor a = ops::add(ops::mul(c_hat, gamma), beta);
    return ops::mul(x, ops::reshape(ops::sigmoid(a), {x.extent(0), 1}));
}

Tensor enhance_step(const Tensor& x, Params& p, Tape* tape) {
    Tensor g = global_descriptor(x);
    Tensor c = importance(g, x);
    return enhance(x, normalize_coeffs(c, p.epsilon), p, tape);
}

Tensor enhance_sequence(const Tensor& x, Params& p, Tape* tape) {
    if (x.rank() < 2)
        throw ContractError("te enhance_sequence: expected at least (N, d), got " + x.shape_str());
    const int node_axis = x.rank() - 2;
    const int feat_axis = x.rank() - 1;
    Tensor g = ops::reduce_mean(x, {node_axis}, true);          // (..., 1, d)
    Tensor c = ops::reduce_sum(ops::mul(x, g), {feat_axis}, true); // (..., N, 1)
    Tensor mu = ops::reduce_mean(c, {node_axis}, true);
    Tensor centered = ops::sub(c, mu);
    Tensor variance = ops::reduce_mean(ops::mul(centered, centered), {node_axis}, true);
    Tensor c_hat = ops::div(centered, ops::shift(ops::sqrt(variance), p.epsilon));
    Tensor gamma = tape ? tape->watch(p.gamma) : p.gamma.value;
    Tensor beta = tape ? tape->watch(p.beta) : p.beta.value;
    Tensor a = ops::add(ops::mul(c_hat, gamma), beta);
    return ops::mul(x, ops::sigmoid(a));
}

} // namespace teddn::te
