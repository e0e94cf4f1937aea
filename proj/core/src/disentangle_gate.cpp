#include "teddn/disentangle_gate.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>

namespace teddn::gate {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

// [day | week | node] feature cube; day/week (T, d_t), nodes (N, d_n)
// -> (T, N, 2*d_t + d_n).
Tensor feature_cube(const Tensor& day, const Tensor& week, const Tensor& nodes) {
    if (day.rank() != 2 || week.rank() != 2 || nodes.rank() != 2)
        throw DimensionError("gate: expected rank-2 embedding rows, got " + day.shape_str() +
                             ", " + week.shape_str() + ", " + nodes.shape_str());
    if (day.extent(0) != week.extent(0) || day.extent(1) != week.extent(1))
        throw DimensionError("gate: day rows " + day.shape_str() + " and week rows " +
                             week.shape_str() + " disagree");
    const long t = day.extent(0);
    const long n = nodes.extent(0);
    const long dt = day.extent(1);
    const long dn = nodes.extent(1);
    Tensor dc = ops::expand(ops::reshape(day, {t, 1, dt}), {t, n, dt});
    Tensor wc = ops::expand(ops::reshape(week, {t, 1, dt}), {t, n, dt});
    Tensor ec = ops::expand(ops::reshape(nodes, {1, n, dn}), {t, n, dn});
    return ops::concat({dc, wc, ec}, 2);
}

Tensor gate_chain(const Tensor& feat, Params& p, Tape* tape, int batch_axes) {
    Tensor scaled = cwam::apply(feat, p.attention, tape, batch_axes);
    Tensor w1 = tape ? tape->watch(p.w1) : p.w1.value;
    Tensor w2 = tape ? tape->watch(p.w2) : p.w2.value;
    const long width = feat.extent(feat.rank() - 1);
    if (w1.extent(0) != width)
        throw DimensionError("gate: feature width " + std::to_string(width) +
                             " does not match W1 " + w1.shape_str());
    long rows = 1;
    for (int d = 0; d + 1 < feat.rank(); ++d) rows *= feat.extent(d);
    Tensor flat = ops::reshape(scaled, {rows, width});
    Tensor omega = ops::sigmoid(ops::matmul(ops::relu(ops::matmul(flat, w1)), w2));
    std::vector<long> oshape(feat.shape().begin(), feat.shape().end() - 1);
    oshape.push_back(1);
    return ops::reshape(omega, oshape);
}

} // namespace

Params make(long d_t, long d_n, long d_g, long ratio, Rng& rng, const std::string& prefix) {
    if (d_g < 1) throw ConfigError("gate: d_g must be >= 1, got " + std::to_string(d_g));
    const long width = 2 * d_t + d_n;
    return Params{
        cwam::make(width, ratio, rng, prefix + ".cwam"),
        Parameter(prefix + ".w1", uniform_init({width, d_g}, width, rng)),
        Parameter(prefix + ".w2", uniform_init({d_g, 1}, d_g, rng)),
    };
}

Tensor gate_values(const Tensor& day, const Tensor& week, const Tensor& nodes, Params& p,
                   Tape* tape) {
    return gate_chain(feature_cube(day, week, nodes), p, tape, 0);
}

Tensor gate_values_batched(const Tensor& day, const Tensor& week, const Tensor& nodes, Params& p,
                           Tape* tape) {
    if (day.rank() != 3 || week.rank() != 3)
        throw DimensionError("gate: batched day/week rows must be rank 3, got " + day.shape_str() +
                             " and " + week.shape_str());
    const long b = day.extent(0);
    const long t = day.extent(1);
    const long dt = day.extent(2);
    const long n = nodes.extent(0);
    const long dn = nodes.extent(1);
    Tensor dc = ops::expand(ops::reshape(day, {b, t, 1, dt}), {b, t, n, dt});
    Tensor wc = ops::expand(ops::reshape(week, {b, t, 1, dt}), {b, t, n, dt});
    Tensor ec = ops::expand(ops::reshape(nodes, {1, 1, n, dn}), {b, t, n, dn});
    return gate_chain(ops::concat({dc, wc, ec}, 3), p, tape, 1);
}

std::pair<Tensor, Tensor> split(const Tensor& x, const Tensor& omega) {
    if (x.rank() != omega.rank() || omega.extent(omega.rank() - 1) != 1)
        throw DimensionError("gate split: omega " + omega.shape_str() + " does not align with x " +
                             x.shape_str());
    for (int d = 0; d + 1 < x.rank(); ++d)
        if (x.extent(d) != omega.extent(d))
            throw DimensionError("gate split: omega " + omega.shape_str() +
                                 " does not align with x " + x.shape_str());
    // Recompute x1 as the exact complement of x2 so x1 + x2 == x holds
    // bit for bit; the naive pair can drift by one ulp.
    Tensor x2 = ops::sub(x, ops::mul(x, omega));
    Tensor x1 = ops::sub(x, x2);
    return {x1, x2};
}

} // namespace teddn::gate
