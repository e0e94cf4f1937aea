#include "teddn/temporal_backbone.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>

namespace teddn::backbone {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

struct GateWeights {
    Tensor x;
    Tensor h;
    Tensor b;
};

GateWeights watch_gate(Parameter& x, Parameter& h, Parameter& b, Tape* tape) {
    if (!tape) return {x.value, h.value, b.value};
    return {tape->watch(x), tape->watch(h), tape->watch(b)};
}

Tensor affine(const Tensor& x, const Tensor& h, const GateWeights& w) {
    return ops::add(ops::add(ops::matmul(x, w.x), ops::matmul(h, w.h)), w.b);
}

} // namespace

GruParams make_gru(long d_in, long d_h, Rng& rng, const std::string& prefix) {
    if (d_in < 1 || d_h < 1)
        throw ConfigError("gru: widths must be positive, got " + std::to_string(d_in) + " and " +
                          std::to_string(d_h));
    auto gate = [&](const std::string& name) {
        return std::tuple<Parameter, Parameter, Parameter>{
            Parameter(prefix + "." + name + "_x", uniform_init({d_in, d_h}, d_in, rng)),
            Parameter(prefix + "." + name + "_h", uniform_init({d_h, d_h}, d_h, rng)),
            Parameter(prefix + "." + name + "_b", Tensor::zeros({d_h})),
        };
    };
    auto [ux, uh, ub] = gate("update");
    auto [rx, rh, rb] = gate("reset");
    auto [cx, ch, cb] = gate("cand");
    return GruParams{std::move(ux), std::move(uh), std::move(ub),
                     std::move(rx), std::move(rh), std::move(rb),
                     std::move(cx), std::move(ch), std::move(cb)};
}

OutputHead make_head(long d_cat, long horizon, long channels, Rng& rng,
                     const std::string& prefix) {
    if (d_cat < 1 || horizon < 1 || channels < 1)
        throw ConfigError("output head: dims must be positive");
    return OutputHead{
        Parameter(prefix + ".proj", uniform_init({d_cat, horizon * channels}, d_cat, rng)),
        horizon,
        channels,
    };
}

Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, GruParams& p, Tape* tape) {
    if (x_t.rank() != 2 || h_prev.rank() != 2 || x_t.extent(0) != h_prev.extent(0))
        throw DimensionError("gru_cell: rows of x " + x_t.shape_str() + " and h " +
                             h_prev.shape_str() + " disagree");
    GateWeights wu = watch_gate(p.update_x, p.update_h, p.update_b, tape);
    GateWeights wr = watch_gate(p.reset_x, p.reset_h, p.reset_b, tape);
    GateWeights wc = watch_gate(p.cand_x, p.cand_h, p.cand_b, tape);
    Tensor z = ops::sigmoid(affine(x_t, h_prev, wu));
    Tensor r = ops::sigmoid(affine(x_t, h_prev, wr));
    Tensor cand = ops::tanh(affine(x_t, ops::mul(r, h_prev), wc));
    Tensor keep = ops::mul(ops::shift(ops::neg(z), 1), h_prev); // (1 - z) * h
    return ops::add(keep, ops::mul(z, cand));
}

Tensor encode_sequence(const Tensor& x, GruParams& p, Tape* tape) {
    if (x.rank() != 3)
        throw ContractError("encode_sequence: expected (T, rows, D_in), got " + x.shape_str());
    const long t = x.extent(0);
    const long rows = x.extent(1);
    const long d_in = x.extent(2);
    const long d_h = p.update_h.value.extent(0);
    Tensor h = Tensor::zeros({rows, d_h});
    for (long step = 0; step < t; ++step) {
        Tensor x_t = ops::reshape(ops::slice(x, 0, step, 1), {rows, d_in});
        h = gru_cell(x_t, h, p, tape);
    }
    return h;
}

Tensor project(const Tensor& features, OutputHead& head, Tape* tape) {
    const bool batched = features.rank() == 3;
    if (!batched && features.rank() != 2)
        throw DimensionError("project: features must be rank 2 or 3, got " + features.shape_str());
    Tensor proj = tape ? tape->watch(head.proj) : head.proj.value;
    const long d_cat = features.extent(features.rank() - 1);
    if (proj.extent(0) != d_cat)
        throw DimensionError("project: features width " + std::to_string(d_cat) +
                             " does not match head " + proj.shape_str());
    const long rows = features.extent(features.rank() - 2);
    if (!batched) {
        Tensor flat = ops::matmul(features, proj); // (rows, T_out * C_out)
        Tensor cube = ops::reshape(flat, {rows, head.horizon, head.channels});
        return ops::permute(cube, {1, 0, 2});
    }
    const long b = features.extent(0);
    Tensor flat = ops::matmul(ops::reshape(features, {b * rows, d_cat}), proj);
    Tensor cube = ops::reshape(flat, {b, rows, head.horizon, head.channels});
    return ops::permute(cube, {0, 2, 1, 3});
}

} // namespace teddn::backbone
