#include "teddn/gc_module.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace teddn::gc {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

// P (N, N) times H, where H is (N, D) or (B, N, D).
Tensor mix(const Tensor& p, const Tensor& h) {
    if (h.rank() == 2) return ops::matmul(p, h);
    const long b = h.extent(0);
    const long n = h.extent(1);
    const long d = h.extent(2);
    Tensor columns = ops::reshape(ops::permute(h, {1, 0, 2}), {n, b * d});
    Tensor mixed = ops::matmul(p, columns);
    return ops::permute(ops::reshape(mixed, {n, b, d}), {1, 0, 2});
}

} // namespace

GraphParams make_graph(long nodes, long d_g, real alpha, Rng& rng, const std::string& prefix) {
    if (nodes < 1 || d_g < 1)
        throw ConfigError("graph params: nodes and d_g must be positive, got " +
                          std::to_string(nodes) + " and " + std::to_string(d_g));
    return GraphParams{
        Parameter(prefix + ".e1", uniform_init({nodes, d_g}, d_g, rng)),
        Parameter(prefix + ".e2", uniform_init({nodes, d_g}, d_g, rng)),
        Parameter(prefix + ".w1", uniform_init({d_g, d_g}, d_g, rng)),
        Parameter(prefix + ".w2", uniform_init({d_g, d_g}, d_g, rng)),
        alpha,
    };
}

PropagationParams make_propagation(real beta_res, long hops, long width, Rng& rng,
                                   const std::string& prefix) {
    if (beta_res < 0 || beta_res > 1)
        throw ConfigError("propagation: beta_res must lie in [0, 1], got " +
                          std::to_string(beta_res));
    if (hops < 1) throw ConfigError("propagation: hops must be >= 1, got " + std::to_string(hops));
    return PropagationParams{
        beta_res,
        hops,
        Parameter(prefix + ".fuse", uniform_init({hops * width, width}, hops * width, rng)),
    };
}

Tensor learn_adjacency(Parameter& e1p, Parameter& e2p, Parameter& w1p, Parameter& w2p, real alpha,
                       Tape* tape) {
    Tensor e1 = tape ? tape->watch(e1p) : e1p.value;
    Tensor e2 = tape ? tape->watch(e2p) : e2p.value;
    Tensor w1 = tape ? tape->watch(w1p) : w1p.value;
    Tensor w2 = tape ? tape->watch(w2p) : w2p.value;
    Tensor de1 = ops::tanh(ops::scale(ops::matmul(e1, w1), alpha));
    Tensor de2 = ops::tanh(ops::scale(ops::matmul(e2, w2), alpha));
    Tensor m = ops::matmul(de1, ops::permute(de2, {1, 0}));
    Tensor anti = ops::sub(m, ops::permute(m, {1, 0}));
    return ops::relu(ops::tanh(ops::scale(anti, alpha)));
}

Tensor learn_adjacency(GraphParams& p, Tape* tape) {
    return learn_adjacency(p.e1, p.e2, p.w1, p.w2, p.alpha, tape);
}

Tensor normalize_adjacency(const Tensor& a) {
    if (a.rank() != 2 || a.extent(0) != a.extent(1))
        throw DimensionError("normalize_adjacency: expected square matrix, got " + a.shape_str());
    const long n = a.extent(0);
    Tensor eye = Tensor::zeros({n, n});
    for (long i = 0; i < n; ++i) eye.data()[i * n + i] = 1;
    Tensor hat = ops::add(a, eye);
    Tensor degree = ops::reduce_sum(hat, {1}, true);
    return ops::div(hat, degree);
}

std::vector<Tensor> propagate(const Tensor& h_in, const Tensor& p, real beta_res, long hops) {
    if (h_in.rank() != 2 && h_in.rank() != 3)
        throw DimensionError("propagate: H_in must be (N, D) or (B, N, D), got " + h_in.shape_str());
    const long n = h_in.extent(h_in.rank() - 2);
    if (p.rank() != 2 || p.extent(0) != n || p.extent(1) != n)
        throw DimensionError("propagate: P " + p.shape_str() + " does not match H_in " +
                             h_in.shape_str());
    std::vector<Tensor> states;
    states.reserve(static_cast<std::size_t>(hops) + 1);
    states.push_back(h_in);
    Tensor retained = ops::scale(h_in, beta_res);
    for (long j = 1; j <= hops; ++j)
        states.push_back(ops::add(retained, ops::scale(mix(p, states.back()), 1 - beta_res)));
    return states;
}

std::vector<Tensor> propagate(const Tensor& h_in, const Tensor& p, const PropagationParams& pp) {
    return propagate(h_in, p, pp.beta_res, pp.hops);
}

Tensor hop_fusion(const std::vector<Tensor>& hops, long k, const Tensor& fuse) {
    if (k < 1 || static_cast<std::size_t>(k) > hops.size())
        throw ContractError("hop_fusion: k " + std::to_string(k) + " with " +
                            std::to_string(hops.size()) + " hop states");
    for (const Tensor& h : hops)
        if (h.shape() != hops[0].shape())
            throw DimensionError("hop_fusion: mixed hop shapes " + hops[0].shape_str() + " and " +
                                 h.shape_str());
    const int rank = hops[0].rank();
    std::vector<Tensor> first(hops.begin(), hops.begin() + k);
    Tensor joined = ops::concat(first, rank - 1);
    const long d = hops[0].extent(rank - 1);
    if (fuse.extent(0) != k * d || fuse.rank() != 2)
        throw DimensionError("hop_fusion: fuse " + fuse.shape_str() + " does not match " +
                             std::to_string(k) + " hops of width " + std::to_string(d));
    if (rank == 2) return ops::matmul(joined, fuse);
    long rows = 1;
    for (int a = 0; a + 1 < rank; ++a) rows *= joined.extent(a);
    Tensor flat = ops::matmul(ops::reshape(joined, {rows, k * d}), fuse);
    std::vector<long> oshape(hops[0].shape().begin(), hops[0].shape().end() - 1);
    oshape.push_back(fuse.extent(1));
    return ops::reshape(flat, oshape);
}

Tensor forward(const Tensor& h_in, GraphParams& gp, PropagationParams& pp, Tape* tape) {
    Tensor a = learn_adjacency(gp, tape);
    Tensor p = normalize_adjacency(a);
    std::vector<Tensor> states = propagate(h_in, p, pp);
    Tensor fuse = tape ? tape->watch(pp.fuse) : pp.fuse.value;
    return hop_fusion(states, pp.hops, fuse);
}

void export_adjacency_csv(const Tensor& a, const std::string& path) {
    if (a.rank() != 2 || a.extent(0) != a.extent(1))
        throw DimensionError("export_adjacency_csv: expected square matrix, got " + a.shape_str());
    std::ofstream out(path);
    if (!out) throw FormatError("export_adjacency_csv: cannot open " + path);
    const long n = a.extent(0);
    out.precision(std::numeric_limits<real>::max_digits10);
    out << n << "\n";
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
            if (j) out << ",";
            out << a.data()[i * n + j];
        }
        out << "\n";
    }
    if (!out) throw FormatError("export_adjacency_csv: write failed for " + path);
}

} // namespace teddn::gc
