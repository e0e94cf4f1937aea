#include "teddn/cwam.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>

namespace teddn::cwam {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

} // namespace

long bottleneck(long channels, long ratio) {
    if (channels < 1 || ratio < 1)
        throw ConfigError("cwam: channels and ratio must be positive, got " +
                          std::to_string(channels) + " and " + std::to_string(ratio));
    return std::max<long>(1, channels / ratio);
}

Params make(long channels, long ratio, Rng& rng, const std::string& prefix) {
    const long mid = bottleneck(channels, ratio);
    return Params{
        Parameter(prefix + ".reduce", uniform_init({channels, mid}, channels, rng)),
        Parameter(prefix + ".expand", uniform_init({mid, channels}, mid, rng)),
        ratio,
    };
}

Tensor squeeze(const Tensor& u) {
    if (u.rank() < 2)
        throw ContractError("cwam squeeze: need at least one non-channel axis, got " +
                            u.shape_str());
    std::vector<int> axes;
    for (int d = 0; d + 1 < u.rank(); ++d) axes.push_back(d);
    return ops::reduce_mean(u, axes);
}

Tensor excite(const Tensor& z, const Tensor& reduce, const Tensor& expand) {
    const bool batched = z.rank() == 2;
    if (!batched && z.rank() != 1)
        throw DimensionError("cwam excite: z must be rank 1 or 2, got " + z.shape_str());
    Tensor rows = batched ? z : ops::reshape(z, {1, z.extent(0)});
    Tensor s = ops::sigmoid(ops::matmul(ops::relu(ops::matmul(rows, reduce)), expand));
    return batched ? s : ops::reshape(s, {s.extent(1)});
}

Tensor scale(const Tensor& u, const Tensor& s) {
    if (s.rank() != 1 || s.extent(0) != u.extent(u.rank() - 1))
        throw DimensionError("cwam scale: gate " + s.shape_str() + " does not match channels of " +
                             u.shape_str());
    return ops::mul(u, s);
}

Tensor apply(const Tensor& u, Params& p, Tape* tape, int batch_axes) {
    if (batch_axes < 0 || batch_axes > u.rank() - 2)
        throw ContractError("cwam apply: batch_axes " + std::to_string(batch_axes) +
                            " invalid for " + u.shape_str());
    Tensor reduce = tape ? tape->watch(p.reduce) : p.reduce.value;
    Tensor expand = tape ? tape->watch(p.expand) : p.expand.value;
    if (batch_axes == 0) return scale(u, excite(squeeze(u), reduce, expand));

    std::vector<int> pool;
    for (int d = batch_axes; d + 1 < u.rank(); ++d) pool.push_back(d);
    Tensor z = ops::reduce_mean(u, pool); // (batch..., C)
    long rows = 1;
    for (int d = 0; d < batch_axes; ++d) rows *= u.extent(d);
    const long channels = u.extent(u.rank() - 1);
    Tensor s = excite(ops::reshape(z, {rows, channels}), reduce, expand);
    std::vector<long> sshape(u.shape().begin(), u.shape().begin() + batch_axes);
    for (int d = batch_axes; d + 1 < u.rank(); ++d) sshape.push_back(1);
    sshape.push_back(channels);
    return ops::mul(u, ops::reshape(s, sshape));
}

} // namespace teddn::cwam
