#pragma once

#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>

namespace teddn::cwam {

// Squeeze-excite weights over a channel axis of width C.
struct Params {
    Parameter reduce; // (C, C/r)
    Parameter expand; // (C/r, C)
    long ratio;
};

// max(1, floor(channels / ratio))
long bottleneck(long channels, long ratio);

Params make(long channels, long ratio, Rng& rng, const std::string& prefix);

// Mean of each channel over every non-channel axis: (..., C) -> (C).
Tensor squeeze(const Tensor& u);

// sigmoid(relu(z W_reduce) W_expand); z is (C) or a batch of rows (B, C).
Tensor excite(const Tensor& z, const Tensor& reduce, const Tensor& expand);

// Per-channel rescale: channel c multiplied by s_c.
Tensor scale(const Tensor& u, const Tensor& s);

// squeeze + excite + scale, pooling over every axis after the first
// `batch_axes` (excluding the channel axis), so each leading index gets its
// own gate vector.
Tensor apply(const Tensor& u, Params& p, Tape* tape, int batch_axes = 0);

} // namespace teddn::cwam
