#pragma once

#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>

namespace teddn::backbone {

// Standard single-layer GRU weights: per gate an input map, a recurrent map,
// and a bias.
struct GruParams {
    Parameter update_x; // (D_in, D_h)
    Parameter update_h; // (D_h, D_h)
    Parameter update_b; // (D_h)
    Parameter reset_x;
    Parameter reset_h;
    Parameter reset_b;
    Parameter cand_x;
    Parameter cand_h;
    Parameter cand_b;
};

struct OutputHead {
    Parameter proj; // (D_cat, T_out * C_out)
    long horizon;   // T_out
    long channels;  // C_out
};

GruParams make_gru(long d_in, long d_h, Rng& rng, const std::string& prefix);
OutputHead make_head(long d_cat, long horizon, long channels, Rng& rng, const std::string& prefix);

// One step: rows are independent (nodes, or batch*nodes flattened).
// x_t (rows, D_in), h_prev (rows, D_h) -> (rows, D_h).
Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, GruParams& p, Tape* tape);

// Fold gru_cell over the leading time axis of (T, rows, D_in); h_0 = 0.
Tensor encode_sequence(const Tensor& x, GruParams& p, Tape* tape);

// (rows, D_cat) -> (T_out, rows, C_out); batched (B, rows, D_cat) ->
// (B, T_out, rows, C_out).
Tensor project(const Tensor& features, OutputHead& head, Tape* tape);

} // namespace teddn::backbone
