#pragma once

#include "teddn/cwam.hpp"
#include "teddn/disentangle_gate.hpp"
#include "teddn/embeddings.hpp"
#include "teddn/gc_module.hpp"
#include "teddn/tape.hpp"
#include "teddn/te_module.hpp"
#include "teddn/temporal_backbone.hpp"
#include "teddn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace teddn {

struct ModelConfig {
    long nodes = 0;    // N
    long channels = 1; // C
    long t_h = 12;
    long t_out = 12;
    long d_t = 16;
    long d_n = 16;
    long d_g = 16;
    long d_h = 32;
    long hops = 2;
    real alpha = static_cast<real>(3.0);
    real beta_res = static_cast<real>(0.5);
    real epsilon = static_cast<real>(1e-5);
    long reduction_ratio = 4;
    long te_groups = 1; // reserved; single-group semantics
    bool share_graph_embeddings = false;
    bool use_te = true;
    bool use_dg = true;
    bool use_gru = true;
    long steps_per_day = 288;
    int start_weekday = 0;

    void validate() const; // throws ConfigError

    long streams() const { return use_dg ? 2 : 1; }
    long d_in() const { return channels + 2 * d_t; }
    long d_cat() const { return streams() * d_h + 2 * d_t; }
};

// Ablation switch: "full", "w/o TE", "w/o DG", "w/o GRU".
ModelConfig variant(ModelConfig base, const std::string& name);
const std::vector<std::string>& variant_names();

// Per-stage output health, for locating non-finite values after an abort.
struct StageTrace {
    std::vector<std::pair<std::string, bool>> stages; // (name, all finite)
    const std::string* first_bad() const;
};

class TeddnModel {
public:
    static TeddnModel build(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // Registration order is fixed and names are unique.
    std::vector<Parameter*> parameters();
    Parameter* find(const std::string& name);
    long parameter_count(); // total scalar count

    // inputs (B, T_h, N, C); tod/dow hold B*T_h slot indices, row-major by
    // sample then step. Returns (B, T_out, N, C) on the model's scale.
    Tensor forward(const Tensor& inputs, const std::vector<long>& tod,
                   const std::vector<long>& dow, Tape* tape, StageTrace* trace = nullptr);

    // Learned adjacency of one stream (inference only).
    Tensor adjacency(long stream);

private:
    TeddnModel(ModelConfig cfg, std::uint64_t seed);

    struct Stream {
        std::optional<te::Params> te;
        std::optional<backbone::GruParams> gru;
        std::optional<Parameter> tmap_w; // w/o GRU stand-in: per-step dense
        std::optional<Parameter> tmap_b;
        Parameter graph_w1;
        Parameter graph_w2;
        Parameter fuse;
    };

    Parameter& stream_e1(long s);
    Parameter& stream_e2(long s);
    Tensor encode_stream(const Tensor& x, Stream& s, Tape* tape);

    ModelConfig cfg_;
    embed::TimeTables time_;
    embed::NodeTable nodes_;
    std::optional<gate::Params> gate_;
    std::vector<Parameter> graph_e1_; // one entry, or one per stream
    std::vector<Parameter> graph_e2_;
    std::vector<Stream> streams_;
    backbone::OutputHead head_;
};

} // namespace teddn
