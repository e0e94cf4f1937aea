#include "teddn/model.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace teddn {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const DimensionError& e) {
        throw DimensionError(std::string("stage ") + name + ": " + e.what());
    }
}

void trace_stage(StageTrace* trace, const char* name, const Tensor& t) {
    if (trace) trace->stages.emplace_back(name, t.all_finite());
}

} // namespace

void ModelConfig::validate() const {
    auto positive = [](long v, const char* what) {
        if (v < 1) throw ConfigError(std::string("model config: ") + what + " must be >= 1, got " +
                                     std::to_string(v));
    };
    positive(nodes, "nodes");
    positive(channels, "channels");
    positive(t_h, "t_h");
    positive(t_out, "t_out");
    positive(d_t, "d_t");
    positive(d_n, "d_n");
    positive(d_g, "d_g");
    positive(d_h, "d_h");
    positive(hops, "hops");
    positive(reduction_ratio, "reduction_ratio");
    positive(te_groups, "te_groups");
    positive(steps_per_day, "steps_per_day");
    if (start_weekday < 0 || start_weekday >= 7)
        throw ConfigError("model config: start_weekday must be in [0, 7), got " +
                          std::to_string(start_weekday));
    if (alpha < 0) throw ConfigError("model config: alpha must be non-negative");
    if (beta_res < 0 || beta_res > 1)
        throw ConfigError("model config: beta_res must lie in [0, 1]");
    if (epsilon <= 0) throw ConfigError("model config: epsilon must be positive");
}

const std::vector<std::string>& variant_names() {
    static const std::vector<std::string> names = {"full", "w/o TE", "w/o DG", "w/o GRU"};
    return names;
}

ModelConfig variant(ModelConfig base, const std::string& name) {
    base.use_te = true;
    base.use_dg = true;
    base.use_gru = true;
    if (name == "full") return base;
    if (name == "w/o TE") {
        base.use_te = false;
        return base;
    }
    if (name == "w/o DG") {
        base.use_dg = false;
        return base;
    }
    if (name == "w/o GRU") {
        base.use_gru = false;
        return base;
    }
    throw ConfigError("unknown variant \"" + name + "\"");
}

const std::string* StageTrace::first_bad() const {
    for (const auto& [name, finite] : stages)
        if (!finite) return &name;
    return nullptr;
}

TeddnModel TeddnModel::build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    return TeddnModel(cfg, seed);
}

TeddnModel::TeddnModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      time_([&] {
          Rng rng(seed);
          return embed::make_time_tables(cfg_.steps_per_day, cfg_.start_weekday, cfg_.d_t, rng,
                                         "time");
      }()),
      nodes_([&] {
          Rng rng = Rng(seed).fork(1);
          return embed::make_node_table(cfg_.nodes, cfg_.d_n, rng, "embed");
      }()),
      head_([&] {
          Rng rng = Rng(seed).fork(2);
          return backbone::make_head(cfg_.d_cat(), cfg_.t_out, cfg_.channels, rng, "head");
      }()) {
    if (cfg_.use_dg) {
        Rng rng = Rng(seed).fork(3);
        gate_.emplace(gate::make(cfg_.d_t, cfg_.d_n, cfg_.d_g, cfg_.reduction_ratio, rng, "gate"));
    }
    const long s_count = cfg_.streams();
    const long embed_count = cfg_.share_graph_embeddings ? 1 : s_count;
    for (long g = 0; g < embed_count; ++g) {
        Rng rng = Rng(seed).fork(4 + static_cast<std::uint64_t>(g));
        const std::string prefix =
            cfg_.share_graph_embeddings ? std::string("graph") : "stream" + std::to_string(g) + ".graph";
        graph_e1_.emplace_back(prefix + ".e1", uniform_init({cfg_.nodes, cfg_.d_g}, cfg_.d_g, rng));
        graph_e2_.emplace_back(prefix + ".e2", uniform_init({cfg_.nodes, cfg_.d_g}, cfg_.d_g, rng));
    }
    for (long s = 0; s < s_count; ++s) {
        Rng rng = Rng(seed).fork(16 + static_cast<std::uint64_t>(s));
        const std::string prefix = "stream" + std::to_string(s);
        Stream stream{
            std::nullopt,
            std::nullopt,
            std::nullopt,
            std::nullopt,
            Parameter(prefix + ".graph.w1", uniform_init({cfg_.d_g, cfg_.d_g}, cfg_.d_g, rng)),
            Parameter(prefix + ".graph.w2", uniform_init({cfg_.d_g, cfg_.d_g}, cfg_.d_g, rng)),
            Parameter(prefix + ".fuse",
                      uniform_init({cfg_.hops * cfg_.d_h, cfg_.d_h}, cfg_.hops * cfg_.d_h, rng)),
        };
        if (cfg_.use_te) stream.te.emplace(te::make(cfg_.epsilon, prefix + ".te"));
        if (cfg_.use_gru) {
            stream.gru.emplace(backbone::make_gru(cfg_.d_in(), cfg_.d_h, rng, prefix + ".gru"));
        } else {
            stream.tmap_w.emplace(prefix + ".tmap.w",
                                  uniform_init({cfg_.d_in(), cfg_.d_h}, cfg_.d_in(), rng));
            stream.tmap_b.emplace(prefix + ".tmap.b", Tensor::zeros({cfg_.d_h}));
        }
        streams_.push_back(std::move(stream));
    }

    std::unordered_set<std::string> seen;
    for (Parameter* p : parameters())
        if (!seen.insert(p->name).second)
            throw ContractError("model: duplicate parameter name " + p->name);
}

Parameter& TeddnModel::stream_e1(long s) {
    return graph_e1_[cfg_.share_graph_embeddings ? 0 : static_cast<std::size_t>(s)];
}

Parameter& TeddnModel::stream_e2(long s) {
    return graph_e2_[cfg_.share_graph_embeddings ? 0 : static_cast<std::size_t>(s)];
}

std::vector<Parameter*> TeddnModel::parameters() {
    std::vector<Parameter*> out;
    out.push_back(&time_.day);
    out.push_back(&time_.week);
    out.push_back(&nodes_.table);
    if (gate_) {
        out.push_back(&gate_->attention.reduce);
        out.push_back(&gate_->attention.expand);
        out.push_back(&gate_->w1);
        out.push_back(&gate_->w2);
    }
    for (std::size_t g = 0; g < graph_e1_.size(); ++g) {
        out.push_back(&graph_e1_[g]);
        out.push_back(&graph_e2_[g]);
    }
    for (Stream& s : streams_) {
        if (s.te) {
            out.push_back(&s.te->gamma);
            out.push_back(&s.te->beta);
        }
        if (s.gru) {
            out.push_back(&s.gru->update_x);
            out.push_back(&s.gru->update_h);
            out.push_back(&s.gru->update_b);
            out.push_back(&s.gru->reset_x);
            out.push_back(&s.gru->reset_h);
            out.push_back(&s.gru->reset_b);
            out.push_back(&s.gru->cand_x);
            out.push_back(&s.gru->cand_h);
            out.push_back(&s.gru->cand_b);
        } else {
            out.push_back(&*s.tmap_w);
            out.push_back(&*s.tmap_b);
        }
        out.push_back(&s.graph_w1);
        out.push_back(&s.graph_w2);
        out.push_back(&s.fuse);
    }
    out.push_back(&head_.proj);
    return out;
}

Parameter* TeddnModel::find(const std::string& name) {
    for (Parameter* p : parameters())
        if (p->name == name) return p;
    return nullptr;
}

long TeddnModel::parameter_count() {
    long total = 0;
    for (Parameter* p : parameters()) total += p->size();
    return total;
}

Tensor TeddnModel::encode_stream(const Tensor& x, Stream& s, Tape* tape) {
    // x: (B, T, N, D_in) -> (B, N, D_h)
    const long b = x.extent(0);
    const long t = x.extent(1);
    const long n = x.extent(2);
    const long d_in = x.extent(3);
    if (s.gru) {
        Tensor folded = ops::reshape(ops::permute(x, {1, 0, 2, 3}), {t, b * n, d_in});
        Tensor h = backbone::encode_sequence(folded, *s.gru, tape);
        return ops::reshape(h, {b, n, cfg_.d_h});
    }
    Tensor w = tape ? tape->watch(*s.tmap_w) : s.tmap_w->value;
    Tensor bias = tape ? tape->watch(*s.tmap_b) : s.tmap_b->value;
    Tensor mapped = ops::add(ops::matmul(ops::reshape(x, {b * t * n, d_in}), w), bias);
    return ops::reduce_mean(ops::reshape(mapped, {b, t, n, cfg_.d_h}), {1});
}

Tensor TeddnModel::forward(const Tensor& inputs, const std::vector<long>& tod,
                           const std::vector<long>& dow, Tape* tape, StageTrace* trace) {
    if (inputs.rank() != 4 || inputs.extent(1) != cfg_.t_h || inputs.extent(2) != cfg_.nodes ||
        inputs.extent(3) != cfg_.channels)
        throw DimensionError("forward: inputs " + inputs.shape_str() + " do not match config (B, " +
                             std::to_string(cfg_.t_h) + ", " + std::to_string(cfg_.nodes) + ", " +
                             std::to_string(cfg_.channels) + ")");
    const long b = inputs.extent(0);
    const long t = cfg_.t_h;
    const long n = cfg_.nodes;
    if (static_cast<long>(tod.size()) != b * t || static_cast<long>(dow.size()) != b * t)
        throw DimensionError("forward: expected " + std::to_string(b * t) +
                             " time indices, got " + std::to_string(tod.size()) + " and " +
                             std::to_string(dow.size()));

    // (1) time embeddings for every input step
    Tensor day3;
    Tensor week3;
    stage("embed", [&] {
        day3 = ops::reshape(embed::day_rows(time_, tod, tape), {b, t, cfg_.d_t});
        week3 = ops::reshape(embed::week_rows(time_, dow, tape), {b, t, cfg_.d_t});
        return 0;
    });
    Tensor node_table = tape ? tape->watch(nodes_.table) : nodes_.table.value;
    trace_stage(trace, "embed", day3);

    // (2) disentangle gate
    std::vector<Tensor> flows;
    if (cfg_.use_dg) {
        stage("disentangle", [&] {
            Tensor omega = gate::gate_values_batched(day3, week3, node_table, *gate_, tape);
            auto [x1, x2] = gate::split(inputs, omega);
            flows = {x1, x2};
            return 0;
        });
        trace_stage(trace, "disentangle", flows[0]);
    } else {
        flows = {inputs};
    }

    // (3) temporal encoding per stream
    Tensor day_chan = ops::expand(ops::reshape(day3, {b, t, 1, cfg_.d_t}), {b, t, n, cfg_.d_t});
    Tensor week_chan = ops::expand(ops::reshape(week3, {b, t, 1, cfg_.d_t}), {b, t, n, cfg_.d_t});
    std::vector<Tensor> encoded;
    for (std::size_t s = 0; s < streams_.size(); ++s) {
        stage("temporal", [&] {
            Tensor h = ops::concat({flows[s], day_chan, week_chan}, 3);
            if (cfg_.use_te) h = te::enhance_sequence(h, *streams_[s].te, tape);
            encoded.push_back(encode_stream(h, streams_[s], tape));
            return 0;
        });
    }
    trace_stage(trace, "temporal", encoded[0]);

    // (4) graph convolution per stream
    std::vector<Tensor> diffused;
    for (std::size_t s = 0; s < streams_.size(); ++s) {
        stage("graph", [&] {
            const long si = static_cast<long>(s);
            Tensor a = gc::learn_adjacency(stream_e1(si), stream_e2(si), streams_[s].graph_w1,
                                           streams_[s].graph_w2, cfg_.alpha, tape);
            Tensor p = gc::normalize_adjacency(a);
            std::vector<Tensor> states = gc::propagate(encoded[s], p, cfg_.beta_res, cfg_.hops);
            Tensor fuse = tape ? tape->watch(streams_[s].fuse) : streams_[s].fuse.value;
            diffused.push_back(gc::hop_fusion(states, cfg_.hops, fuse));
            return 0;
        });
    }
    trace_stage(trace, "graph", diffused[0]);

    // (5) fuse streams with the final-step time embeddings, then project
    Tensor out;
    stage("head", [&] {
        Tensor day_last = ops::reshape(ops::slice(day3, 1, t - 1, 1), {b, 1, cfg_.d_t});
        Tensor week_last = ops::reshape(ops::slice(week3, 1, t - 1, 1), {b, 1, cfg_.d_t});
        std::vector<Tensor> parts = diffused;
        parts.push_back(ops::expand(day_last, {b, n, cfg_.d_t}));
        parts.push_back(ops::expand(week_last, {b, n, cfg_.d_t}));
        Tensor features = ops::concat(parts, 2); // (B, N, D_cat)
        out = backbone::project(features, head_, tape);
        return 0;
    });
    trace_stage(trace, "head", out);
    return out;
}

Tensor TeddnModel::adjacency(long stream) {
    if (stream < 0 || stream >= cfg_.streams())
        throw BoundsError("adjacency: stream " + std::to_string(stream) + " out of range");
    return gc::learn_adjacency(stream_e1(stream), stream_e2(stream), streams_[stream].graph_w1,
                               streams_[stream].graph_w2, cfg_.alpha, nullptr);
}

} // namespace teddn
