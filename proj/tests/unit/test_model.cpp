#include "doctest.h"

#include "../helpers.hpp"
#include "teddn/error.hpp"
#include "teddn/gradcheck.hpp"
#include "teddn/model.hpp"
#include "teddn/ops.hpp"
#include "teddn/tape.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

using namespace teddn;
using teddn::testing::random_tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.nodes = 3;
    cfg.channels = 1;
    cfg.t_h = 2;
    cfg.t_out = 2;
    cfg.d_t = 2;
    cfg.d_n = 2;
    cfg.d_g = 2;
    cfg.d_h = 3;
    cfg.hops = 2;
    cfg.reduction_ratio = 2;
    cfg.steps_per_day = 8;
    cfg.start_weekday = 3;
    return cfg;
}

// Shape-accounting oracle: total scalar count from the config alone.
long count_oracle(const ModelConfig& c) {
    long total = c.steps_per_day * c.d_t + 7 * c.d_t; // time tables
    total += c.nodes * c.d_n;                         // node embedding
    if (c.use_dg) {
        const long width = 2 * c.d_t + c.d_n;
        const long mid = std::max<long>(1, width / c.reduction_ratio);
        total += width * mid + mid * width; // CWAM
        total += width * c.d_g + c.d_g;     // W1, W2
    }
    const long streams = c.use_dg ? 2 : 1;
    const long embeds = c.share_graph_embeddings ? 1 : streams;
    total += embeds * 2 * c.nodes * c.d_g;
    const long d_in = c.channels + 2 * c.d_t;
    for (long s = 0; s < streams; ++s) {
        if (c.use_te) total += 2;
        if (c.use_gru)
            total += 3 * (d_in * c.d_h + c.d_h * c.d_h + c.d_h);
        else
            total += d_in * c.d_h + c.d_h;
        total += 2 * c.d_g * c.d_g;          // graph mixers
        total += c.hops * c.d_h * c.d_h;     // fuse
    }
    total += (streams * c.d_h + 2 * c.d_t) * c.t_out * c.channels; // head
    return total;
}

std::vector<long> ramp_slots(long count, long modulus) {
    std::vector<long> out(count);
    for (long i = 0; i < count; ++i) out[i] = i % modulus;
    return out;
}

} // namespace

TEST_CASE("same seed builds bit-identical parameters, different seeds differ") {
    ModelConfig cfg = tiny_config();
    TeddnModel a = TeddnModel::build(cfg, 11);
    TeddnModel b = TeddnModel::build(cfg, 11);
    TeddnModel c = TeddnModel::build(cfg, 12);

    auto pa = a.parameters();
    auto pb = b.parameters();
    auto pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    REQUIRE(pa.size() == pc.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        REQUIRE(pa[i]->value.shape() == pb[i]->value.shape());
        for (long k = 0; k < pa[i]->value.size(); ++k)
            CHECK(pa[i]->value.data()[k] == pb[i]->value.data()[k]);
        if (teddn::testing::max_abs_diff(pa[i]->value, pc[i]->value) > 0) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("parameter names are unique and lookup works") {
    TeddnModel m = TeddnModel::build(tiny_config(), 5);
    CHECK(m.find("time.day") != nullptr);
    CHECK(m.find("embed.nodes") != nullptr);
    CHECK(m.find("gate.w1") != nullptr);
    CHECK(m.find("stream0.gru.update_x") != nullptr);
    CHECK(m.find("stream1.graph.e1") != nullptr);
    CHECK(m.find("head.proj") != nullptr);
    CHECK(m.find("no.such.parameter") == nullptr);
}

TEST_CASE("parameter count matches the shape-accounting oracle") {
    ModelConfig base = tiny_config();
    base.d_h = 4; // the quoted spot case: all dims 4
    base.d_t = 4;
    base.d_n = 4;
    base.d_g = 4;
    for (const std::string& name : variant_names()) {
        ModelConfig cfg = variant(base, name);
        TeddnModel m = TeddnModel::build(cfg, 9);
        CHECK(m.parameter_count() == count_oracle(cfg));
    }
    ModelConfig shared = base;
    shared.share_graph_embeddings = true;
    TeddnModel m = TeddnModel::build(shared, 9);
    CHECK(m.parameter_count() == count_oracle(shared));
}

TEST_CASE("forward honours the output shape contract") {
    ModelConfig cfg;
    cfg.nodes = 170;
    cfg.channels = 1;
    cfg.d_t = 2;
    cfg.d_n = 2;
    cfg.d_g = 2;
    cfg.d_h = 2;
    cfg.reduction_ratio = 2;
    TeddnModel m = TeddnModel::build(cfg, 1);
    Rng rng(1);
    Tensor inputs = random_tensor(rng, {2, 12, 170, 1});
    Tensor out = m.forward(inputs, ramp_slots(24, 288), ramp_slots(24, 7), nullptr);
    CHECK(out.shape() == std::vector<long>{2, 12, 170, 1});
}

TEST_CASE("zero output head forecasts zero regardless of input") {
    TeddnModel m = TeddnModel::build(tiny_config(), 3);
    for (real& v : m.find("head.proj")->value.values()) v = 0;
    Rng rng(2);
    Tensor inputs = random_tensor(rng, {2, 2, 3, 1}, -50.0, 50.0);
    Tensor out = m.forward(inputs, ramp_slots(4, 8), ramp_slots(4, 7), nullptr);
    for (real v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("disentangle switch changes the stream count but both run clean") {
    ModelConfig with = tiny_config();
    ModelConfig without = variant(with, "w/o DG");
    TeddnModel a = TeddnModel::build(with, 4);
    TeddnModel b = TeddnModel::build(without, 4);
    CHECK(a.parameter_count() > b.parameter_count());
    CHECK(a.parameter_count() == count_oracle(with));
    CHECK(b.parameter_count() == count_oracle(without));

    Rng rng(4);
    Tensor inputs = random_tensor(rng, {2, 2, 3, 1});
    Tensor oa = a.forward(inputs, ramp_slots(4, 8), ramp_slots(4, 7), nullptr);
    Tensor ob = b.forward(inputs, ramp_slots(4, 8), ramp_slots(4, 7), nullptr);
    CHECK(oa.shape() == std::vector<long>{2, 2, 3, 1});
    CHECK(ob.shape() == std::vector<long>{2, 2, 3, 1});
    CHECK(oa.all_finite());
    CHECK(ob.all_finite());
}

TEST_CASE("variants toggle exactly one ablation flag") {
    ModelConfig base = tiny_config();
    ModelConfig full = variant(base, "full");
    CHECK(full.use_te);
    CHECK(full.use_dg);
    CHECK(full.use_gru);

    ModelConfig te = variant(base, "w/o TE");
    CHECK_FALSE(te.use_te);
    CHECK(te.use_dg);
    CHECK(te.use_gru);

    ModelConfig dg = variant(base, "w/o DG");
    CHECK(dg.use_te);
    CHECK_FALSE(dg.use_dg);
    CHECK(dg.use_gru);

    ModelConfig gru = variant(base, "w/o GRU");
    CHECK(gru.use_te);
    CHECK(gru.use_dg);
    CHECK_FALSE(gru.use_gru);

    CHECK_THROWS_AS(variant(base, "w/o HOPS"), ConfigError);
    CHECK(variant_names().size() == 4);
    CHECK(variant_names()[0] == "full");
}

TEST_CASE("config validation rejects bad dimensions") {
    ModelConfig cfg = tiny_config();
    cfg.nodes = 0;
    CHECK_THROWS_AS(TeddnModel::build(cfg, 1), ConfigError);
    cfg = tiny_config();
    cfg.d_t = 0;
    CHECK_THROWS_AS(TeddnModel::build(cfg, 1), ConfigError);
    cfg = tiny_config();
    cfg.beta_res = static_cast<real>(1.5);
    CHECK_THROWS_AS(TeddnModel::build(cfg, 1), ConfigError);
    cfg = tiny_config();
    cfg.epsilon = 0;
    CHECK_THROWS_AS(TeddnModel::build(cfg, 1), ConfigError);
    cfg = tiny_config();
    cfg.start_weekday = 7;
    CHECK_THROWS_AS(TeddnModel::build(cfg, 1), ConfigError);
}

TEST_CASE("forward rejects inputs that disagree with the config") {
    TeddnModel m = TeddnModel::build(tiny_config(), 6);
    Rng rng(6);
    CHECK_THROWS_AS(
        m.forward(random_tensor(rng, {2, 2, 4, 1}), ramp_slots(4, 8), ramp_slots(4, 7), nullptr),
        DimensionError);
    CHECK_THROWS_AS(
        m.forward(random_tensor(rng, {2, 3, 3, 1}), ramp_slots(6, 8), ramp_slots(6, 7), nullptr),
        DimensionError);
    CHECK_THROWS_AS(
        m.forward(random_tensor(rng, {2, 2, 3, 1}), ramp_slots(3, 8), ramp_slots(4, 7), nullptr),
        DimensionError);
}

TEST_CASE("stage trace records every stage as finite on a clean forward") {
    TeddnModel m = TeddnModel::build(tiny_config(), 7);
    Rng rng(7);
    Tensor inputs = random_tensor(rng, {1, 2, 3, 1});
    StageTrace trace;
    m.forward(inputs, ramp_slots(2, 8), ramp_slots(2, 7), nullptr, &trace);
    REQUIRE(trace.stages.size() == 5);
    CHECK(trace.stages[0].first == "embed");
    CHECK(trace.stages[1].first == "disentangle");
    CHECK(trace.stages[2].first == "temporal");
    CHECK(trace.stages[3].first == "graph");
    CHECK(trace.stages[4].first == "head");
    for (const auto& [name, finite] : trace.stages) CHECK(finite);
    CHECK(trace.first_bad() == nullptr);

    TeddnModel single = TeddnModel::build(variant(tiny_config(), "w/o DG"), 7);
    StageTrace trace2;
    single.forward(inputs, ramp_slots(2, 8), ramp_slots(2, 7), nullptr, &trace2);
    REQUIRE(trace2.stages.size() == 4); // no disentangle stage
    CHECK(trace2.stages[1].first == "temporal");
}

TEST_CASE("fixed seed and inputs give bit-identical forecasts") {
    ModelConfig cfg = tiny_config();
    Rng rng(8);
    Tensor inputs = random_tensor(rng, {2, 2, 3, 1});
    const std::vector<long> tod = ramp_slots(4, 8);
    const std::vector<long> dow = ramp_slots(4, 7);

    TeddnModel a = TeddnModel::build(cfg, 21);
    TeddnModel b = TeddnModel::build(cfg, 21);
    Tensor oa = a.forward(inputs, tod, dow, nullptr);
    Tensor ob = b.forward(inputs, tod, dow, nullptr);
    for (long i = 0; i < oa.size(); ++i) CHECK(oa.data()[i] == ob.data()[i]);

    Tensor oa2 = a.forward(inputs, tod, dow, nullptr); // same instance, rerun
    for (long i = 0; i < oa.size(); ++i) CHECK(oa.data()[i] == oa2.data()[i]);
}

TEST_CASE("consistent node permutation permutes the forecast") {
    ModelConfig cfg = tiny_config();
    cfg.nodes = 4;
    Rng rng(9);
    Tensor inputs = random_tensor(rng, {2, 2, 4, 1});
    const std::vector<long> tod = ramp_slots(4, 8);
    const std::vector<long> dow = ramp_slots(4, 7);
    const std::vector<long> perm = {2, 0, 3, 1};

    TeddnModel base = TeddnModel::build(cfg, 31);
    Tensor out = base.forward(inputs, tod, dow, nullptr);

    TeddnModel permuted = TeddnModel::build(cfg, 31);
    auto permute_rows = [&](const std::string& name) {
        Parameter* p = permuted.find(name);
        REQUIRE(p != nullptr);
        Parameter* src = base.find(name);
        const long cols = p->value.extent(1);
        for (long i = 0; i < 4; ++i)
            for (long k = 0; k < cols; ++k)
                p->value.data()[i * cols + k] = src->value.data()[perm[i] * cols + k];
    };
    permute_rows("embed.nodes");
    permute_rows("stream0.graph.e1");
    permute_rows("stream0.graph.e2");
    permute_rows("stream1.graph.e1");
    permute_rows("stream1.graph.e2");

    Tensor pin({2, 2, 4, 1});
    for (long b = 0; b < 2; ++b)
        for (long t = 0; t < 2; ++t)
            for (long i = 0; i < 4; ++i)
                pin.data()[(b * 2 + t) * 4 + i] = inputs.data()[(b * 2 + t) * 4 + perm[i]];

    Tensor pout = permuted.forward(pin, tod, dow, nullptr);
    for (long b = 0; b < 2; ++b)
        for (long t = 0; t < 2; ++t)
            for (long i = 0; i < 4; ++i)
                CHECK(pout.at(std::array<long, 4>{b, t, i, 0})
                      == doctest::Approx(out.at(std::array<long, 4>{b, t, perm[i], 0}))
                             .epsilon(1e-12));
}

TEST_CASE("adjacency accessor returns per-stream matrices and checks bounds") {
    TeddnModel m = TeddnModel::build(tiny_config(), 13);
    Tensor a0 = m.adjacency(0);
    Tensor a1 = m.adjacency(1);
    CHECK(a0.shape() == std::vector<long>{3, 3});
    CHECK(a1.shape() == std::vector<long>{3, 3});
    for (long i = 0; i < 3; ++i) CHECK(a0.at(std::array<long, 2>{i, i}) == 0.0);
    CHECK(teddn::testing::max_abs_diff(a0, a1) > 0); // unshared embeddings
    CHECK_THROWS_AS(m.adjacency(2), BoundsError);
    CHECK_THROWS_AS(m.adjacency(-1), BoundsError);

    ModelConfig shared = tiny_config();
    shared.share_graph_embeddings = true;
    TeddnModel ms = TeddnModel::build(shared, 13);
    CHECK(ms.find("graph.e1") != nullptr);
    CHECK(ms.find("stream0.graph.e1") == nullptr);
}

TEST_CASE("every parameter gradient matches finite differences end to end") {
    for (const std::string& name : variant_names()) {
        ModelConfig cfg = variant(tiny_config(), name);
        TeddnModel m = TeddnModel::build(cfg, 17);
        Rng rng(17);
        Tensor inputs = random_tensor(rng, {1, 2, 3, 1});
        Tensor target = random_tensor(rng, {1, 2, 3, 1});
        const std::vector<long> tod = ramp_slots(2, 8);
        const std::vector<long> dow = ramp_slots(2, 7);

        auto mae = [&]() -> real {
            Tensor out = m.forward(inputs, tod, dow, nullptr);
            return ops::mean_all(ops::abs(ops::sub(out, target))).item();
        };

        for (Parameter* p : m.parameters()) p->zero_grad();
        Tape tape;
        Tensor out = m.forward(inputs, tod, dow, &tape);
        tape.backward(ops::mean_all(ops::abs(ops::sub(out, target))));

        for (Parameter* p : m.parameters()) {
            Tensor fd = finite_difference_grad(
                [&](const Tensor& v) {
                    Tensor saved = p->value;
                    p->value = v;
                    real res = mae();
                    p->value = saved;
                    return res;
                },
                p->value);
            CHECK_MESSAGE(relative_error(p->grad, fd) < kGradCheckTolerance,
                          name, ": ", p->name);
        }
    }
}
