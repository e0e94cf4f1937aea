#include "doctest.h"

#include "../helpers.hpp"
#include "teddn/cwam.hpp"
#include "teddn/error.hpp"
#include "teddn/gradcheck.hpp"
#include "teddn/ops.hpp"
#include "teddn/tape.hpp"

#include <array>
#include <cmath>
#include <vector>

using namespace teddn;
using teddn::testing::random_tensor;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_CASE("bottleneck width") {
    CHECK(cwam::bottleneck(8, 4) == 2);
    CHECK(cwam::bottleneck(4, 2) == 2);
    CHECK(cwam::bottleneck(3, 4) == 1); // floored then clamped
    CHECK(cwam::bottleneck(1, 16) == 1);
    CHECK(cwam::bottleneck(9, 2) == 4);
}

TEST_CASE("squeeze arithmetic examples") {
    // channel 0 holds {1, 2}, channel 1 holds {3, 5}
    Tensor u = Tensor::from({2, 2}, {1, 3, 2, 5});
    Tensor z = cwam::squeeze(u);
    CHECK(z.shape() == std::vector<long>{2});
    CHECK(z.at(std::array<long, 1>{0}) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(z.at(std::array<long, 1>{1}) == doctest::Approx(4.0).epsilon(1e-12));

    Tensor c = Tensor::full({3, 4, 5}, static_cast<real>(2.75));
    Tensor zc = cwam::squeeze(c);
    for (real v : zc.values()) CHECK(v == doctest::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("squeeze matches a triple-loop mean oracle") {
    Rng rng(3);
    Tensor u = random_tensor(rng, {12, 4, 8});
    Tensor z = cwam::squeeze(u);
    REQUIRE(z.shape() == std::vector<long>{8});
    for (long c = 0; c < 8; ++c) {
        double sum = 0;
        for (long i = 0; i < 12; ++i) {
            for (long j = 0; j < 4; ++j) {
                sum += u.at(std::array<long, 3>{i, j, c});
            }
        }
        CHECK(z.at(std::array<long, 1>{c}) == doctest::Approx(sum / 48.0).epsilon(1e-12));
    }
}

TEST_CASE("squeeze rejects channel-only tensors") {
    CHECK_THROWS_AS(cwam::squeeze(Tensor::from({3}, {1, 2, 3})), ContractError);
}

TEST_CASE("excite with zero weights gives one half per channel") {
    Rng rng(4);
    cwam::Params p = cwam::make(4, 2, rng, "c");
    for (real& v : p.reduce.value.values()) v = 0;
    for (real& v : p.expand.value.values()) v = 0;
    Tensor s = cwam::excite(Tensor::from({4}, {3, -1, 7, 0}), p.reduce.value, p.expand.value);
    for (real v : s.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    // zero input through the bias-free chain also lands on sigmoid(0)
    Rng rng2(5);
    cwam::Params q = cwam::make(4, 2, rng2, "c");
    Tensor s2 = cwam::excite(Tensor::zeros({4}), q.reduce.value, q.expand.value);
    for (real v : s2.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("excite matches a hand-rolled two-layer evaluation") {
    Rng rng(6);
    cwam::Params p = cwam::make(4, 2, rng, "c");
    Tensor z = random_tensor(rng, {4});
    Tensor s = cwam::excite(z, p.reduce.value, p.expand.value);
    REQUIRE(s.shape() == std::vector<long>{4});

    std::vector<double> hidden(2, 0);
    for (long m = 0; m < 2; ++m) {
        double acc = 0;
        for (long c = 0; c < 4; ++c) {
            acc += z.at(std::array<long, 1>{c}) * p.reduce.value.at(std::array<long, 2>{c, m});
        }
        hidden[static_cast<size_t>(m)] = acc > 0 ? acc : 0;
    }
    for (long c = 0; c < 4; ++c) {
        double acc = 0;
        for (long m = 0; m < 2; ++m) {
            acc += hidden[static_cast<size_t>(m)] * p.expand.value.at(std::array<long, 2>{m, c});
        }
        CHECK(s.at(std::array<long, 1>{c}) == doctest::Approx(sigmoid_ref(acc)).epsilon(1e-12));
        CHECK(s.at(std::array<long, 1>{c}) > 0);
        CHECK(s.at(std::array<long, 1>{c}) < 1);
    }
}

TEST_CASE("scale examples and loop oracle") {
    Rng rng(8);
    Tensor u = random_tensor(rng, {3, 2});

    Tensor same = cwam::scale(u, Tensor::from({2}, {1, 1}));
    CHECK(teddn::testing::approx_equal(same, u, 0));

    Tensor zero = cwam::scale(u, Tensor::from({2}, {0, 0}));
    for (real v : zero.values()) CHECK(v == 0);

    Tensor halved = cwam::scale(u, Tensor::from({2}, {1, static_cast<real>(0.5)}));
    for (long i = 0; i < 3; ++i) {
        CHECK(halved.at(std::array<long, 2>{i, 0})
              == doctest::Approx(u.at(std::array<long, 2>{i, 0})).epsilon(1e-15));
        CHECK(halved.at(std::array<long, 2>{i, 1})
              == doctest::Approx(0.5 * u.at(std::array<long, 2>{i, 1})).epsilon(1e-15));
    }

    CHECK_THROWS_AS(cwam::scale(u, Tensor::from({3}, {1, 1, 1})), DimensionError);
}

TEST_CASE("gate boundedness: output never exceeds input magnitude") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        cwam::Params p = cwam::make(6, 4, rng, "c");
        Tensor u = random_tensor(rng, {5, 6}, -3, 3);
        Tensor out = cwam::apply(u, p, nullptr);
        REQUIRE(out.shape() == u.shape());
        for (long i = 0; i < u.size(); ++i) {
            CHECK(std::fabs(out.data()[i]) <= std::fabs(u.data()[i]));
        }
    }
}

TEST_CASE("permuting non-channel positions permutes the output identically") {
    Rng rng(12);
    cwam::Params p = cwam::make(3, 2, rng, "c");
    Tensor u = random_tensor(rng, {4, 5, 3});
    Tensor out = cwam::apply(u, p, nullptr);

    Tensor up = ops::permute(u, {1, 0, 2});
    Tensor outp = cwam::apply(up, p, nullptr);
    CHECK(teddn::testing::approx_equal(ops::permute(out, {1, 0, 2}), outp, 1e-12));
}

TEST_CASE("apply composition matches finite differences") {
    Rng rng(14);
    cwam::Params p = cwam::make(4, 2, rng, "c");
    Tensor u0 = random_tensor(rng, {3, 4});
    Tensor weights = random_tensor(rng, {3, 4});

    Parameter input("input", u0.clone());
    input.zero_grad();
    p.reduce.zero_grad();
    p.expand.zero_grad();

    Tape tape;
    Tensor out = cwam::apply(tape.watch(input), p, &tape);
    Tensor loss = ops::mean_all(ops::mul(out, weights));
    tape.backward(loss);

    auto loss_with = [&](Parameter& target, const Tensor& v) -> real {
        Tensor saved = target.value;
        target.value = v;
        Tensor o = cwam::apply(input.value, p, nullptr);
        real res = ops::mean_all(ops::mul(o, weights)).item();
        target.value = saved;
        return res;
    };
    for (Parameter* prm : {&input, &p.reduce, &p.expand}) {
        Tensor fd = finite_difference_grad([&](const Tensor& v) { return loss_with(*prm, v); },
                                           prm->value);
        CHECK(relative_error(prm->grad, fd) < kGradCheckTolerance);
    }
}

TEST_CASE("batched apply pools per sample") {
    Rng rng(16);
    cwam::Params p = cwam::make(3, 2, rng, "c");
    Tensor u = random_tensor(rng, {2, 4, 3});

    Tensor batched = cwam::apply(u, p, nullptr, 1);
    REQUIRE(batched.shape() == u.shape());

    // each sample must equal the unbatched chain on its own slice
    for (long b = 0; b < 2; ++b) {
        Tensor slice_b = ops::slice(u, 0, b, 1);
        Tensor single_out = cwam::apply(ops::reshape(slice_b, {4, 3}), p, nullptr);
        for (long i = 0; i < 4; ++i) {
            for (long c = 0; c < 3; ++c) {
                CHECK(batched.at(std::array<long, 3>{b, i, c})
                      == doctest::Approx(single_out.at(std::array<long, 2>{i, c})).epsilon(1e-12));
            }
        }
    }

    // changing sample 1 must not affect sample 0's gate
    Tensor u2 = u.clone();
    for (long i = 0; i < 12; ++i) u2.data()[12 + i] = static_cast<real>(rng.uniform(-2, 2));
    Tensor batched2 = cwam::apply(u2, p, nullptr, 1);
    for (long i = 0; i < 12; ++i) {
        CHECK(batched2.data()[i] == doctest::Approx(batched.data()[i]).epsilon(1e-15));
    }
}
