#include "doctest.h"

#include "../helpers.hpp"
#include "teddn/embeddings.hpp"
#include "teddn/error.hpp"
#include "teddn/gradcheck.hpp"
#include "teddn/ops.hpp"
#include "teddn/tape.hpp"

#include <array>
#include <cmath>
#include <vector>

using namespace teddn;
using teddn::testing::random_tensor;

TEST_CASE("time_index examples") {
    embed::TimeSlots s = embed::time_index(0, 288, 0);
    CHECK(s.tod == 0);
    CHECK(s.dow == 0);

    s = embed::time_index(289, 288, 0);
    CHECK(s.tod == 1);
    CHECK(s.dow == 1);

    // last PEMS08 row against independent modular arithmetic
    const long step = 17855;
    s = embed::time_index(step, 288, 0);
    CHECK(s.tod == step % 288);
    CHECK(s.dow == (0 + step / 288) % 7);
    CHECK(s.tod == 287);
    CHECK(s.dow == 5);
}

TEST_CASE("time_index start weekday offset and oracle sweep") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const long spd = 1 + rng.index(400);
        const int wd = static_cast<int>(rng.index(7));
        const long step = rng.index(100000);
        embed::TimeSlots s = embed::time_index(step, spd, wd);
        CHECK(s.tod == step % spd);
        CHECK(s.dow == (wd + step / spd) % 7);
    }
}

TEST_CASE("time_index weekly periodicity") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const long spd = 1 + rng.index(300);
        const int wd = static_cast<int>(rng.index(7));
        const long step = rng.index(50000);
        embed::TimeSlots a = embed::time_index(step, spd, wd);
        embed::TimeSlots b = embed::time_index(step + 7 * spd, spd, wd);
        CHECK(a.tod == b.tod);
        CHECK(a.dow == b.dow);
    }
}

TEST_CASE("time_index input validation") {
    CHECK_THROWS_AS(embed::time_index(0, 0, 0), ConfigError);
    CHECK_THROWS_AS(embed::time_index(0, 288, 7), ConfigError);
    CHECK_THROWS_AS(embed::time_index(0, 288, -1), ConfigError);
    CHECK_THROWS_AS(embed::time_index(-1, 288, 0), BoundsError);
}

TEST_CASE("table construction: shapes, init range, determinism") {
    Rng rng(3);
    embed::TimeTables t = embed::make_time_tables(12, 4, 5, rng, "time");
    CHECK(t.day.value.shape() == std::vector<long>{12, 5});
    CHECK(t.week.value.shape() == std::vector<long>{7, 5});
    CHECK(t.steps_per_day == 12);
    CHECK(t.start_weekday == 4);
    CHECK(t.day.name == "time.day");
    CHECK(t.week.name == "time.week");

    const double bound = 1.0 / std::sqrt(5.0);
    for (real v : t.day.value.values()) CHECK(std::fabs(v) <= bound);
    for (real v : t.week.value.values()) CHECK(std::fabs(v) <= bound);

    Rng rng2(3);
    embed::TimeTables t2 = embed::make_time_tables(12, 4, 5, rng2, "time");
    CHECK(teddn::testing::approx_equal(t.day.value, t2.day.value, 0));
    CHECK(teddn::testing::approx_equal(t.week.value, t2.week.value, 0));

    Rng rng3(4);
    embed::NodeTable n = embed::make_node_table(9, 4, rng3, "embed");
    CHECK(n.table.value.shape() == std::vector<long>{9, 4});
    CHECK(n.table.name == "embed.nodes");
    for (real v : n.table.value.values()) CHECK(std::fabs(v) <= 0.5);
}

TEST_CASE("lookup after zero initialization yields zero rows") {
    Rng rng(1);
    embed::TimeTables t = embed::make_time_tables(6, 0, 3, rng, "time");
    for (real& v : t.day.value.values()) v = 0;
    Tensor rows = embed::day_rows(t, {0, 2, 5, 2}, nullptr);
    CHECK(rows.shape() == std::vector<long>{4, 3});
    for (real v : rows.values()) CHECK(v == 0);
}

TEST_CASE("gathered rows equal table rows, duplicates identical") {
    Rng rng(2);
    embed::TimeTables t = embed::make_time_tables(6, 0, 3, rng, "time");
    Tensor rows = embed::day_rows(t, {4, 1, 4}, nullptr);
    for (long j = 0; j < 3; ++j) {
        CHECK(rows.at(std::array<long, 2>{0, j}) == t.day.value.at(std::array<long, 2>{4, j}));
        CHECK(rows.at(std::array<long, 2>{1, j}) == t.day.value.at(std::array<long, 2>{1, j}));
        CHECK(rows.at(std::array<long, 2>{2, j}) == rows.at(std::array<long, 2>{0, j}));
    }
}

TEST_CASE("out-of-range lookup is a bounds error") {
    Rng rng(2);
    embed::TimeTables t = embed::make_time_tables(6, 0, 3, rng, "time");
    CHECK_THROWS_AS(embed::day_rows(t, {6}, nullptr), BoundsError);
    CHECK_THROWS_AS(embed::week_rows(t, {-1}, nullptr), BoundsError);
}

TEST_CASE("one-hot gradient locality") {
    Rng rng(7);
    embed::TimeTables t = embed::make_time_tables(8, 0, 3, rng, "time");
    t.day.zero_grad();

    Tape tape;
    Tensor rows = embed::day_rows(t, {5}, &tape);
    Tensor loss = ops::reduce_sum(rows, {0, 1});
    tape.backward(loss);

    for (long i = 0; i < 8; ++i) {
        for (long j = 0; j < 3; ++j) {
            const real g = t.day.grad.at(std::array<long, 2>{i, j});
            CHECK(g == (i == 5 ? 1 : 0));
        }
    }
}

TEST_CASE("unused rows receive zero gradient") {
    Rng rng(9);
    embed::NodeTable n = embed::make_node_table(7, 2, rng, "embed");
    n.table.zero_grad();

    Tape tape;
    Tensor rows = embed::node_rows(n, &tape);
    Tensor some = ops::slice(rows, 0, 2, 3); // rows 2..4
    tape.backward(ops::mean_all(ops::mul(some, some)));

    for (long i = 0; i < 7; ++i) {
        double row_norm = 0;
        for (long j = 0; j < 2; ++j) {
            row_norm += std::fabs(n.table.grad.at(std::array<long, 2>{i, j}));
        }
        if (i >= 2 && i <= 4) CHECK(row_norm > 0);
        else CHECK(row_norm == 0);
    }
}

TEST_CASE("duplicate-index gradients accumulate, finite-difference oracle") {
    Rng rng(13);
    embed::TimeTables t = embed::make_time_tables(3, 0, 2, rng, "time");
    const std::vector<long> slots{0, 2, 2, 0, 2};
    Tensor weights = random_tensor(rng, {5, 2});

    t.day.zero_grad();
    Tape tape;
    Tensor rows = embed::day_rows(t, slots, &tape);
    Tensor loss = ops::mean_all(ops::mul(rows, weights));
    tape.backward(loss);

    Tensor original = t.day.value;
    auto f = [&](const Tensor& v) -> real {
        t.day.value = v;
        Tensor r = embed::day_rows(t, slots, nullptr);
        real out = ops::mean_all(ops::mul(r, weights)).item();
        t.day.value = original;
        return out;
    };
    Tensor fd = finite_difference_grad(f, original);
    CHECK(relative_error(t.day.grad, fd) < kGradCheckTolerance);

    // row 1 is never referenced
    CHECK(t.day.grad.at(std::array<long, 2>{1, 0}) == 0);
    CHECK(t.day.grad.at(std::array<long, 2>{1, 1}) == 0);
}

TEST_CASE("lookup bundles day, week and node rows") {
    Rng rng(21);
    embed::TimeTables t = embed::make_time_tables(10, 2, 3, rng, "time");
    embed::NodeTable n = embed::make_node_table(4, 2, rng, "embed");

    const std::vector<long> steps{0, 9, 10, 35};
    embed::LookupResult r = embed::lookup(t, n, steps, nullptr);
    CHECK(r.day.shape() == std::vector<long>{4, 3});
    CHECK(r.week.shape() == std::vector<long>{4, 3});
    CHECK(r.nodes.shape() == std::vector<long>{4, 2});

    for (size_t k = 0; k < steps.size(); ++k) {
        embed::TimeSlots s = embed::time_index(steps[k], 10, 2);
        for (long j = 0; j < 3; ++j) {
            CHECK(r.day.at(std::array<long, 2>{static_cast<long>(k), j})
                  == t.day.value.at(std::array<long, 2>{s.tod, j}));
            CHECK(r.week.at(std::array<long, 2>{static_cast<long>(k), j})
                  == t.week.value.at(std::array<long, 2>{s.dow, j}));
        }
    }
}
