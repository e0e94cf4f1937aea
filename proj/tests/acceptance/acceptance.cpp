// Acceptance suite: one pass/fail line per criterion. Criterion 5 (real
// PEMS08 data) lives in the acceptance_pems08 binary because it needs the
// converted archive.

#include "teddn/adam.hpp"
#include "teddn/config.hpp"
#include "teddn/cwam.hpp"
#include "teddn/data.hpp"
#include "teddn/disentangle_gate.hpp"
#include "teddn/gc_module.hpp"
#include "teddn/gradcheck.hpp"
#include "teddn/metrics.hpp"
#include "teddn/model.hpp"
#include "teddn/rng.hpp"
#include "teddn/schedules.hpp"
#include "teddn/tape.hpp"
#include "teddn/te_module.hpp"
#include "teddn/training.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace teddn;
namespace fs = std::filesystem;

struct Failure {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.nodes = 3;
    mc.channels = 1;
    mc.t_h = 2;
    mc.t_out = 2;
    mc.d_t = 2;
    mc.d_n = 2;
    mc.d_g = 2;
    mc.d_h = 2;
    mc.hops = 2;
    mc.reduction_ratio = 2;
    mc.steps_per_day = 8;
    mc.start_weekday = 3;
    return mc;
}

TrafficSeries sinusoid_series(long t, long n, long spd) {
    TrafficSeries s;
    s.steps_per_day = spd;
    s.start_weekday = 2;
    s.values = Tensor({t, n, 1});
    for (long step = 0; step < t; ++step) {
        for (long node = 0; node < n; ++node) {
            const double phase =
                2.0 * 3.14159265358979323846 * static_cast<double>(step % spd) / static_cast<double>(spd);
            s.values.data()[step * n + node] =
                static_cast<real>(50.0 + 20.0 * std::sin(phase + static_cast<double>(node)));
        }
    }
    return s;
}

// ---- criterion 1: end-to-end finite-difference gradient oracle ----

std::string criterion_gradient_oracle() {
    static_assert(sizeof(real) == 8, "gradient oracle runs in 64-bit mode");
    const auto t0 = std::chrono::steady_clock::now();
    const ModelConfig mc = tiny_config();
    const long seeds = 20;

    real worst = 0;
    std::string worst_name;
    for (long seed = 0; seed < seeds; ++seed) {
        TeddnModel model = TeddnModel::build(mc, static_cast<std::uint64_t>(seed));
        Rng rng(static_cast<std::uint64_t>(seed) * 977 + 11);

        Tensor inputs = Tensor::zeros({1, mc.t_h, mc.nodes, mc.channels});
        for (real& v : inputs.values()) v = static_cast<real>(rng.uniform(0.2, 1.8));
        Tensor targets = Tensor::zeros({1, mc.t_out, mc.nodes, mc.channels});
        for (real& v : targets.values()) v = static_cast<real>(rng.uniform(0.2, 1.8));
        std::vector<long> tod, dow;
        for (long i = 0; i < mc.t_h; ++i) {
            tod.push_back(rng.index(mc.steps_per_day));
            dow.push_back(rng.index(7));
        }
        NormStats stats;
        stats.mean.push_back(static_cast<real>(0.4));
        stats.stdev.push_back(static_cast<real>(1.3));

        auto params = model.parameters();
        for (Parameter* p : params) p->zero_grad();
        {
            Tape tape;
            Tensor pred = model.forward(inputs, tod, dow, &tape);
            Tensor loss = horizon_loss(invert_norm(pred, stats), targets, mc.t_out, mc.t_out);
            tape.backward(loss);
        }

        for (Parameter* p : params) {
            Tensor original = p->value;
            auto f = [&](const Tensor& v) -> real {
                p->value = v;
                Tensor pred = model.forward(inputs, tod, dow, nullptr);
                const real out =
                    horizon_loss(invert_norm(pred, stats), targets, mc.t_out, mc.t_out).item();
                p->value = original;
                return out;
            };
            const Tensor fd = finite_difference_grad(f, original);
            const real err = relative_error(p->grad, fd);
            if (err > worst) {
                worst = err;
                worst_name = p->name;
            }
        }
    }

    const double elapsed = seconds_since(t0);
    expect(worst < kGradCheckTolerance,
           "worst relative error " + fmt(worst) + " at " + worst_name);
    expect(elapsed < 60.0, "took " + fmt(elapsed) + " s, budget is 60 s");
    return "worst relative error " + fmt(worst) + " over " + std::to_string(seeds) + " seeds in "
           + fmt(elapsed) + " s";
}

// ---- criterion 2: algebraic invariants over 1000 random draws ----

std::string criterion_algebraic_invariants() {
    const long draws = 1000;
    const long t = 3, n = 4, c = 2, d_t = 2, d_n = 3, d_g = 3;

    for (long draw = 0; draw < draws; ++draw) {
        Rng rng(static_cast<std::uint64_t>(draw) + 1);

        // (a) exact split conservation and (d) omega strictly inside (0, 1)
        gate::Params gp = gate::make(d_t, d_n, d_g, 2, rng, "g");
        Tensor day({t, d_t}), week({t, d_t}), nodes({n, d_n});
        for (real& v : day.values()) v = static_cast<real>(rng.uniform(-2, 2));
        for (real& v : week.values()) v = static_cast<real>(rng.uniform(-2, 2));
        for (real& v : nodes.values()) v = static_cast<real>(rng.uniform(-2, 2));
        Tensor omega = gate::gate_values(day, week, nodes, gp, nullptr);
        for (real v : omega.values()) {
            expect(v > 0 && v < 1, "omega left (0, 1): " + fmt(v));
        }

        const double magnitude = std::pow(10.0, static_cast<double>(draw % 7) - 3.0);
        Tensor x({t, n, c});
        for (real& v : x.values()) v = static_cast<real>(rng.uniform(-magnitude, magnitude));
        auto [x1, x2] = gate::split(x, omega);
        for (long i = 0; i < x.size(); ++i) {
            expect(x1.data()[i] + x2.data()[i] == x.data()[i],
                   "x1 + x2 != x at flat index " + std::to_string(i));
        }

        // (b) one-directional, hollow adjacency; (c) stochastic rows
        gc::GraphParams graph = gc::make_graph(5, d_g, static_cast<real>(3), rng, "a");
        Tensor adj = gc::learn_adjacency(graph, nullptr);
        for (long i = 0; i < 5; ++i) {
            expect(adj.at(std::array<long, 2>{i, i}) == 0, "diag(A) != 0");
            for (long j = 0; j < 5; ++j) {
                expect(adj.at(std::array<long, 2>{i, j}) * adj.at(std::array<long, 2>{j, i}) == 0,
                       "A is not one-directional");
            }
        }
        Tensor p = gc::normalize_adjacency(adj);
        for (long i = 0; i < 5; ++i) {
            double row = 0;
            for (long j = 0; j < 5; ++j) row += p.at(std::array<long, 2>{i, j});
            expect(std::fabs(row - 1.0) <= 1e-6, "row sum " + fmt(row));
        }

        // (e) centered coefficients, scale-invariant ranking
        Tensor feats({6, 4});
        for (real& v : feats.values()) v = static_cast<real>(rng.uniform(-10, 10));
        Tensor chat = te::normalize_coeffs(
            te::importance(te::global_descriptor(feats), feats), static_cast<real>(1e-5));
        double mean = 0;
        for (real v : chat.values()) mean += v;
        mean /= static_cast<double>(chat.size());
        expect(std::fabs(mean) <= 1e-12, "mean(c_hat) = " + fmt(mean));

        std::vector<long> order(6);
        std::iota(order.begin(), order.end(), 0L);
        std::sort(order.begin(), order.end(),
                  [&](long a, long b) { return chat.data()[a] < chat.data()[b]; });
        for (double lambda : {0.5, 2.0, 10.0}) {
            Tensor scaled = feats;
            for (real& v : scaled.values()) v *= static_cast<real>(lambda);
            Tensor chat_s = te::normalize_coeffs(
                te::importance(te::global_descriptor(scaled), scaled), static_cast<real>(1e-5));
            std::vector<long> order_s(6);
            std::iota(order_s.begin(), order_s.end(), 0L);
            std::sort(order_s.begin(), order_s.end(),
                      [&](long a, long b) { return chat_s.data()[a] < chat_s.data()[b]; });
            expect(order_s == order, "argsort changed under lambda " + fmt(lambda));
        }
    }
    return std::to_string(draws) + " draws of split/adjacency/propagation/TE invariants";
}

// ---- criterion 3: closed-form spot values ----

std::string criterion_spot_values() {
    Rng rng(7);

    gate::Params gp = gate::make(2, 3, 3, 2, rng, "g");
    for (Parameter* p : {&gp.attention.reduce, &gp.attention.expand, &gp.w1, &gp.w2}) {
        for (real& v : p->value.values()) v = 0;
    }
    Tensor day({3, 2}), week({3, 2}), nodes({4, 3});
    for (real& v : day.values()) v = static_cast<real>(rng.uniform(-2, 2));
    for (real& v : week.values()) v = static_cast<real>(rng.uniform(-2, 2));
    for (real& v : nodes.values()) v = static_cast<real>(rng.uniform(-2, 2));
    Tensor omega = gate::gate_values(day, week, nodes, gp, nullptr);
    for (real v : omega.values()) expect(v == static_cast<real>(0.5), "zero gate omega != 0.5");

    cwam::Params cp = cwam::make(4, 2, rng, "c");
    for (real& v : cp.reduce.value.values()) v = 0;
    for (real& v : cp.expand.value.values()) v = 0;
    Tensor u({5, 4});
    for (real& v : u.values()) v = static_cast<real>(rng.uniform(-3, 3));
    Tensor s = cwam::excite(cwam::squeeze(u), cp.reduce.value, cp.expand.value);
    for (real v : s.values()) expect(v == static_cast<real>(0.5), "zero CWAM scale != 0.5");
    Tensor scaled = cwam::apply(u, cp, nullptr);
    for (long i = 0; i < u.size(); ++i) {
        expect(scaled.data()[i] == static_cast<real>(0.5) * u.data()[i],
               "zero CWAM did not halve the input");
    }

    gc::GraphParams graph = gc::make_graph(4, 3, static_cast<real>(3), rng, "a");
    Tensor p = gc::normalize_adjacency(gc::learn_adjacency(graph, nullptr));
    Tensor h({4, 3});
    for (real& v : h.values()) v = static_cast<real>(rng.uniform(-2, 2));
    std::vector<Tensor> hops = gc::propagate(h, p, static_cast<real>(1), 3);
    for (const Tensor& state : hops) {
        for (long i = 0; i < h.size(); ++i) {
            expect(state.data()[i] == h.data()[i], "beta_res = 1 propagation moved the input");
        }
    }
    return "zero-gate, zero-CWAM, and frozen-propagation identities hold exactly";
}

// ---- criterion 4: overfit a 2-node daily sinusoid ----

std::string criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    TrafficSeries series = sinusoid_series(200, 2, 24);

    double lo = series.values.data()[0], hi = lo;
    for (real v : series.values.values()) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    const double target = 0.01 * (hi - lo);

    ModelConfig mc;
    mc.nodes = 2;
    mc.channels = 1;
    mc.t_h = 12;
    mc.t_out = 12;
    mc.d_t = 8;
    mc.d_n = 8;
    mc.d_g = 8;
    mc.d_h = 16;
    mc.hops = 2;
    mc.reduction_ratio = 2;
    mc.steps_per_day = 24;
    mc.start_weekday = 2;

    DataBundle data = prepare_data(std::move(series), mc.t_h, mc.t_out);
    const std::vector<long> train_windows = make_windows(data.splits.train, mc.t_h, mc.t_out);

    TeddnModel model = TeddnModel::build(mc, 1);
    AdamConfig ac;
    ac.lr = static_cast<real>(0.005);
    ac.weight_decay = 0;
    Adam opt(model.parameters(), ac);

    const long max_epochs = 500;
    long reached_at = -1;
    double train_mae = 0;
    for (long epoch = 0; epoch < max_epochs; ++epoch) {
        const auto plan =
            batch_plan(train_windows, 16, true, static_cast<std::uint64_t>(epoch) + 1);
        for (const std::vector<long>& starts : plan) {
            WindowBatch batch = gather_batch(data.series, data.stats, starts, mc.t_h, mc.t_out);
            Tape tape;
            Tensor pred = model.forward(batch.inputs, batch.tod, batch.dow, &tape);
            Tensor loss =
                horizon_loss(invert_norm(pred, data.stats), batch.targets, mc.t_out, mc.t_out);
            opt.zero_grad();
            tape.backward(loss);
            opt.step();
        }

        MetricAccumulator acc(mc.t_out, 1.0);
        for (const std::vector<long>& starts : batch_plan(train_windows, 16, false, 0)) {
            WindowBatch batch = gather_batch(data.series, data.stats, starts, mc.t_h, mc.t_out);
            Tensor pred = model.forward(batch.inputs, batch.tod, batch.dow, nullptr);
            acc.add(invert_norm(pred, data.stats), batch.targets);
        }
        train_mae = acc.report().average.mae;
        if (train_mae < target) {
            reached_at = epoch;
            break;
        }
    }

    const double elapsed = seconds_since(t0);
    expect(reached_at >= 0, "train MAE " + fmt(train_mae) + " never dropped below "
                                + fmt(target) + " (1% of range) in 500 epochs");
    expect(elapsed < 300.0, "took " + fmt(elapsed) + " s, budget is 300 s");
    return "train MAE " + fmt(train_mae) + " < " + fmt(target) + " after "
           + std::to_string(reached_at + 1) + " epochs in " + fmt(elapsed) + " s";
}

// ---- criterion 6: ablation harness emits the four-variant table ----

std::string criterion_ablation() {
    DataBundle data = prepare_data(sinusoid_series(120, 2, 24), 12, 12);

    ModelConfig mc;
    mc.nodes = 2;
    mc.channels = 1;
    mc.t_h = 12;
    mc.t_out = 12;
    mc.d_t = 3;
    mc.d_n = 3;
    mc.d_g = 3;
    mc.d_h = 4;
    mc.hops = 2;
    mc.reduction_ratio = 2;
    mc.steps_per_day = 24;
    mc.start_weekday = 2;

    TrainConfig tc;
    tc.lr = static_cast<real>(0.001);
    tc.batch_size = 16;
    tc.warmup_epochs = 1;
    tc.curriculum_step = 1;
    tc.max_horizon = 12;
    tc.patience = 50;
    tc.max_epochs = 2;
    tc.seed = 3;

    std::vector<AblationRow> rows = ablation_suite(mc, data, tc, "");
    expect(rows.size() == 4, "expected 4 variants, got " + std::to_string(rows.size()));
    const std::vector<std::string> expected = {"full", "w/o TE", "w/o DG", "w/o GRU"};
    for (size_t i = 0; i < expected.size(); ++i) {
        expect(rows[i].variant == expected[i], "variant order broke at row " + std::to_string(i));
        expect(rows[i].test.per_horizon.size() == 12, "missing per-horizon rows");
    }

    const std::string csv = ablation_to_csv(rows, mc.t_out);
    const std::string header = "variant,mae_h3,rmse_h3,mape_h3,mae_h6,rmse_h6,mape_h6,"
                               "mae_h12,rmse_h12,mape_h12,mae_avg,rmse_avg,mape_avg";
    expect(csv.rfind(header, 0) == 0, "ablation CSV header shape is wrong");
    const size_t flag = csv.find("# full_best_on_avg_mae,");
    expect(flag != std::string::npos, "missing informational best-variant flag");

    double best = rows[0].test.average.mae;
    for (const AblationRow& row : rows) best = std::min(best, row.test.average.mae);
    const bool full_best = rows[0].test.average.mae == best;
    return std::string("four variants reported; full best on avg MAE: ")
           + (full_best ? "yes" : "no") + " (informational)";
}

// ---- criterion 7: training protocol conformance ----

std::string criterion_protocol() {
    TrainConfig proto; // defaults carry the published protocol
    const std::vector<std::pair<long, long>> table = {{0, 1}, {29, 1}, {30, 1}, {33, 2}, {63, 12}};
    for (const auto& [epoch, horizon] : table) {
        const long got = curriculum_horizon(epoch, proto);
        expect(got == horizon, "curriculum(" + std::to_string(epoch) + ") = " + std::to_string(got)
                                   + ", want " + std::to_string(horizon));
    }

    TrafficSeries big;
    big.steps_per_day = 288;
    big.start_weekday = 0;
    big.values = Tensor::zeros({17856, 1, 1});
    Splits splits = chrono_split(big, 12, 12);
    expect(splits.train.length() == 10713,
           "train length " + std::to_string(splits.train.length()));
    expect(splits.val.length() == 3571, "val length " + std::to_string(splits.val.length()));
    expect(splits.test.length() == 3572, "test length " + std::to_string(splits.test.length()));

    EarlyStopping stop(100);
    long halted_at = -1;
    for (long epoch = 0; epoch < 400; ++epoch) {
        const double val = epoch <= 7 ? 10.0 - static_cast<double>(epoch) : 3.0;
        if (stop.observe(epoch, val)) {
            halted_at = epoch;
            break;
        }
    }
    expect(stop.best_epoch() == 7, "best epoch " + std::to_string(stop.best_epoch()));
    expect(halted_at == 107, "halted at " + std::to_string(halted_at) + ", want best + 100 = 107");
    return "curriculum table, 10713/3571/3572 split, halt at best + 100";
}

// ---- criterion 8: metric oracle ----

std::string criterion_metric_oracle() {
    const long b = 2, h = 3, n = 4, c = 2;
    const double threshold = 1.0;

    for (long draw = 0; draw < 100; ++draw) {
        Rng rng(static_cast<std::uint64_t>(draw) + 31);
        Tensor pred({b, h, n, c}), target({b, h, n, c});
        for (real& v : pred.values()) v = static_cast<real>(rng.uniform(-50, 50));
        for (real& v : target.values()) {
            v = rng.uniform(0, 1) < 0.15 ? 0 : static_cast<real>(rng.uniform(-50, 50));
        }

        MetricReport got = metrics(pred, target, threshold);

        for (long step = 0; step < h; ++step) {
            double abs = 0, sq = 0, ape = 0;
            long count = 0, masked = 0;
            for (long bi = 0; bi < b; ++bi) {
                for (long ni = 0; ni < n; ++ni) {
                    for (long ci = 0; ci < c; ++ci) {
                        const double p =
                            pred.at(std::array<long, 4>{bi, step, ni, ci});
                        const double y =
                            target.at(std::array<long, 4>{bi, step, ni, ci});
                        abs += std::fabs(p - y);
                        sq += (p - y) * (p - y);
                        ++count;
                        if (std::fabs(y) >= threshold) {
                            ape += std::fabs((p - y) / y);
                            ++masked;
                        }
                    }
                }
            }
            const HorizonMetrics& hm = got.per_horizon[static_cast<size_t>(step)];
            expect(std::fabs(hm.mae - abs / count) <= 1e-10, "MAE diverged");
            expect(std::fabs(hm.rmse - std::sqrt(sq / count)) <= 1e-10, "RMSE diverged");
            expect(hm.mape_defined == (masked > 0), "MAPE mask flag diverged");
            if (masked > 0) {
                expect(std::fabs(hm.mape - 100.0 * ape / masked) <= 1e-10, "MAPE diverged");
            }
        }
    }
    return "100 random pairs match the scalar-loop oracle to 1e-10";
}

// ---- criterion 9: byte-identical reruns of the train command ----

struct Scratch {
    fs::path path;
    Scratch() {
        path = fs::temp_directory_path() / "teddn_acceptance";
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Scratch() { fs::remove_all(path); }
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_train(const std::string& exe, const std::string& config, const std::string& out_dir) {
    const std::string cmd = "'" + exe + "' train --config '" + config + "' --set 'output_dir="
                            + out_dir + "' > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string criterion_determinism() {
    const char* exe = std::getenv("TEDDN_CLI");
    expect(exe != nullptr, "TEDDN_CLI must point at the teddn binary");

    Scratch scratch;
    const std::string data_bin = (scratch.path / "fixture.bin").string();
    save_flatbin(sinusoid_series(120, 2, 24), data_bin);

    const std::string config = (scratch.path / "config.json").string();
    {
        std::ofstream out(config);
        out << "{\n"
            << "  \"dataset\": {\"format\": \"flatbin\", \"path\": \"" << data_bin << "\"},\n"
            << "  \"model\": {\"t_h\": 4, \"t_out\": 4, \"d_t\": 3, \"d_n\": 3, \"d_g\": 3,\n"
            << "            \"d_h\": 4, \"hops\": 2, \"reduction_ratio\": 2},\n"
            << "  \"train\": {\"lr\": 0.001, \"batch_size\": 16, \"warmup_epochs\": 2,\n"
            << "            \"curriculum_step\": 1, \"max_horizon\": 4, \"patience\": 50,\n"
            << "            \"max_epochs\": 4, \"seed\": 5},\n"
            << "  \"output_dir\": \"" << (scratch.path / "run_a").string() << "\"\n"
            << "}\n";
    }

    const fs::path run_a = scratch.path / "run_a";
    const fs::path run_b = scratch.path / "run_b";
    expect(run_train(exe, config, run_a.string()) == 0, "first train run failed");
    expect(run_train(exe, config, run_b.string()) == 0, "second train run failed");

    for (const char* name : {"epoch_log.csv", "best.ckpt", "metrics.csv"}) {
        const std::string a = read_file(run_a / name);
        const std::string b = read_file(run_b / name);
        expect(!a.empty(), std::string(name) + " missing");
        expect(a == b, std::string(name) + " differs between reruns");
    }
    return "epoch logs, checkpoints, and metrics byte-identical across reruns";
}

} // namespace

int main() {
    struct Criterion {
        int number;
        const char* label;
        std::string (*body)();
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient oracle", criterion_gradient_oracle},
        {2, "algebraic invariants", criterion_algebraic_invariants},
        {3, "closed-form spot values", criterion_spot_values},
        {4, "overfit smoke test", criterion_overfit},
        {6, "ablation harness", criterion_ablation},
        {7, "protocol conformance", criterion_protocol},
        {8, "metric oracle", criterion_metric_oracle},
        {9, "determinism", criterion_determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool pass = false;
        try {
            detail = c.body();
            pass = true;
        } catch (const Failure& f) {
            detail = f.what;
        } catch (const std::exception& e) {
            detail = std::string("unexpected error: ") + e.what();
        }
        if (!pass) ++failures;
        std::cout << "criterion " << c.number << " (" << c.label << "): "
                  << (pass ? "PASS" : "FAIL") << " - " << detail << "\n";
        std::cout.flush();
    }
    std::cout << "criterion 5 (desk-scale PEMS08): covered by the acceptance_pems08 binary\n";
    return failures == 0 ? 0 : 1;
}
