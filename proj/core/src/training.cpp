#include "teddn/training.hpp"

#include "teddn/adam.hpp"
#include "teddn/checkpoint.hpp"
#include "teddn/error.hpp"
#include "teddn/ops.hpp"
#include "teddn/rng.hpp"
#include "teddn/tape.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace teddn {

namespace {

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::uint64_t epoch_seed(std::uint64_t base, long epoch) {
    return Rng(base).fork(1000 + static_cast<std::uint64_t>(epoch)).next();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
    if (!out) throw FormatError("write failed on " + path);
}

std::string format_number(double v) {
    std::ostringstream ss;
    ss.precision(std::numeric_limits<double>::max_digits10);
    ss << v;
    return ss.str();
}

// Re-runs the failing batch without a tape to locate the first bad stage.
[[noreturn]] void abort_non_finite(TeddnModel& model, const WindowBatch& batch, long epoch) {
    StageTrace trace;
    try {
        model.forward(batch.inputs, batch.tod, batch.dow, nullptr, &trace);
    } catch (const std::exception&) {
        // fall through with whatever the trace captured
    }
    const std::string* bad = trace.first_bad();
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch)
                       + "; first non-finite stage: " + (bad ? *bad : std::string("loss")));
}

} // namespace

Tensor horizon_loss(const Tensor& pred, const Tensor& target, long h, long t_out) {
    if (h < 1 || h > t_out) {
        throw ConfigError("loss horizon " + std::to_string(h) + " out of range [1, "
                          + std::to_string(t_out) + "]");
    }
    if (pred.shape() != target.shape()) {
        throw DimensionError("loss shapes differ: pred " + pred.shape_str() + " vs target "
                             + target.shape_str());
    }
    if (pred.rank() != 4 || pred.extent(1) != t_out) {
        throw DimensionError("loss expects (B, " + std::to_string(t_out)
                             + ", N, C) tensors, got " + pred.shape_str());
    }
    Tensor p = ops::slice(pred, 1, 0, h);
    Tensor t = ops::slice(target, 1, 0, h);
    return ops::mean_all(ops::abs(ops::sub(p, t)));
}

DataBundle prepare_data(TrafficSeries series, long t_h, long t_out) {
    DataBundle bundle;
    bundle.splits = chrono_split(series, t_h, t_out);
    bundle.stats = fit_normalizer(series, bundle.splits.train);
    bundle.series = std::move(series);
    return bundle;
}

MetricReport evaluate_model(TeddnModel& model, const DataBundle& data, Segment segment,
                            const TrainConfig& cfg) {
    const ModelConfig& mc = model.config();
    const std::vector<long> windows = make_windows(segment, mc.t_h, mc.t_out);
    MetricAccumulator acc(mc.t_out, cfg.mape_threshold);
    for (const auto& starts : batch_plan(windows, cfg.batch_size, false, 0)) {
        WindowBatch batch = gather_batch(data.series, data.stats, starts, mc.t_h, mc.t_out);
        Tensor pred = model.forward(batch.inputs, batch.tod, batch.dow, nullptr);
        acc.add(invert_norm(pred, data.stats), batch.targets);
    }
    return acc.report();
}

FitResult fit(TeddnModel& model, const DataBundle& data, const TrainConfig& cfg,
              const std::string& out_dir) {
    cfg.validate();
    const ModelConfig& mc = model.config();
    if (cfg.max_horizon != mc.t_out) {
        throw ConfigError("max_horizon " + std::to_string(cfg.max_horizon)
                          + " must equal the model horizon " + std::to_string(mc.t_out));
    }

    const std::vector<long> train_windows = make_windows(data.splits.train, mc.t_h, mc.t_out);
    auto params = model.parameters();
    Adam adam(params, AdamConfig{cfg.lr, static_cast<real>(0.9), static_cast<real>(0.999),
                                 cfg.adam_eps, cfg.weight_decay});
    PlateauLr plateau(cfg.lr, cfg.lr_decay, cfg.lr_plateau_window, cfg.lr_floor);
    EarlyStopping stopper(cfg.patience);

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    FitResult result;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    if (!out_dir.empty()) {
        result.checkpoint_path = (std::filesystem::path(out_dir) / "best.ckpt").string();
    }
    std::vector<Tensor> best_values(params.size());

    const auto run_start = std::chrono::steady_clock::now();
    for (long epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const long h = curriculum_horizon(epoch, cfg);
        const real lr = plateau.current();

        double loss_sum = 0;
        long sample_count = 0;
        for (const auto& starts :
             batch_plan(train_windows, cfg.batch_size, true, epoch_seed(cfg.seed, epoch))) {
            WindowBatch batch = gather_batch(data.series, data.stats, starts, mc.t_h, mc.t_out);
            Tape tape;
            Tensor pred = model.forward(batch.inputs, batch.tod, batch.dow, &tape);
            Tensor loss = horizon_loss(invert_norm(pred, data.stats), batch.targets, h, mc.t_out);
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) abort_non_finite(model, batch, epoch);
            loss_sum += loss_value * static_cast<double>(starts.size());
            sample_count += static_cast<long>(starts.size());

            adam.zero_grad();
            tape.backward(loss);
            adam.step(lr);
        }
        const double train_loss = loss_sum / static_cast<double>(sample_count);

        const MetricReport val = evaluate_model(model, data, data.splits.val, cfg);
        const double val_mae = val.average.mae;
        if (!std::isfinite(val_mae)) {
            throw NumericError("non-finite validation MAE at epoch " + std::to_string(epoch));
        }

        const bool stop = stopper.observe(epoch, val_mae);
        if (stopper.improved()) {
            result.best_epoch = epoch;
            result.best_val_mae = val_mae;
            for (size_t i = 0; i < params.size(); ++i) best_values[i] = params[i]->value.clone();
            if (!result.checkpoint_path.empty()) save_checkpoint(model, result.checkpoint_path);
        }

        result.log.push_back({epoch, static_cast<double>(lr), h, train_loss, val_mae,
                              elapsed(epoch_start)});
        plateau.observe(val_mae);
        if (stop) break;
    }

    // report from the best weights
    for (size_t i = 0; i < params.size(); ++i) {
        if (best_values[i].size() > 0) params[i]->value = best_values[i];
    }
    result.test = evaluate_model(model, data, data.splits.test, cfg);
    result.test.epoch = result.best_epoch;
    result.test.wall_seconds = elapsed(run_start);

    if (!out_dir.empty()) {
        std::ostringstream log_csv;
        log_csv << "epoch,lr,horizon,train_loss,val_mae\n";
        std::ostringstream timing_csv;
        timing_csv << "epoch,seconds\n";
        for (const EpochRow& row : result.log) {
            log_csv << row.epoch << ',' << format_number(row.lr) << ',' << row.horizon << ','
                    << format_number(row.train_loss) << ',' << format_number(row.val_mae) << '\n';
            timing_csv << row.epoch << ',' << format_number(row.seconds) << '\n';
        }
        const std::filesystem::path dir(out_dir);
        write_text((dir / "epoch_log.csv").string(), log_csv.str());
        write_text((dir / "timing.csv").string(), timing_csv.str());
        write_text((dir / "metrics.csv").string(), metrics_to_csv(result.test));
        write_text((dir / "metrics.json").string(), metrics_to_json(result.test));
    }
    return result;
}

std::vector<AblationRow> ablation_suite(const ModelConfig& base, const DataBundle& data,
                                        const TrainConfig& cfg, const std::string& out_dir) {
    std::vector<AblationRow> rows;
    for (const std::string& name : variant_names()) {
        const ModelConfig mc = variant(base, name);
        TeddnModel model = TeddnModel::build(mc, cfg.seed);

        std::string run_dir;
        if (!out_dir.empty()) {
            std::string slug = name;
            std::replace(slug.begin(), slug.end(), '/', '_');
            std::replace(slug.begin(), slug.end(), ' ', '_');
            run_dir = (std::filesystem::path(out_dir) / slug).string();
        }
        const auto start = std::chrono::steady_clock::now();
        FitResult fitted = fit(model, data, cfg, run_dir);
        rows.push_back({name, fitted.test, elapsed(start)});
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text((std::filesystem::path(out_dir) / "ablation.csv").string(),
                   ablation_to_csv(rows, base.t_out));
        std::ostringstream timing;
        timing << "variant,train_seconds\n";
        timing.precision(6);
        for (const AblationRow& row : rows) timing << row.variant << ',' << row.train_seconds << '\n';
        write_text((std::filesystem::path(out_dir) / "ablation_timing.csv").string(), timing.str());
    }
    return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows, long t_out) {
    std::vector<long> horizons;
    for (long h : {3L, 6L, 12L}) {
        const long clamped = std::min(h, t_out);
        if (horizons.empty() || horizons.back() != clamped) horizons.push_back(clamped);
    }

    std::ostringstream out;
    out.precision(10);
    out << "variant";
    for (long h : horizons) {
        out << ",mae_h" << h << ",rmse_h" << h << ",mape_h" << h;
    }
    out << ",mae_avg,rmse_avg,mape_avg\n";

    auto put = [&out](const HorizonMetrics& m) {
        out << ',' << m.mae << ',' << m.rmse << ',';
        if (m.mape_defined) out << m.mape;
        else out << "undefined";
    };
    for (const AblationRow& row : rows) {
        out << row.variant;
        for (long h : horizons) put(row.test.per_horizon[static_cast<size_t>(h - 1)]);
        put(row.test.average);
        out << '\n';
    }

    // informational: whether the full model stayed best on average MAE
    const AblationRow* full = nullptr;
    bool best = true;
    for (const AblationRow& row : rows) {
        if (row.variant == "full") full = &row;
    }
    if (full != nullptr) {
        for (const AblationRow& row : rows) {
            if (row.test.average.mae < full->test.average.mae) best = false;
        }
        out << "# full_best_on_avg_mae," << (best ? "yes" : "no") << '\n';
    }
    return out.str();
}

MetricReport persistence_baseline(const DataBundle& data, long t_h, long t_out,
                                  double mask_threshold) {
    const long n = data.series.nodes();
    const long c = data.series.channels();
    const long hist = t_h;
    const std::vector<long> windows = make_windows(data.splits.test, hist, t_out);

    MetricAccumulator acc(t_out, mask_threshold);
    const real* src = data.series.values.data();
    const long row_elems = n * c;
    Tensor pred = Tensor::zeros({1, t_out, n, c});
    Tensor target = Tensor::zeros({1, t_out, n, c});
    for (long w : windows) {
        const real* last = src + (w + hist - 1) * row_elems;
        for (long h = 0; h < t_out; ++h) {
            std::copy_n(last, row_elems, pred.data() + h * row_elems);
        }
        std::copy_n(src + (w + hist) * row_elems, t_out * row_elems, target.data());
        acc.add(pred, target);
    }
    return acc.report();
}

MetricReport historical_average_baseline(const DataBundle& data, long t_h, long t_out,
                                         double mask_threshold) {
    const long n = data.series.nodes();
    const long c = data.series.channels();
    const long spd = data.series.steps_per_day;
    const long hist = t_h;

    // per-(time-of-day, node, channel) training mean with a global fallback
    std::vector<double> sums(static_cast<size_t>(spd * n * c), 0);
    std::vector<long> counts(static_cast<size_t>(spd), 0);
    std::vector<double> global(static_cast<size_t>(c), 0);
    const real* src = data.series.values.data();
    const long row_elems = n * c;
    for (long row = data.splits.train.begin; row < data.splits.train.end; ++row) {
        const long tod = row % spd;
        counts[static_cast<size_t>(tod)] += 1;
        const real* cell = src + row * row_elems;
        for (long i = 0; i < row_elems; ++i) {
            sums[static_cast<size_t>(tod * row_elems + i)] += cell[i];
            global[static_cast<size_t>(i % c)] += cell[i];
        }
    }
    const double train_rows = static_cast<double>(data.splits.train.length() * n);
    for (long ch = 0; ch < c; ++ch) global[static_cast<size_t>(ch)] /= train_rows;

    const std::vector<long> windows = make_windows(data.splits.test, hist, t_out);
    MetricAccumulator acc(t_out, mask_threshold);
    Tensor pred = Tensor::zeros({1, t_out, n, c});
    Tensor target = Tensor::zeros({1, t_out, n, c});
    for (long w : windows) {
        for (long h = 0; h < t_out; ++h) {
            const long row = w + hist + h;
            const long tod = row % spd;
            real* dst = pred.data() + h * row_elems;
            if (counts[static_cast<size_t>(tod)] > 0) {
                const double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(tod)]);
                const double* cell = sums.data() + tod * row_elems;
                for (long i = 0; i < row_elems; ++i) dst[i] = static_cast<real>(cell[i] * inv);
            } else {
                for (long i = 0; i < row_elems; ++i) {
                    dst[i] = static_cast<real>(global[static_cast<size_t>(i % c)]);
                }
            }
        }
        std::copy_n(src + (w + hist) * row_elems, t_out * row_elems, target.data());
        acc.add(pred, target);
    }
    return acc.report();
}

} // namespace teddn
