#pragma once

#include "teddn/data.hpp"
#include "teddn/metrics.hpp"
#include "teddn/model.hpp"
#include "teddn/schedules.hpp"
#include "teddn/tensor.hpp"

#include <string>
#include <vector>

namespace teddn {

// MAE over the first h of t_out horizon steps, raw scale.
Tensor horizon_loss(const Tensor& pred, const Tensor& target, long h, long t_out);

struct DataBundle {
    TrafficSeries series;
    Splits splits;
    NormStats stats; // fitted on the training segment only
};

DataBundle prepare_data(TrafficSeries series, long t_h, long t_out);

struct EpochRow {
    long epoch = 0;
    double lr = 0;
    long horizon = 0;
    double train_loss = 0;
    double val_mae = 0;
    double seconds = 0; // timing log only, kept out of the primary epoch log
};

struct FitResult {
    std::vector<EpochRow> log;
    long best_epoch = -1;
    double best_val_mae = 0;
    MetricReport test; // best checkpoint on the test split
    std::string checkpoint_path;
};

// Full training loop: shuffled curriculum epochs, plateau LR decay, early
// stopping on validation MAE, best-checkpoint test report. When out_dir is
// non-empty, writes epoch_log.csv, timing.csv, best.ckpt, metrics.csv and
// metrics.json there. A non-finite loss aborts with the first bad stage named.
FitResult fit(TeddnModel& model, const DataBundle& data, const TrainConfig& cfg,
              const std::string& out_dir);

MetricReport evaluate_model(TeddnModel& model, const DataBundle& data, Segment segment,
                            const TrainConfig& cfg);

struct AblationRow {
    std::string variant;
    MetricReport test;
    double train_seconds = 0; // informational
};

// Trains every variant with the same seed and data; rows follow
// variant_names() order. Writes per-variant runs under out_dir plus a
// variant-by-horizon ablation.csv when out_dir is non-empty.
std::vector<AblationRow> ablation_suite(const ModelConfig& base, const DataBundle& data,
                                        const TrainConfig& cfg, const std::string& out_dir);

// horizons 3, 6, 12 (clamped to T_out) and the pooled average, one row per
// variant, plus an informational full-model-best flag line.
std::string ablation_to_csv(const std::vector<AblationRow>& rows, long t_out);

// Repeats the last input step across all horizons; evaluated on the test
// split with the same window geometry as the model.
MetricReport persistence_baseline(const DataBundle& data, long t_h, long t_out,
                                  double mask_threshold);

// Predicts the per-(node, time-of-day, channel) training mean.
MetricReport historical_average_baseline(const DataBundle& data, long t_h, long t_out,
                                         double mask_threshold);

} // namespace teddn
