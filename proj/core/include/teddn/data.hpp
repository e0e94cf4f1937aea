#pragma once

#include "teddn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace teddn {

struct TrafficSeries {
    Tensor values; // (T, N, C)
    long steps_per_day = 288;
    int start_weekday = 0;

    long steps() const { return values.extent(0); }
    long nodes() const { return values.extent(1); }
    long channels() const { return values.extent(2); }
};

// Half-open row range of the source series.
struct Segment {
    long begin = 0;
    long end = 0;
    long length() const { return end - begin; }
};

struct Splits {
    Segment train;
    Segment val;
    Segment test;
};

struct NormStats {
    std::vector<real> mean;  // per channel
    std::vector<real> stdev; // per channel, floored at 1e-6
};

// A training/evaluation batch: normalized inputs, raw-scale targets, and the
// global time-slot indices of every input step (row-major by sample).
struct WindowBatch {
    Tensor inputs;  // (B, T_h, N, C) normalized
    Tensor targets; // (B, T_out, N, C) raw
    std::vector<long> tod;
    std::vector<long> dow;
    std::vector<long> starts; // source row of each window
};

// One file per channel, T rows by N comma-separated columns, optional
// single header line.
TrafficSeries load_csv(const std::vector<std::string>& channel_paths, long steps_per_day,
                       int start_weekday);

// Raw little-endian row-major payload described by a `<path>.json` sidecar
// {T, N, C, dtype, steps_per_day, start_weekday}; dtype is f32 or f64.
TrafficSeries load_flatbin(const std::string& path);
void save_flatbin(const TrafficSeries& series, const std::string& path);

TrafficSeries select_channels(const TrafficSeries& series, const std::vector<long>& channels);

// Chronological 6:2:2 cut; every segment must fit at least one window.
Splits chrono_split(const TrafficSeries& series, long t_h, long t_out);

// Start rows of every window that fits inside the segment.
std::vector<long> make_windows(Segment segment, long t_h, long t_out);

// Group window starts into batches; shuffled deterministically when a seed
// is given, in order otherwise. The last partial batch is kept.
std::vector<std::vector<long>> batch_plan(std::vector<long> windows, long batch_size, bool shuffle,
                                          std::uint64_t seed);

NormStats fit_normalizer(const TrafficSeries& series, Segment train);
Tensor apply_norm(const Tensor& x, const NormStats& stats);  // (..., C)
Tensor invert_norm(const Tensor& x, const NormStats& stats); // differentiable

WindowBatch gather_batch(const TrafficSeries& series, const NormStats& stats,
                         const std::vector<long>& starts, long t_h, long t_out);

struct ConvertResult {
    long steps = 0;
    long nodes = 0;
    long channels = 0;
    std::string payload_path;
    std::string sidecar_path;
};

// Ingest a .npz/.npy archive (the public PEMS layout) into flatbin + sidecar
// inside out_dir. Deterministic and idempotent.
ConvertResult convert_archive(const std::string& archive_path, const std::string& out_dir,
                              long steps_per_day, int start_weekday);

} // namespace teddn
