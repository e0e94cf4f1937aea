#pragma once

#include "teddn/tensor.hpp"

#include <string>
#include <vector>

namespace teddn {

struct HorizonMetrics {
    double mae = 0;
    double rmse = 0;
    double mape = 0;          // percent
    bool mape_defined = true; // false when every target was masked
};

struct MetricReport {
    std::vector<HorizonMetrics> per_horizon; // index 0 = horizon 1
    HorizonMetrics average;                  // pooled over all horizon steps
    long epoch = -1;
    double wall_seconds = 0; // never written into primary output files
};

// Streaming accumulation over batches of raw-scale (B, H, N, C) tensors.
class MetricAccumulator {
public:
    MetricAccumulator(long horizons, double mask_threshold);

    void add(const Tensor& pred, const Tensor& target);
    MetricReport report() const;
    long count() const { return total_count_; }

private:
    struct Sums {
        double abs = 0;
        double sq = 0;
        double ape = 0;
        long count = 0;
        long mape_count = 0;
    };
    std::vector<Sums> sums_;
    double mask_threshold_;
    long total_count_ = 0;
};

// One-shot form of the accumulator.
MetricReport metrics(const Tensor& pred, const Tensor& target, double mask_threshold);

// horizon,mae,rmse,mape rows plus an "avg" row; undefined MAPE prints as
// "undefined". Deterministic byte-for-byte given the report.
std::string metrics_to_csv(const MetricReport& report);
std::string metrics_to_json(const MetricReport& report);

} // namespace teddn
