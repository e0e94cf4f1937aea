#include "teddn/metrics.hpp"

#include "teddn/error.hpp"

#include "json.hpp"

#include <cmath>
#include <sstream>

namespace teddn {

namespace {

HorizonMetrics finalize(double abs, double sq, double ape, long count, long mape_count) {
    HorizonMetrics m;
    if (count > 0) {
        m.mae = abs / static_cast<double>(count);
        m.rmse = std::sqrt(sq / static_cast<double>(count));
    }
    m.mape_defined = mape_count > 0;
    m.mape = m.mape_defined ? 100.0 * ape / static_cast<double>(mape_count) : 0.0;
    return m;
}

void format_metric(std::ostream& out, const HorizonMetrics& m) {
    out << m.mae << "," << m.rmse << ",";
    if (m.mape_defined)
        out << m.mape;
    else
        out << "undefined";
}

} // namespace

MetricAccumulator::MetricAccumulator(long horizons, double mask_threshold)
    : sums_(static_cast<std::size_t>(horizons)), mask_threshold_(mask_threshold) {
    if (horizons < 1) throw ContractError("metrics: need at least one horizon");
}

void MetricAccumulator::add(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("metrics: pred " + pred.shape_str() + " vs target " +
                             target.shape_str());
    if (pred.rank() != 4 || pred.extent(1) != static_cast<long>(sums_.size()))
        throw DimensionError("metrics: expected (B, " + std::to_string(sums_.size()) +
                             ", N, C), got " + pred.shape_str());
    const long b = pred.extent(0);
    const long h = pred.extent(1);
    const long inner = pred.extent(2) * pred.extent(3);
    const real* pp = pred.data();
    const real* pt = target.data();
    for (long i = 0; i < b; ++i)
        for (long j = 0; j < h; ++j) {
            Sums& s = sums_[static_cast<std::size_t>(j)];
            const long base = (i * h + j) * inner;
            for (long k = 0; k < inner; ++k) {
                const double y = pt[base + k];
                const double e = static_cast<double>(pp[base + k]) - y;
                s.abs += std::fabs(e);
                s.sq += e * e;
                ++s.count;
                if (std::fabs(y) > mask_threshold_) {
                    s.ape += std::fabs(e) / std::fabs(y);
                    ++s.mape_count;
                }
            }
        }
    total_count_ += b * h * inner;
}

MetricReport MetricAccumulator::report() const {
    MetricReport r;
    double abs = 0;
    double sq = 0;
    double ape = 0;
    long count = 0;
    long mape_count = 0;
    for (const Sums& s : sums_) {
        r.per_horizon.push_back(finalize(s.abs, s.sq, s.ape, s.count, s.mape_count));
        abs += s.abs;
        sq += s.sq;
        ape += s.ape;
        count += s.count;
        mape_count += s.mape_count;
    }
    r.average = finalize(abs, sq, ape, count, mape_count);
    return r;
}

MetricReport metrics(const Tensor& pred, const Tensor& target, double mask_threshold) {
    if (pred.rank() != 4)
        throw DimensionError("metrics: expected (B, H, N, C), got " + pred.shape_str());
    MetricAccumulator acc(pred.extent(1), mask_threshold);
    acc.add(pred, target);
    return acc.report();
}

std::string metrics_to_csv(const MetricReport& report) {
    std::ostringstream out;
    out.precision(10);
    out << "horizon,mae,rmse,mape\n";
    for (std::size_t i = 0; i < report.per_horizon.size(); ++i) {
        out << (i + 1) << ",";
        format_metric(out, report.per_horizon[i]);
        out << "\n";
    }
    out << "avg,";
    format_metric(out, report.average);
    out << "\n";
    return out.str();
}

std::string metrics_to_json(const MetricReport& report) {
    nlohmann::json j;
    auto pack = [](const HorizonMetrics& m) {
        nlohmann::json o;
        o["mae"] = m.mae;
        o["rmse"] = m.rmse;
        if (m.mape_defined)
            o["mape"] = m.mape;
        else
            o["mape"] = nullptr;
        return o;
    };
    j["per_horizon"] = nlohmann::json::array();
    for (const HorizonMetrics& m : report.per_horizon) j["per_horizon"].push_back(pack(m));
    j["average"] = pack(report.average);
    if (report.epoch >= 0) j["epoch"] = report.epoch;
    return j.dump(2) + "\n";
}

} // namespace teddn
