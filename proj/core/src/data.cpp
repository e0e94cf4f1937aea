#include "teddn/data.hpp"

#include "teddn/embeddings.hpp"
#include "teddn/error.hpp"
#include "teddn/ops.hpp"
#include "teddn/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace teddn {

namespace {

bool parse_cell(const std::string& cell, real& out) {
    try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) {
            ++used;
        }
        if (used != cell.size()) return false;
        out = static_cast<real>(v);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool blank_line(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

// One channel file: rows of comma-separated values, optional header line.
std::vector<std::vector<real>> load_channel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open csv file " + path);

    std::vector<std::vector<real>> rows;
    std::string line;
    long line_no = 0;
    bool header_checked = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank_line(line)) continue;
        std::vector<std::string> cells = split_row(line);
        std::vector<real> parsed(cells.size());
        bool ok = true;
        size_t bad_col = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (!parse_cell(cells[i], parsed[i])) {
                ok = false;
                bad_col = i;
                break;
            }
        }
        if (!ok) {
            if (!header_checked) {
                header_checked = true; // single header line is allowed
                continue;
            }
            throw FormatError("unparseable cell in " + path + " at row " + std::to_string(line_no)
                              + ", column " + std::to_string(bad_col + 1) + ": '"
                              + cells[bad_col] + "'");
        }
        header_checked = true;
        if (!rows.empty() && parsed.size() != rows.front().size()) {
            throw FormatError("ragged csv " + path + ": row " + std::to_string(line_no) + " has "
                              + std::to_string(parsed.size()) + " columns, expected "
                              + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(parsed));
    }
    if (rows.empty()) throw FormatError("csv file " + path + " has no data rows");
    return rows;
}

void validate_calendar(long steps_per_day, int start_weekday) {
    if (steps_per_day < 1) {
        throw ConfigError("steps_per_day must be positive, got " + std::to_string(steps_per_day));
    }
    if (start_weekday < 0 || start_weekday > 6) {
        throw ConfigError("start_weekday must be in [0, 6], got " + std::to_string(start_weekday));
    }
}

} // namespace

TrafficSeries load_csv(const std::vector<std::string>& channel_paths, long steps_per_day,
                       int start_weekday) {
    validate_calendar(steps_per_day, start_weekday);
    if (channel_paths.empty()) throw ConfigError("load_csv needs at least one channel file");

    std::vector<std::vector<std::vector<real>>> channels;
    channels.reserve(channel_paths.size());
    for (const std::string& path : channel_paths) channels.push_back(load_channel_csv(path));

    const long t = static_cast<long>(channels[0].size());
    const long n = static_cast<long>(channels[0][0].size());
    for (size_t c = 1; c < channels.size(); ++c) {
        long tc = static_cast<long>(channels[c].size());
        long nc = static_cast<long>(channels[c][0].size());
        if (tc != t || nc != n) {
            throw FormatError("channel file " + channel_paths[c] + " is " + std::to_string(tc)
                              + "x" + std::to_string(nc) + " but " + channel_paths[0] + " is "
                              + std::to_string(t) + "x" + std::to_string(n));
        }
    }

    const long c_count = static_cast<long>(channels.size());
    TrafficSeries series;
    series.values = Tensor::zeros({t, n, c_count});
    series.steps_per_day = steps_per_day;
    series.start_weekday = start_weekday;
    real* dst = series.values.data();
    for (long row = 0; row < t; ++row) {
        for (long col = 0; col < n; ++col) {
            for (long ch = 0; ch < c_count; ++ch) {
                dst[(row * n + col) * c_count + ch] = channels[ch][row][col];
            }
        }
    }
    check_finite(series.values, "csv series");
    return series;
}

TrafficSeries load_flatbin(const std::string& path) {
    const std::string sidecar_path = path + ".json";
    std::ifstream meta(sidecar_path);
    if (!meta) throw FormatError("cannot open sidecar " + sidecar_path);

    nlohmann::json sidecar;
    try {
        meta >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad sidecar " + sidecar_path + ": " + e.what());
    }

    long t = 0, n = 0, c = 0;
    std::string dtype;
    TrafficSeries series;
    try {
        t = sidecar.at("T").get<long>();
        n = sidecar.at("N").get<long>();
        c = sidecar.at("C").get<long>();
        dtype = sidecar.at("dtype").get<std::string>();
        series.steps_per_day = sidecar.at("steps_per_day").get<long>();
        series.start_weekday = sidecar.at("start_weekday").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad sidecar " + sidecar_path + ": " + e.what());
    }
    if (t < 1 || n < 1 || c < 1) {
        throw FormatError("bad sidecar " + sidecar_path + ": non-positive dimension");
    }
    validate_calendar(series.steps_per_day, series.start_weekday);

    size_t elem_size = 0;
    if (dtype == "f32") elem_size = 4;
    else if (dtype == "f64") elem_size = 8;
    else throw FormatError("bad sidecar " + sidecar_path + ": unknown dtype '" + dtype + "'");

    std::ifstream payload(path, std::ios::binary);
    if (!payload) throw FormatError("cannot open payload " + path);
    payload.seekg(0, std::ios::end);
    const auto actual_bytes = static_cast<unsigned long long>(payload.tellg());
    payload.seekg(0, std::ios::beg);

    const unsigned long long count = static_cast<unsigned long long>(t) * n * c;
    const unsigned long long expected_bytes = count * elem_size;
    if (actual_bytes != expected_bytes) {
        throw FormatError("payload " + path + " holds " + std::to_string(actual_bytes / elem_size)
                          + " elements, sidecar expects " + std::to_string(count));
    }

    series.values = Tensor::zeros({t, n, c});
    real* dst = series.values.data();
    if (elem_size == 4) {
        std::vector<float> buf(count);
        payload.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected_bytes));
        if (!payload) throw FormatError("short read on payload " + path);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(buf[i]);
    } else {
        std::vector<double> buf(count);
        payload.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected_bytes));
        if (!payload) throw FormatError("short read on payload " + path);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(buf[i]);
    }
    check_finite(series.values, "flatbin series");
    return series;
}

void save_flatbin(const TrafficSeries& series, const std::string& path) {
    if (series.values.rank() != 3) {
        throw DimensionError("save_flatbin expects a (T, N, C) series, got rank "
                             + std::to_string(series.values.rank()));
    }
    const bool f64 = sizeof(real) == 8;

    std::ofstream payload(path, std::ios::binary | std::ios::trunc);
    if (!payload) throw FormatError("cannot write payload " + path);
    payload.write(reinterpret_cast<const char*>(series.values.data()),
                  static_cast<std::streamsize>(series.values.size() * sizeof(real)));
    if (!payload) throw FormatError("write failed on payload " + path);
    payload.close();

    nlohmann::json sidecar{{"T", series.steps()},
                           {"N", series.nodes()},
                           {"C", series.channels()},
                           {"dtype", f64 ? "f64" : "f32"},
                           {"steps_per_day", series.steps_per_day},
                           {"start_weekday", series.start_weekday}};
    std::ofstream meta(path + ".json", std::ios::trunc);
    if (!meta) throw FormatError("cannot write sidecar " + path + ".json");
    meta << sidecar.dump(2) << "\n";
    if (!meta) throw FormatError("write failed on sidecar " + path + ".json");
}

TrafficSeries select_channels(const TrafficSeries& series, const std::vector<long>& channels) {
    if (channels.empty()) return series;
    const long c_all = series.channels();
    for (long ch : channels) {
        if (ch < 0 || ch >= c_all) {
            throw ConfigError("channel " + std::to_string(ch) + " out of range [0, "
                              + std::to_string(c_all) + ")");
        }
    }
    TrafficSeries out;
    out.steps_per_day = series.steps_per_day;
    out.start_weekday = series.start_weekday;
    const long t = series.steps();
    const long n = series.nodes();
    const long c_out = static_cast<long>(channels.size());
    out.values = Tensor::zeros({t, n, c_out});
    const real* src = series.values.data();
    real* dst = out.values.data();
    for (long row = 0; row < t; ++row) {
        for (long col = 0; col < n; ++col) {
            const real* cell = src + (row * n + col) * c_all;
            for (long j = 0; j < c_out; ++j) {
                dst[(row * n + col) * c_out + j] = cell[channels[j]];
            }
        }
    }
    return out;
}

Splits chrono_split(const TrafficSeries& series, long t_h, long t_out) {
    if (t_h < 1 || t_out < 1) {
        throw ConfigError("window lengths must be positive, got t_h=" + std::to_string(t_h)
                          + " t_out=" + std::to_string(t_out));
    }
    const long t = series.steps();
    const long train_len = (t * 6) / 10;
    const long val_len = (t * 2) / 10;
    Splits s;
    s.train = {0, train_len};
    s.val = {train_len, train_len + val_len};
    s.test = {train_len + val_len, t};

    const long need = t_h + t_out;
    for (const auto& [name, seg] : {std::pair<const char*, Segment>{"train", s.train},
                                    {"val", s.val},
                                    {"test", s.test}}) {
        if (seg.length() < need) {
            throw ConfigError(std::string(name) + " segment has " + std::to_string(seg.length())
                              + " rows, need at least " + std::to_string(need));
        }
    }
    return s;
}

std::vector<long> make_windows(Segment segment, long t_h, long t_out) {
    const long need = t_h + t_out;
    if (segment.length() < need) {
        throw ConfigError("segment has " + std::to_string(segment.length())
                          + " rows, need at least " + std::to_string(need));
    }
    std::vector<long> starts;
    starts.reserve(static_cast<size_t>(segment.length() - need + 1));
    for (long w = segment.begin; w + need <= segment.end; ++w) starts.push_back(w);
    return starts;
}

std::vector<std::vector<long>> batch_plan(std::vector<long> windows, long batch_size, bool shuffle,
                                          std::uint64_t seed) {
    if (batch_size < 1) {
        throw ConfigError("batch_size must be positive, got " + std::to_string(batch_size));
    }
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(windows);
    }
    std::vector<std::vector<long>> batches;
    for (size_t i = 0; i < windows.size(); i += static_cast<size_t>(batch_size)) {
        size_t end = std::min(windows.size(), i + static_cast<size_t>(batch_size));
        batches.emplace_back(windows.begin() + static_cast<long>(i),
                             windows.begin() + static_cast<long>(end));
    }
    return batches;
}

NormStats fit_normalizer(const TrafficSeries& series, Segment train) {
    if (train.begin < 0 || train.end > series.steps() || train.length() < 1) {
        throw BoundsError("train segment [" + std::to_string(train.begin) + ", "
                          + std::to_string(train.end) + ") outside series of length "
                          + std::to_string(series.steps()));
    }
    const long n = series.nodes();
    const long c = series.channels();
    const long rows = train.length() * n;
    const real* src = series.values.data() + train.begin * n * c;

    NormStats stats;
    stats.mean.assign(static_cast<size_t>(c), 0);
    stats.stdev.assign(static_cast<size_t>(c), 0);
    for (long i = 0; i < rows; ++i) {
        for (long ch = 0; ch < c; ++ch) stats.mean[static_cast<size_t>(ch)] += src[i * c + ch];
    }
    for (long ch = 0; ch < c; ++ch) stats.mean[static_cast<size_t>(ch)] /= static_cast<real>(rows);
    for (long i = 0; i < rows; ++i) {
        for (long ch = 0; ch < c; ++ch) {
            real d = src[i * c + ch] - stats.mean[static_cast<size_t>(ch)];
            stats.stdev[static_cast<size_t>(ch)] += d * d;
        }
    }
    for (long ch = 0; ch < c; ++ch) {
        real var = stats.stdev[static_cast<size_t>(ch)] / static_cast<real>(rows);
        stats.stdev[static_cast<size_t>(ch)] = std::max(std::sqrt(var), static_cast<real>(1e-6));
    }
    return stats;
}

namespace {

void check_channel_axis(const Tensor& x, const NormStats& stats) {
    const long c = static_cast<long>(stats.mean.size());
    if (x.rank() < 1 || x.extent(x.rank() - 1) != c) {
        throw DimensionError("normalizer has " + std::to_string(c)
                             + " channels but tensor's last axis is "
                             + (x.rank() < 1 ? std::string("absent")
                                             : std::to_string(x.extent(x.rank() - 1))));
    }
    if (stats.mean.size() != stats.stdev.size()) {
        throw ContractError("normalizer mean/std length mismatch");
    }
}

Tensor channel_constant(const std::vector<real>& v) {
    return Tensor::from({static_cast<long>(v.size())}, v);
}

} // namespace

Tensor apply_norm(const Tensor& x, const NormStats& stats) {
    check_channel_axis(x, stats);
    return ops::div(ops::sub(x, channel_constant(stats.mean)), channel_constant(stats.stdev));
}

Tensor invert_norm(const Tensor& x, const NormStats& stats) {
    check_channel_axis(x, stats);
    return ops::add(ops::mul(x, channel_constant(stats.stdev)), channel_constant(stats.mean));
}

WindowBatch gather_batch(const TrafficSeries& series, const NormStats& stats,
                         const std::vector<long>& starts, long t_h, long t_out) {
    if (starts.empty()) throw ContractError("gather_batch needs at least one window");
    const long b = static_cast<long>(starts.size());
    const long n = series.nodes();
    const long c = series.channels();
    const long t = series.steps();

    WindowBatch batch;
    batch.starts = starts;
    Tensor raw_inputs = Tensor::zeros({b, t_h, n, c});
    batch.targets = Tensor::zeros({b, t_out, n, c});
    batch.tod.reserve(static_cast<size_t>(b * t_h));
    batch.dow.reserve(static_cast<size_t>(b * t_h));

    const real* src = series.values.data();
    const long row_elems = n * c;
    real* in_dst = raw_inputs.data();
    real* tg_dst = batch.targets.data();
    for (long i = 0; i < b; ++i) {
        const long w = starts[static_cast<size_t>(i)];
        if (w < 0 || w + t_h + t_out > t) {
            throw BoundsError("window at row " + std::to_string(w)
                              + " does not fit a series of length " + std::to_string(t));
        }
        std::copy_n(src + w * row_elems, t_h * row_elems, in_dst + i * t_h * row_elems);
        std::copy_n(src + (w + t_h) * row_elems, t_out * row_elems,
                    tg_dst + i * t_out * row_elems);
        for (long step = 0; step < t_h; ++step) {
            embed::TimeSlots slot =
                embed::time_index(w + step, series.steps_per_day, series.start_weekday);
            batch.tod.push_back(slot.tod);
            batch.dow.push_back(slot.dow);
        }
    }
    batch.inputs = apply_norm(raw_inputs, stats);
    return batch;
}

} // namespace teddn
