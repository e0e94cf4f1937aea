#include "teddn/embeddings.hpp"

#include "teddn/error.hpp"
#include "teddn/ops.hpp"

#include <cmath>

namespace teddn::embed {

namespace {

Tensor uniform_init(std::vector<long> shape, long fan, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

Tensor gather(Parameter& table, const std::vector<long>& rows, Tape* tape) {
    Tensor src = tape ? tape->watch(table) : table.value;
    return ops::gather_rows(src, rows);
}

} // namespace

TimeSlots time_index(long step, long steps_per_day, int start_weekday) {
    if (steps_per_day < 1)
        throw ConfigError("time_index: steps_per_day must be positive, got " +
                          std::to_string(steps_per_day));
    if (start_weekday < 0 || start_weekday >= 7)
        throw ConfigError("time_index: start_weekday must be in [0, 7), got " +
                          std::to_string(start_weekday));
    if (step < 0) throw BoundsError("time_index: negative step " + std::to_string(step));
    TimeSlots s;
    s.tod = step % steps_per_day;
    s.dow = (start_weekday + step / steps_per_day) % 7;
    return s;
}

TimeTables make_time_tables(long steps_per_day, int start_weekday, long d_t, Rng& rng,
                            const std::string& prefix) {
    if (d_t < 1) throw ConfigError("time tables: d_t must be >= 1, got " + std::to_string(d_t));
    time_index(0, steps_per_day, start_weekday); // validates the calendar fields
    return TimeTables{
        Parameter(prefix + ".day", uniform_init({steps_per_day, d_t}, d_t, rng)),
        Parameter(prefix + ".week", uniform_init({7, d_t}, d_t, rng)),
        steps_per_day,
        start_weekday,
    };
}

NodeTable make_node_table(long nodes, long d_n, Rng& rng, const std::string& prefix) {
    if (d_n < 1) throw ConfigError("node table: d_n must be >= 1, got " + std::to_string(d_n));
    return NodeTable{Parameter(prefix + ".nodes", uniform_init({nodes, d_n}, d_n, rng))};
}

Tensor day_rows(TimeTables& tables, const std::vector<long>& tod_slots, Tape* tape) {
    return gather(tables.day, tod_slots, tape);
}

Tensor week_rows(TimeTables& tables, const std::vector<long>& dow_slots, Tape* tape) {
    return gather(tables.week, dow_slots, tape);
}

Tensor node_rows(NodeTable& table, Tape* tape) {
    std::vector<long> all(static_cast<std::size_t>(table.table.value.extent(0)));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<long>(i);
    return gather(table.table, all, tape);
}

LookupResult lookup(TimeTables& tables, NodeTable& node_table, const std::vector<long>& steps,
                    Tape* tape) {
    std::vector<long> tod;
    std::vector<long> dow;
    tod.reserve(steps.size());
    dow.reserve(steps.size());
    for (long s : steps) {
        TimeSlots slots = time_index(s, tables.steps_per_day, tables.start_weekday);
        tod.push_back(slots.tod);
        dow.push_back(slots.dow);
    }
    return LookupResult{day_rows(tables, tod, tape), week_rows(tables, dow, tape),
                        node_rows(node_table, tape)};
}

} // namespace teddn::embed
