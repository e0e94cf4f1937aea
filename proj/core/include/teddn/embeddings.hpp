#pragma once

#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <string>
#include <vector>

namespace teddn::embed {

struct TimeSlots {
    long tod = 0; // time-of-day slot in [0, steps_per_day)
    long dow = 0; // day-of-week slot in [0, 7)
};

// Calendar arithmetic from a global row index.
TimeSlots time_index(long step, long steps_per_day, int start_weekday);

// Learnable time-slot tables: one row per time-of-day slot, one per weekday.
struct TimeTables {
    Parameter day;  // (steps_per_day, d_t)
    Parameter week; // (7, d_t)
    long steps_per_day;
    int start_weekday;
};

struct NodeTable {
    Parameter table; // (N, d_n)
};

// Uniform [-1/sqrt(d), 1/sqrt(d)] initialization.
TimeTables make_time_tables(long steps_per_day, int start_weekday, long d_t, Rng& rng,
                            const std::string& prefix);
NodeTable make_node_table(long nodes, long d_n, Rng& rng, const std::string& prefix);

// Gathered rows; differentiable (scatter-add) when a tape is supplied.
Tensor day_rows(TimeTables& tables, const std::vector<long>& tod_slots, Tape* tape);
Tensor week_rows(TimeTables& tables, const std::vector<long>& dow_slots, Tape* tape);
Tensor node_rows(NodeTable& table, Tape* tape); // every node, in order

struct LookupResult {
    Tensor day;   // (steps, d_t)
    Tensor week;  // (steps, d_t)
    Tensor nodes; // (N, d_n)
};

// Rows for a window of global step indices plus the full node table.
LookupResult lookup(TimeTables& tables, NodeTable& node_table, const std::vector<long>& steps,
                    Tape* tape);

} // namespace teddn::embed
