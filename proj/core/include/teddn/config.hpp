#pragma once

#include "teddn/data.hpp"
#include "teddn/model.hpp"
#include "teddn/schedules.hpp"

#include <string>
#include <vector>

namespace teddn {

struct DatasetConfig {
    std::string format = "flatbin"; // csv | flatbin
    std::string path;               // flatbin payload
    std::vector<std::string> csv_paths;
    std::vector<long> channels; // empty keeps all
    long steps_per_day = 288;   // csv only; flatbin reads the sidecar
    int start_weekday = 0;

    void validate() const; // throws ConfigError
};

struct ExperimentConfig {
    DatasetConfig dataset;
    ModelConfig model; // nodes/channels 0 = derive from dataset
    TrainConfig train;
    std::string variant = "full";
    std::string output_dir = "runs/default";
};

// Strict JSON: every unknown key is rejected by its dotted name. Overrides
// are "section.key=value" pairs applied before validation; values parse as
// JSON where possible, otherwise as strings.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::vector<std::string>& overrides = {});
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides = {});

// Deterministic echo (sorted keys, trailing newline); reloading reproduces
// the run.
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// Full model schema, calendar included; used by checkpoints.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// Relative paths land under $TEDDN_OUTPUT_ROOT when that is set.
std::string resolve_output_dir(const std::string& output_dir);

TrafficSeries load_dataset(const DatasetConfig& cfg);

// Fills in nodes/channels (0 = derive) and the calendar from the series;
// an explicit non-matching dimension is a config error.
void reconcile_model_with_series(ModelConfig& model, const TrafficSeries& series);

} // namespace teddn
