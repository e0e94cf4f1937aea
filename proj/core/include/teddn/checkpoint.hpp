#pragma once

#include "teddn/model.hpp"

#include <string>

namespace teddn {

// Binary checkpoint: magic, version, scalar width, the model config as JSON,
// then every parameter (name, shape, raw little-endian payload) in
// registration order. Round-trips bit-exactly.
void save_checkpoint(TeddnModel& model, const std::string& path);

// Config echo embedded in the file.
ModelConfig peek_checkpoint_config(const std::string& path);

// Copies payloads into an existing model; the first mismatched or missing
// parameter (and any truncation) is a config error naming it.
void load_checkpoint_into(TeddnModel& model, const std::string& path);

// Rebuilds the model from the embedded config, then loads the payloads.
TeddnModel load_checkpoint(const std::string& path);

} // namespace teddn
