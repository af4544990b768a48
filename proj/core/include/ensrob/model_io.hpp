#pragma once

#include <string>

#include "ensrob/mlp.hpp"
#include "ensrob/trainers.hpp"

namespace ensrob {

// Versioned binary container: magic "ENSROBMD", format version, layer dims,
// then per layer the row-major weight matrix and the bias vector as
// little-endian 64-bit floats. Round-trips are bit-exact.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

// Writes path plus a JSON sidecar (same name, .json) holding the canonical
// config string, hash, seed, and loss curve.
void save_hypothesis(const Hypothesis& h, const TrainConfig& config,
                     const std::string& path);

// Reads the sidecar when present; otherwise hash and seed stay zero.
Hypothesis load_hypothesis(const std::string& path);

} // namespace ensrob
