#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ensrob/mlp.hpp"
#include "ensrob/perturbation.hpp"
#include "ensrob/trainers.hpp"

namespace ensrob {

struct DatasetSpec {
    enum class Kind { Blobs, Idx };
    Kind kind = Kind::Blobs;

    // blobs
    int n = 1000;
    int d = 2;
    int classes = 2;
    double separation = 0.5;
    double noise = 0.1;
    std::uint64_t seed = 9;

    // idx; an explicit test pair skips the split
    std::string images;
    std::string labels;
    std::string test_images;
    std::string test_labels;

    double split_fraction = 0.8;
    std::uint64_t split_seed = 7;
};

// A training configuration as parsed; layer_dims stay empty until the
// dataset dimensions are known (hidden_dims lists hidden widths only).
struct TrainEntry {
    TrainConfig config;
    std::vector<int> hidden_dims = {32};
    std::optional<std::uint64_t> explicit_seed;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<TrainEntry> entries;
    int T = 5;
    Norm norm = Norm::Linf;
    std::vector<double> radii = {0.1};
    double eval_radius = -1.0; // negative: use the last entry of radii
    bool clamp = false;
    double M = kDefaultLossBound;
    std::size_t K = 16;
    double delta = 0.1;
    std::uint64_t seed = 1;
    std::size_t sample_cap = 0; // 0: scan every training sample
    std::string output_dir = "out";
    int parallelism = 0; // 0: one worker per configuration, capped by cores
};

// Key/value sections: [dataset], [experiment], repeatable [train], and an
// optional [sweep] grid (algorithms x widths x lr x adv_radius). Unknown
// keys and sections are errors; the full schema is documented in README.md.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

} // namespace ensrob
