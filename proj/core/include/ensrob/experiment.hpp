#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ensrob/analysis.hpp"
#include "ensrob/config.hpp"
#include "ensrob/dataset.hpp"
#include "ensrob/robustness.hpp"
#include "ensrob/trainers.hpp"

namespace ensrob {

// Train/test pair per the dataset spec (explicit test pair or seeded split).
std::pair<Dataset, Dataset> build_datasets(const DatasetSpec& spec);

struct ConfigOutcome {
    TrainConfig config; // completed layer_dims and assigned seed
    ExperimentRecord record;
    std::vector<std::pair<double, RobustnessEstimate>> profile;
    std::vector<Hypothesis> ensemble;
};

struct ExperimentResult {
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<ConfigOutcome> outcomes;
    ExperimentReport report;
};

// Trains every configuration's ensemble, measures robustness, gaps,
// bounds, and deviation profiles. Results are deterministic and
// independent of the parallelism degree.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_records_csv(const std::vector<ExperimentRecord>& records,
                       const std::string& path);
std::vector<ExperimentRecord> read_records_csv(const std::string& path);

void write_profiles_csv(const ExperimentResult& result, const std::string& path);
void write_report_json(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::string& path);

// records.csv, profiles.csv, report.json, and models/ under output_dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

} // namespace ensrob
