#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ensrob/dataset.hpp"
#include "ensrob/mlp.hpp"
#include "ensrob/trainers.hpp"

namespace ensrob {

struct GapResult {
    double train_error = 0.0;
    double test_error = 0.0;
    double error_gap = 0.0; // test_error - train_error
    double train_loss = 0.0;
    double test_loss = 0.0;
    double loss_gap = 0.0; // mean bounded test loss - mean bounded train loss
};

GapResult generalization_gap(const Hypothesis& h, const Dataset& train,
                             const Dataset& test, const BoundedLoss& bound);

// Sample Pearson coefficient; zero variance in either argument is an error.
double pearson(const Vec& xs, const Vec& ys);

// Pearson of average ranks (ties share the mean of their rank range).
double spearman(const Vec& xs, const Vec& ys);

Vec average_ranks(const Vec& xs);

// One row of records.csv: a configuration's measurements.
struct ExperimentRecord {
    std::uint64_t config_hash = 0;
    std::string algorithm;
    std::string hyperparameters; // canonical TrainConfig string
    std::vector<int> layer_dims;
    std::uint64_t seed = 0; // ensemble base seed
    int T = 1;
    std::string norm;
    double radius = 0.0;
    double epsilon_bar_emp = 0.0;
    double variance_alpha = 0.0;
    double robustness_t1 = 0.0; // first member's deviation
    double train_error = 0.0;
    double test_error = 0.0;
    double error_gap = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double loss_gap = 0.0;
    double theorem1 = 0.0;
    double theorem2 = 0.0;
    double lemma1 = 0.0;
};

struct CorrelationSummary {
    bool available = false;
    double pearson_ensemble_gap = 0.0;  // eps_bar_emp vs error_gap
    double spearman_ensemble_gap = 0.0;
    double pearson_t1_gap = 0.0; // robustness_t1 vs error_gap
    double spearman_t1_gap = 0.0;
};

struct ExperimentReport {
    std::vector<ExperimentRecord> records;
    CorrelationSummary overall;
    std::map<std::string, CorrelationSummary> per_algorithm;
};

// Correlation fields stay unavailable when a group has fewer than two
// records or a degenerate (constant) column.
ExperimentReport build_report(const std::vector<ExperimentRecord>& records);

} // namespace ensrob
