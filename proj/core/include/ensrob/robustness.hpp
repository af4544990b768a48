#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ensrob/dataset.hpp"
#include "ensrob/mlp.hpp"
#include "ensrob/perturbation.hpp"
#include "ensrob/trainers.hpp"

namespace ensrob {

struct RobustnessEstimate {
    double epsilon_bar_emp = 0.0;
    Vec per_run_max;             // one maximal loss deviation per hypothesis
    double variance_alpha = 0.0; // unbiased sample variance of per_run_max
    int T = 0;
    PerturbationSpec spec;
};

// Largest |loss(s_i) - loss(s_i + delta_i)| over the training samples, with
// delta_i the linearized adversarial perturbation for this hypothesis.
// sample_cap > 0 restricts the scan to the first sample_cap samples.
double per_hypothesis_max_deviation(const Hypothesis& h, const Dataset& data,
                                    const PerturbationSpec& spec,
                                    const BoundedLoss& bound,
                                    std::size_t sample_cap = 0);

RobustnessEstimate empirical_ensemble_robustness(const std::vector<Hypothesis>& ensemble,
                                                 const Dataset& data,
                                                 const PerturbationSpec& spec,
                                                 const BoundedLoss& bound,
                                                 std::size_t sample_cap = 0,
                                                 int parallelism = 1);

// Ensemble robustness at each radius of an ascending, non-negative list.
std::vector<std::pair<double, RobustnessEstimate>> deviation_profile(
    const std::vector<Hypothesis>& ensemble, const Dataset& data,
    const std::vector<double>& radii, Norm norm, const BoundedLoss& bound,
    bool clamp_to_unit_box = false, std::size_t sample_cap = 0, int parallelism = 1);

// Exhaustive grid search over the norm ball (plus the linearized solver's
// point) on tiny inputs; validates the closed-form solver in tests.
double brute_force_deviation_oracle(const MlpModel& model,
                                    std::span<const double> sample, int label,
                                    const PerturbationSpec& spec, int grid_points,
                                    const BoundedLoss& bound);

} // namespace ensrob
