#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensrob/dataset.hpp"
#include "ensrob/mlp.hpp"
#include "ensrob/perturbation.hpp"
#include "ensrob/rng.hpp"

namespace ensrob {

enum class Algorithm {
    Sgd,
    SgdDropout,
    Prioritized,
    PrioritizedDropout,
    AdversarialL1,
    AdversarialL2,
    AdversarialLinf,
    BayesByBackprop,
};

Algorithm parse_algorithm(std::string_view name);
std::string algorithm_name(Algorithm alg);
bool is_adversarial(Algorithm alg);
bool uses_dropout(Algorithm alg);
Norm adversarial_norm(Algorithm alg);

struct BbbConfig {
    double prior_sigma = 0.1;
    double init_rho = -4.0;
    double kl_weight = 1e-3;
};

struct TrainConfig {
    Algorithm algorithm = Algorithm::Sgd;
    std::vector<int> layer_dims;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-6;
    int batch_size = 100;
    int epochs = 10;
    double dropout_rate = 0.5;
    std::vector<int> dropout_layers = {0}; // hidden layers the mask applies to
    double adv_radius = 0.0;
    bool adv_clamp = false;
    double priority_exponent = 0.6;
    BbbConfig bbb;
    double loss_bound = kDefaultLossBound;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
};

// Basic sanity always; strict additionally requires adv_radius > 0 for
// adversarial algorithms and dropout_rate > 0 for dropout algorithms (the
// config-file path uses strict; the API tolerates degenerate values so the
// radius-0 equivalence with plain sgd stays exercisable).
void validate_config(const TrainConfig& config, bool strict = true);

// Canonical key=value serialization of every field except the seed; the hash
// is FNV-1a 64 over this string.
std::string canonical_config_string(const TrainConfig& config);
std::uint64_t config_hash(const TrainConfig& config);

struct Hypothesis {
    MlpModel model;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string algorithm;
    Vec train_loss_curve; // mean bounded train loss per epoch
};

// Diagonal-Gaussian weight posterior; sigma = softplus(rho).
struct WeightPosterior {
    std::vector<int> layer_dims;
    std::vector<Mat> weight_mu;
    std::vector<Mat> weight_rho;
    std::vector<Vec> bias_mu;
    std::vector<Vec> bias_rho;
    double prior_sigma = 0.1;
};

double softplus(double x);

// KL(N(mu, sigma^2) || N(0, prior_sigma^2)) for one parameter.
double gaussian_kl(double mu, double sigma, double prior_sigma);

Hypothesis train(const TrainConfig& config, const Dataset& data);

// Gradient step on the batch loss evaluated at adversarially shifted inputs.
void adversarial_training_step(MlpModel& model, const Dataset& data,
                               std::span<const std::size_t> batch,
                               const PerturbationSpec& spec, const BoundedLoss& bound,
                               double lr, double momentum, SgdState& velocity,
                               double weight_decay);

struct PrioritizedDraw {
    std::vector<std::size_t> indices;
    Vec weights; // importance weights of the drawn indices, max-normalized
};

// Samples `count` indices with p_i proportional to (loss_i + floor)^exponent;
// weights are (n*p_i)^-1 scaled so the largest weight over reachable indices
// is 1.
PrioritizedDraw prioritized_sample(const Vec& losses, double exponent,
                                   std::size_t count, double floor, Rng& rng);

WeightPosterior init_posterior(const std::vector<int>& layer_dims,
                               const BbbConfig& bbb, std::uint64_t seed,
                               double init_scale);

// One reparameterized step: sample weights, descend data loss plus
// kl_weight * total closed-form KL. Plain gradient descent; momentum and
// weight decay do not apply to the variational parameters.
void bbb_step(WeightPosterior& posterior, const Dataset& data,
              std::span<const std::size_t> batch, double kl_weight, double lr,
              const BoundedLoss& bound, Rng& rng);

MlpModel sample_posterior_model(const WeightPosterior& posterior, std::uint64_t seed);

Hypothesis sample_bbb_hypothesis(const WeightPosterior& posterior, std::uint64_t seed,
                                 std::uint64_t hash);

// Member t trains with seed base_seed + t; bayes_by_backprop trains one
// posterior at base_seed and samples T realizations. Members run on up to
// `parallelism` threads; results are ordered by t and independent of the
// thread count.
std::vector<Hypothesis> train_ensemble(const TrainConfig& config, const Dataset& data,
                                       int T, std::uint64_t base_seed,
                                       int parallelism = 1);

double mean_loss(const MlpModel& model, const Dataset& data, const BoundedLoss& bound);
double error_rate(const MlpModel& model, const Dataset& data);

} // namespace ensrob
