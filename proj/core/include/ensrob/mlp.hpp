#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ensrob/mat.hpp"

namespace ensrob {

// Multilayer perceptron: rectifier on hidden layers, affine output layer
// (the softmax lives in the loss). weights[l] has shape
// layer_dims[l+1] x layer_dims[l]; biases[l] has length layer_dims[l+1].
struct MlpModel {
    std::vector<int> layer_dims; // input dim, hidden dims..., class count
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int hidden_count() const { return layer_count() - 1; }
    int input_dim() const { return layer_dims.front(); }
    int class_count() const { return layer_dims.back(); }
};

// Per-step dropout masks, one vector per hidden layer, entries in {0, 1}.
// Forward applies inverted scaling: active units are multiplied by
// 1 / (1 - rate) so the masked expectation matches the plain pre-activation.
struct DropoutState {
    double rate = 0.0;
    std::vector<std::vector<std::uint8_t>> masks;
    std::uint64_t rng_seed = 0;
};

// Cross-entropy clamp: the true-class probability is floored at
// p_min = exp(-M), so the loss is exactly within [0, M] and the gradient
// vanishes on the clamped region.
struct BoundedLoss {
    double M;
    explicit BoundedLoss(double m);
    double p_min() const;
};

inline constexpr double kDefaultLossBound = 4.605170185988091; // ln 100

struct Gradients {
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    Vec input; // d loss / d input sample
};

struct SgdState {
    std::vector<Mat> weight_velocity;
    std::vector<Vec> bias_velocity;
};

MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed, double scale = 1.0);

Vec forward(const MlpModel& model, std::span<const double> input,
            const DropoutState* dropout = nullptr);

double bounded_cross_entropy(const Vec& logits, int label, const BoundedLoss& bound);

// Exact analytic gradients of bounded_cross_entropy(forward(...)) with
// respect to every parameter and to the input sample.
Gradients backward(const MlpModel& model, std::span<const double> input, int label,
                   const BoundedLoss& bound, const DropoutState* dropout = nullptr);

SgdState make_sgd_state(const MlpModel& model);

// v <- momentum*v - lr*(g + weight_decay*w); w <- w + v
void sgd_step(MlpModel& model, const Gradients& grads, double lr, double momentum,
              SgdState& velocity, double weight_decay);

// One Bernoulli(1 - rate) mask per width; deterministic per seed.
DropoutState sample_dropout_mask(double rate, const std::vector<int>& widths,
                                 std::uint64_t seed);

double loss_at(const MlpModel& model, std::span<const double> input, int label,
               const BoundedLoss& bound);

int predict_class(const MlpModel& model, std::span<const double> input);

bool all_finite(const MlpModel& model);

} // namespace ensrob
