#include "ensrob/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ensrob/errors.hpp"
#include "ensrob/rng.hpp"

namespace ensrob {

BoundedLoss::BoundedLoss(double m) : M(m) {
    if (!(m > 0.0) || !std::isfinite(m))
        throw ConfigError("loss bound M must be positive and finite");
}

double BoundedLoss::p_min() const { return std::exp(-M); }

MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed, double scale) {
    if (layer_dims.size() < 2)
        throw ConfigError("layer_dims needs at least an input and an output dimension");
    for (int d : layer_dims)
        if (d < 1) throw ConfigError("layer_dims entries must be >= 1");
    if (!(scale > 0.0)) throw ConfigError("init scale must be positive");

    MlpModel model;
    model.layer_dims = layer_dims;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        auto fan_in = static_cast<std::size_t>(layer_dims[l]);
        auto fan_out = static_cast<std::size_t>(layer_dims[l + 1]);
        double s = scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Mat w(fan_out, fan_in);
        for (double& x : w.data) x = rng.uniform(-s, s);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

namespace {

void check_dropout(const MlpModel& model, const DropoutState* dropout) {
    if (!dropout) return;
    if (dropout->masks.size() != static_cast<std::size_t>(model.hidden_count()))
        throw ShapeError("dropout mask count does not match hidden layer count");
    for (int l = 0; l < model.hidden_count(); ++l)
        if (dropout->masks[l].size() != static_cast<std::size_t>(model.layer_dims[l + 1]))
            throw ShapeError("dropout mask width does not match hidden layer " +
                             std::to_string(l));
}

// Activations per layer: acts[0] is the input, acts[l+1] the (rectified,
// masked) output of layer l; the final entry holds the raw logits.
std::vector<Vec> run_forward(const MlpModel& model, std::span<const double> input,
                             const DropoutState* dropout) {
    if (input.size() != static_cast<std::size_t>(model.input_dim()))
        throw ShapeError("input length " + std::to_string(input.size()) +
                         " does not match model input dim " +
                         std::to_string(model.input_dim()));
    check_dropout(model, dropout);

    std::vector<Vec> acts(model.layer_count() + 1);
    acts[0].assign(input.begin(), input.end());
    for (int l = 0; l < model.layer_count(); ++l) {
        const Mat& w = model.weights[l];
        const Vec& prev = acts[l];
        Vec z(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double acc = model.biases[l][i];
            const double* row = &w.data[i * w.cols];
            for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * prev[j];
            z[i] = acc;
        }
        if (l < model.hidden_count()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
            if (dropout && dropout->rate > 0.0) {
                double keep_scale = 1.0 / (1.0 - dropout->rate);
                const auto& mask = dropout->masks[l];
                for (std::size_t i = 0; i < z.size(); ++i)
                    z[i] = mask[i] ? z[i] * keep_scale : 0.0;
            }
        }
        acts[l + 1] = std::move(z);
    }
    return acts;
}

double stable_lse(const Vec& logits) {
    double zmax = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double z : logits) acc += std::exp(z - zmax);
    return zmax + std::log(acc);
}

} // namespace

Vec forward(const MlpModel& model, std::span<const double> input,
            const DropoutState* dropout) {
    return run_forward(model, input, dropout).back();
}

double bounded_cross_entropy(const Vec& logits, int label, const BoundedLoss& bound) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw ShapeError("label out of range");
    for (double z : logits)
        if (!std::isfinite(z)) throw NumericError("non-finite logit");
    double raw = stable_lse(logits) - logits[static_cast<std::size_t>(label)];
    if (raw < 0.0) raw = 0.0; // guard against rounding just below zero
    return std::min(raw, bound.M);
}

Gradients backward(const MlpModel& model, std::span<const double> input, int label,
                   const BoundedLoss& bound, const DropoutState* dropout) {
    if (label < 0 || label >= model.class_count())
        throw ShapeError("label out of range");
    auto acts = run_forward(model, input, dropout);
    const Vec& logits = acts.back();
    for (double z : logits)
        if (!std::isfinite(z)) throw NumericError("non-finite logit");

    Gradients g;
    g.weights.reserve(model.weights.size());
    g.biases.reserve(model.biases.size());
    for (int l = 0; l < model.layer_count(); ++l) {
        g.weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        g.biases.emplace_back(model.biases[l].size(), 0.0);
    }
    g.input.assign(input.size(), 0.0);

    double raw = stable_lse(logits) - logits[static_cast<std::size_t>(label)];
    if (raw >= bound.M) return g; // clamp plateau: flat everywhere

    // delta = softmax(logits) - onehot(label)
    double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    Vec delta(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        delta[i] = std::exp(logits[i] - zmax);
        denom += delta[i];
    }
    for (double& d : delta) d /= denom;
    delta[static_cast<std::size_t>(label)] -= 1.0;

    for (int l = model.layer_count() - 1; l >= 0; --l) {
        const Mat& w = model.weights[l];
        const Vec& prev = acts[l];
        Mat& gw = g.weights[l];
        for (std::size_t i = 0; i < w.rows; ++i) {
            double d = delta[i];
            g.biases[l][i] = d;
            double* grow = &gw.data[i * w.cols];
            for (std::size_t j = 0; j < w.cols; ++j) grow[j] = d * prev[j];
        }
        Vec prev_delta(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double d = delta[i];
            const double* row = &w.data[i * w.cols];
            for (std::size_t j = 0; j < w.cols; ++j) prev_delta[j] += d * row[j];
        }
        if (l > 0) {
            // Undo the hidden-layer nonlinearity: the stored activation is
            // already rectified and masked, so its positivity encodes the
            // rectifier derivative on the kept units.
            if (dropout && dropout->rate > 0.0) {
                double keep_scale = 1.0 / (1.0 - dropout->rate);
                const auto& mask = dropout->masks[l - 1];
                for (std::size_t j = 0; j < prev_delta.size(); ++j)
                    prev_delta[j] = mask[j] && prev[j] > 0.0
                                        ? prev_delta[j] * keep_scale
                                        : 0.0;
            } else {
                for (std::size_t j = 0; j < prev_delta.size(); ++j)
                    if (!(prev[j] > 0.0)) prev_delta[j] = 0.0;
            }
        }
        delta = std::move(prev_delta);
    }
    g.input = std::move(delta);
    return g;
}

SgdState make_sgd_state(const MlpModel& model) {
    SgdState st;
    st.weight_velocity.reserve(model.weights.size());
    st.bias_velocity.reserve(model.biases.size());
    for (const Mat& w : model.weights) st.weight_velocity.emplace_back(w.rows, w.cols);
    for (const Vec& b : model.biases) st.bias_velocity.emplace_back(b.size(), 0.0);
    return st;
}

void sgd_step(MlpModel& model, const Gradients& grads, double lr, double momentum,
              SgdState& velocity, double weight_decay) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (grads.weights.size() != model.weights.size())
        throw ShapeError("gradient layer count does not match model");

    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        Mat& w = model.weights[l];
        const Mat& gw = grads.weights[l];
        Mat& vw = velocity.weight_velocity[l];
        if (!w.same_shape(gw) || !w.same_shape(vw))
            throw ShapeError("gradient shape does not match model layer " +
                             std::to_string(l));
        for (std::size_t k = 0; k < w.data.size(); ++k) {
            vw.data[k] = momentum * vw.data[k] -
                         lr * (gw.data[k] + weight_decay * w.data[k]);
            w.data[k] += vw.data[k];
        }
        Vec& b = model.biases[l];
        const Vec& gb = grads.biases[l];
        Vec& vb = velocity.bias_velocity[l];
        if (gb.size() != b.size() || vb.size() != b.size())
            throw ShapeError("bias gradient length does not match model layer " +
                             std::to_string(l));
        for (std::size_t k = 0; k < b.size(); ++k) {
            vb[k] = momentum * vb[k] - lr * (gb[k] + weight_decay * b[k]);
            b[k] += vb[k];
        }
    }
}

DropoutState sample_dropout_mask(double rate, const std::vector<int>& widths,
                                 std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate must be in [0, 1)");
    DropoutState st;
    st.rate = rate;
    st.rng_seed = seed;
    Rng rng(seed);
    st.masks.reserve(widths.size());
    for (int w : widths) {
        if (w < 1) throw ConfigError("dropout mask width must be >= 1");
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(w));
        for (auto& m : mask)
            m = static_cast<std::uint8_t>(rng.bernoulli(1.0 - rate));
        st.masks.push_back(std::move(mask));
    }
    return st;
}

double loss_at(const MlpModel& model, std::span<const double> input, int label,
               const BoundedLoss& bound) {
    return bounded_cross_entropy(forward(model, input), label, bound);
}

int predict_class(const MlpModel& model, std::span<const double> input) {
    Vec logits = forward(model, input);
    return static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

bool all_finite(const MlpModel& model) {
    for (const Mat& w : model.weights)
        for (double x : w.data)
            if (!std::isfinite(x)) return false;
    for (const Vec& b : model.biases)
        for (double x : b)
            if (!std::isfinite(x)) return false;
    return true;
}

} // namespace ensrob
