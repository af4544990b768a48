#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ensrob/mlp.hpp"
#include "ensrob/rng.hpp"

namespace testsupport {

using namespace ensrob;

inline bool models_equal(const MlpModel& a, const MlpModel& b) {
    if (a.layer_dims != b.layer_dims) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (a.weights[l].data != b.weights[l].data) return false;
        if (a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

// Smallest |pre-activation| over hidden units; finite differences step over
// rectifier kinks when this is ~0.
inline double hidden_kink_margin(const MlpModel& model, std::span<const double> input) {
    Vec act(input.begin(), input.end());
    double margin = 1e300;
    for (int l = 0; l < model.hidden_count(); ++l) {
        const Mat& w = model.weights[l];
        Vec z(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            double acc = model.biases[l][i];
            for (std::size_t j = 0; j < w.cols; ++j) acc += w(i, j) * act[j];
            z[i] = acc;
            margin = std::min(margin, std::fabs(acc));
        }
        for (double& v : z) v = v > 0.0 ? v : 0.0;
        act = std::move(z);
    }
    return margin;
}

inline double raw_cross_entropy(const MlpModel& model, std::span<const double> input,
                                int label) {
    Vec logits = forward(model, input);
    double zmax = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double z : logits) acc += std::exp(z - zmax);
    return zmax + std::log(acc) - logits[static_cast<std::size_t>(label)];
}

// True when no rectifier kink or loss clamp sits within `margin` of the
// evaluation point, so central differences are trustworthy.
inline bool fd_safe(const MlpModel& model, std::span<const double> input, int label,
                    const BoundedLoss& bound, double margin = 1e-3) {
    if (model.hidden_count() > 0 && hidden_kink_margin(model, input) < margin)
        return false;
    return std::fabs(raw_cross_entropy(model, input, label) - bound.M) > margin;
}

// Worst relative disagreement between analytic and central-difference
// gradients over every parameter and input coordinate.
inline double fd_max_rel_error(const MlpModel& model, const Vec& input, int label,
                               const BoundedLoss& bound, double step = 1e-5) {
    Gradients g = backward(model, input, label, bound);
    double worst = 0.0;
    auto compare = [&](double fd, double analytic) {
        double denom = std::max({1.0, std::fabs(fd), std::fabs(analytic)});
        worst = std::max(worst, std::fabs(fd - analytic) / denom);
    };

    MlpModel m = model;
    auto probe_param = [&](double& slot, double analytic) {
        double orig = slot;
        slot = orig + step;
        double up = loss_at(m, input, label, bound);
        slot = orig - step;
        double down = loss_at(m, input, label, bound);
        slot = orig;
        compare((up - down) / (2.0 * step), analytic);
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (std::size_t k = 0; k < m.weights[l].data.size(); ++k)
            probe_param(m.weights[l].data[k], g.weights[l].data[k]);
        for (std::size_t k = 0; k < m.biases[l].size(); ++k)
            probe_param(m.biases[l][k], g.biases[l][k]);
    }

    Vec in = input;
    for (std::size_t j = 0; j < in.size(); ++j) {
        double orig = in[j];
        in[j] = orig + step;
        double up = loss_at(model, in, label, bound);
        in[j] = orig - step;
        double down = loss_at(model, in, label, bound);
        in[j] = orig;
        compare((up - down) / (2.0 * step), g.input[j]);
    }
    return worst;
}

// Random architecture of <= 3 layers and <= 16 units per layer, with an
// input whose finite-difference neighborhood is kink-free; deterministic
// per index.
struct FdCase {
    MlpModel model;
    Vec input;
    int label = 0;
};

inline FdCase make_fd_case(std::uint64_t index, const BoundedLoss& bound) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(mix_seed(0xfdcafe, index * 1000 + attempt));
        std::vector<int> dims;
        int layers = 1 + static_cast<int>(rng.below(3));
        dims.push_back(1 + static_cast<int>(rng.below(16)));
        for (int l = 1; l < layers; ++l) dims.push_back(1 + static_cast<int>(rng.below(16)));
        dims.push_back(2 + static_cast<int>(rng.below(15)));

        FdCase c;
        c.model = init_mlp(dims, rng.next_u64(), 1.0);
        c.input.resize(static_cast<std::size_t>(dims.front()));
        for (double& x : c.input) x = rng.uniform01();
        c.label = static_cast<int>(rng.below(static_cast<std::size_t>(dims.back())));
        if (fd_safe(c.model, c.input, c.label, bound)) return c;
    }
}

} // namespace testsupport
