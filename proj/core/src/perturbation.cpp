#include "ensrob/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "ensrob/errors.hpp"

namespace ensrob {

Norm parse_norm(std::string_view name) {
    if (name == "l1" || name == "L1") return Norm::L1;
    if (name == "l2" || name == "L2") return Norm::L2;
    if (name == "linf" || name == "Linf" || name == "LInf") return Norm::Linf;
    throw ConfigError("unknown norm '" + std::string(name) + "' (expected l1, l2, linf)");
}

std::string norm_name(Norm norm) {
    switch (norm) {
        case Norm::L1: return "l1";
        case Norm::L2: return "l2";
        case Norm::Linf: return "linf";
    }
    throw ConfigError("invalid norm value");
}

Vec linear_max_perturbation(std::span<const double> gradient, Norm norm, double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw ConfigError("perturbation radius must be finite and >= 0");
    for (double g : gradient)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient entry");

    Vec delta(gradient.size(), 0.0);
    if (radius == 0.0) return delta;

    switch (norm) {
        case Norm::Linf:
            for (std::size_t j = 0; j < gradient.size(); ++j) {
                if (gradient[j] > 0.0) delta[j] = radius;
                else if (gradient[j] < 0.0) delta[j] = -radius;
            }
            break;
        case Norm::L2: {
            double norm2 = 0.0;
            for (double g : gradient) norm2 += g * g;
            norm2 = std::sqrt(norm2);
            if (norm2 > 0.0)
                for (std::size_t j = 0; j < gradient.size(); ++j)
                    delta[j] = radius * gradient[j] / norm2;
            break;
        }
        case Norm::L1: {
            std::size_t best = gradient.size();
            double best_abs = 0.0;
            for (std::size_t j = 0; j < gradient.size(); ++j) {
                double a = std::fabs(gradient[j]);
                if (a > best_abs) {
                    best_abs = a;
                    best = j;
                }
            }
            if (best < gradient.size())
                delta[best] = gradient[best] > 0.0 ? radius : -radius;
            break;
        }
    }
    return delta;
}

Vec adversarial_perturbation(const MlpModel& model, std::span<const double> sample,
                             int label, const PerturbationSpec& spec,
                             const BoundedLoss& bound) {
    Gradients g = backward(model, sample, label, bound);
    Vec delta = linear_max_perturbation(g.input, spec.norm, spec.radius);
    if (spec.clamp_to_unit_box)
        for (std::size_t j = 0; j < delta.size(); ++j)
            delta[j] = std::clamp(sample[j] + delta[j], 0.0, 1.0) - sample[j];
    return delta;
}

Vec perturbed_sample(std::span<const double> sample, const Vec& delta) {
    if (sample.size() != delta.size())
        throw ShapeError("perturbation length does not match sample");
    Vec out(sample.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = sample[j] + delta[j];
    return out;
}

} // namespace ensrob
