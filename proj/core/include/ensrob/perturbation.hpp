#pragma once

#include <span>
#include <string>
#include <string_view>

#include "ensrob/mat.hpp"
#include "ensrob/mlp.hpp"

namespace ensrob {

enum class Norm { L1, L2, Linf };

Norm parse_norm(std::string_view name);
std::string norm_name(Norm norm);

// Adversarial neighborhood: the norm ball of radius r around a sample.
struct PerturbationSpec {
    Norm norm = Norm::Linf;
    double radius = 0.0;
    bool clamp_to_unit_box = false;
};

// Exact maximizer of <g, d> over the norm ball of the given radius:
//   Linf: r*sign(g) (0 where g is 0)
//   L2:   r*g/|g|_2
//   L1:   r*sign(g_j)*e_j at the lowest index j maximizing |g_j|
// g = 0 returns the zero vector for every norm.
Vec linear_max_perturbation(std::span<const double> gradient, Norm norm, double radius);

// Perturbation for one sample from the loss gradient at that sample; if
// spec.clamp_to_unit_box is set the returned delta already accounts for
// clamping s + delta into [0, 1]^d.
Vec adversarial_perturbation(const MlpModel& model, std::span<const double> sample,
                             int label, const PerturbationSpec& spec,
                             const BoundedLoss& bound);

Vec perturbed_sample(std::span<const double> sample, const Vec& delta);

} // namespace ensrob
