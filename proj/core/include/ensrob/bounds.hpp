#pragma once

#include <cstddef>

namespace ensrob {

struct BoundInputs {
    std::size_t n = 1;        // training sample count
    double M = 1.0;           // loss bound
    double delta = 0.1;       // confidence parameter, in (0, 1)
    double epsilon_bar = 0.0; // ensemble robustness
    std::size_t K = 1;        // partition cardinality (modeling parameter)
    double alpha = 0.0;       // across-run variance of the max deviation
    double beta = 0.0;        // dropout sensitivity
    std::size_t L_layers = 1; // dropout-randomized layer count
};

enum class DropoutBoundForm { Stated, Proof };

// sqrt((n*M*eps_bar + 2*M^2) / (delta*n))
double theorem1_bound(const BoundInputs& in);

// adversarial empirical mean + theorem1 term
double corollary1_risk_bound(double adv_empirical_mean, const BoundInputs& in);

// eps_bar + alpha/sqrt(2*delta) + M*sqrt((2*K*ln2 + 2*ln(1/delta))/n)
double theorem2_bound(const BoundInputs& in);

// theorem2 with the variance term dropped
double lemma1_bound(const BoundInputs& in);

// Stated: eps_bar + sqrt(2*ln(1/delta)/L) + sqrt((2*K*ln2 + 2*ln(2/delta))/n).
// Proof: middle term replaced by beta*sqrt(2*L*ln(1/delta)); requires
// beta <= L^(-3/4). The two disagree by design; neither is corrected.
double dropout_bound(const BoundInputs& in, DropoutBoundForm form);

} // namespace ensrob
