#include "ensrob/bounds.hpp"

#include <cmath>
#include <string>

#include "ensrob/errors.hpp"

namespace ensrob {

namespace {

void check_inputs(const BoundInputs& in) {
    if (in.n < 1) throw DomainError("n must be >= 1");
    if (!(in.M > 0.0) || !std::isfinite(in.M)) throw DomainError("M must be positive");
    if (!(in.delta > 0.0) || !(in.delta < 1.0))
        throw DomainError("delta must be in (0, 1)");
    if (!(in.epsilon_bar >= 0.0) || !std::isfinite(in.epsilon_bar))
        throw DomainError("epsilon_bar must be >= 0");
    if (in.K < 1) throw DomainError("K must be >= 1");
    if (!(in.alpha >= 0.0) || !std::isfinite(in.alpha))
        throw DomainError("alpha must be >= 0");
    if (!(in.beta >= 0.0) || !std::isfinite(in.beta))
        throw DomainError("beta must be >= 0");
    if (in.L_layers < 1) throw DomainError("L must be >= 1");
}

double partition_term(const BoundInputs& in, double log_arg) {
    double nd = static_cast<double>(in.n);
    double kd = static_cast<double>(in.K);
    return std::sqrt((2.0 * kd * std::log(2.0) + 2.0 * std::log(log_arg)) / nd);
}

} // namespace

double theorem1_bound(const BoundInputs& in) {
    check_inputs(in);
    double nd = static_cast<double>(in.n);
    return std::sqrt((nd * in.M * in.epsilon_bar + 2.0 * in.M * in.M) / (in.delta * nd));
}

double corollary1_risk_bound(double adv_empirical_mean, const BoundInputs& in) {
    if (!(adv_empirical_mean >= 0.0) || adv_empirical_mean > in.M)
        throw DomainError("adversarial empirical mean must be in [0, M]");
    return adv_empirical_mean + theorem1_bound(in);
}

double theorem2_bound(const BoundInputs& in) {
    check_inputs(in);
    return in.epsilon_bar + in.alpha / std::sqrt(2.0 * in.delta) +
           in.M * partition_term(in, 1.0 / in.delta);
}

double lemma1_bound(const BoundInputs& in) {
    check_inputs(in);
    return in.epsilon_bar + in.M * partition_term(in, 1.0 / in.delta);
}

double dropout_bound(const BoundInputs& in, DropoutBoundForm form) {
    check_inputs(in);
    double ld = static_cast<double>(in.L_layers);
    double log_inv_delta = std::log(1.0 / in.delta);
    double middle;
    if (form == DropoutBoundForm::Stated) {
        middle = std::sqrt(2.0 * log_inv_delta / ld);
    } else {
        if (in.beta > std::pow(ld, -0.75))
            throw DomainError("proof form requires beta <= L^(-3/4), got beta = " +
                              std::to_string(in.beta));
        middle = in.beta * std::sqrt(2.0 * ld * log_inv_delta);
    }
    return in.epsilon_bar + middle + partition_term(in, 2.0 / in.delta);
}

} // namespace ensrob
