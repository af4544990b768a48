#include "ensrob/robustness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "ensrob/errors.hpp"

namespace ensrob {

namespace {

double loss_deviation(const MlpModel& model, std::span<const double> sample, int label,
                      const PerturbationSpec& spec, const BoundedLoss& bound) {
    double base = loss_at(model, sample, label, bound);
    Vec delta = adversarial_perturbation(model, sample, label, spec, bound);
    Vec shifted = perturbed_sample(sample, delta);
    double perturbed = loss_at(model, shifted, label, bound);
    return std::fabs(base - perturbed);
}

} // namespace

double per_hypothesis_max_deviation(const Hypothesis& h, const Dataset& data,
                                    const PerturbationSpec& spec,
                                    const BoundedLoss& bound, std::size_t sample_cap) {
    if (data.size() == 0) throw ConfigError("empty dataset");
    std::size_t limit = sample_cap ? std::min(sample_cap, data.size()) : data.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < limit; ++i)
        worst = std::max(worst,
                         loss_deviation(h.model, data.sample(i), data.labels[i], spec, bound));
    return worst;
}

RobustnessEstimate empirical_ensemble_robustness(const std::vector<Hypothesis>& ensemble,
                                                 const Dataset& data,
                                                 const PerturbationSpec& spec,
                                                 const BoundedLoss& bound,
                                                 std::size_t sample_cap,
                                                 int parallelism) {
    if (ensemble.empty()) throw ConfigError("empty ensemble");
    for (const Hypothesis& h : ensemble)
        if (h.config_hash != ensemble.front().config_hash)
            throw ProtocolError("ensemble members have mixed config hashes");

    int T = static_cast<int>(ensemble.size());
    RobustnessEstimate est;
    est.T = T;
    est.spec = spec;
    est.per_run_max.assign(ensemble.size(), 0.0);

    int workers = std::max(1, std::min(parallelism, T));
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> failures(ensemble.size());
    auto work = [&]() {
        for (;;) {
            int t = next.fetch_add(1);
            if (t >= T) return;
            try {
                est.per_run_max[static_cast<std::size_t>(t)] = per_hypothesis_max_deviation(
                    ensemble[static_cast<std::size_t>(t)], data, spec, bound, sample_cap);
            } catch (...) {
                failures[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    double sum = 0.0;
    for (double v : est.per_run_max) sum += v;
    est.epsilon_bar_emp = sum / static_cast<double>(T);
    if (T > 1) {
        double ss = 0.0;
        for (double v : est.per_run_max) {
            double d = v - est.epsilon_bar_emp;
            ss += d * d;
        }
        est.variance_alpha = ss / static_cast<double>(T - 1);
    }
    return est;
}

std::vector<std::pair<double, RobustnessEstimate>> deviation_profile(
    const std::vector<Hypothesis>& ensemble, const Dataset& data,
    const std::vector<double>& radii, Norm norm, const BoundedLoss& bound,
    bool clamp_to_unit_box, std::size_t sample_cap, int parallelism) {
    if (radii.empty()) throw ConfigError("radius list is empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] >= 0.0)) throw ConfigError("radii must be >= 0");
        if (i && radii[i] < radii[i - 1]) throw ConfigError("radii must be ascending");
    }
    std::vector<std::pair<double, RobustnessEstimate>> profile;
    profile.reserve(radii.size());
    for (double r : radii) {
        PerturbationSpec spec{norm, r, clamp_to_unit_box};
        profile.emplace_back(
            r, empirical_ensemble_robustness(ensemble, data, spec, bound, sample_cap,
                                             parallelism));
    }
    return profile;
}

double brute_force_deviation_oracle(const MlpModel& model,
                                    std::span<const double> sample, int label,
                                    const PerturbationSpec& spec, int grid_points,
                                    const BoundedLoss& bound) {
    std::size_t d = sample.size();
    if (d > 4)
        throw OracleScopeError("oracle supports dimension <= 4, got " + std::to_string(d));
    if (grid_points < 3) throw ConfigError("oracle needs at least 3 grid points");
    double r = spec.radius;
    if (!(r >= 0.0)) throw ConfigError("radius must be >= 0");
    if (r == 0.0) return 0.0;

    auto in_ball = [&](const Vec& delta) {
        constexpr double tol = 1.0 + 1e-12;
        switch (spec.norm) {
            case Norm::Linf: {
                double m = 0.0;
                for (double v : delta) m = std::max(m, std::fabs(v));
                return m <= r * tol;
            }
            case Norm::L1: {
                double s = 0.0;
                for (double v : delta) s += std::fabs(v);
                return s <= r * tol;
            }
            case Norm::L2: {
                double s = 0.0;
                for (double v : delta) s += v * v;
                return std::sqrt(s) <= r * tol;
            }
        }
        return false;
    };

    double base = loss_at(model, sample, label, bound);
    double worst = 0.0;
    auto consider = [&](const Vec& delta) {
        if (!in_ball(delta)) return;
        Vec shifted = perturbed_sample(sample, delta);
        if (spec.clamp_to_unit_box)
            for (double& x : shifted) x = std::clamp(x, 0.0, 1.0);
        worst = std::max(worst, std::fabs(base - loss_at(model, shifted, label, bound)));
    };

    std::vector<int> digit(d, 0);
    Vec delta(d, 0.0);
    for (;;) {
        for (std::size_t j = 0; j < d; ++j)
            delta[j] = -r + 2.0 * r * static_cast<double>(digit[j]) /
                                static_cast<double>(grid_points - 1);
        consider(delta);
        std::size_t j = 0;
        while (j < d && ++digit[j] == grid_points) digit[j++] = 0;
        if (j == d) break;
    }

    Vec axis(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        axis[j] = r;
        consider(axis);
        axis[j] = -r;
        consider(axis);
        axis[j] = 0.0;
    }

    // The linearized solver's own point, so the oracle is never below the
    // achieved deviation.
    PerturbationSpec unclamped = spec;
    unclamped.clamp_to_unit_box = false;
    consider(adversarial_perturbation(model, sample, label, unclamped, bound));
    return worst;
}

} // namespace ensrob
