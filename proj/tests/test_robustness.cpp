#include <doctest.h>

#include <cmath>
#include <vector>

#include "ensrob/dataset.hpp"
#include "ensrob/errors.hpp"
#include "ensrob/robustness.hpp"
#include "ensrob/trainers.hpp"

using namespace ensrob;

namespace {

Dataset small_blobs(int n = 60, std::uint64_t seed = 31) {
    return synthetic_blobs(n, 2, 2, 0.5, 0.05, seed);
}

std::vector<Hypothesis> small_ensemble(const Dataset& data, int T,
                                       std::uint64_t base_seed = 11) {
    TrainConfig c;
    c.algorithm = Algorithm::Sgd;
    c.layer_dims = {static_cast<int>(data.dim()), 8, data.class_count};
    c.lr = 0.1;
    c.batch_size = 20;
    c.epochs = 8;
    return train_ensemble(c, data, T, base_seed);
}

// Two-logit linear model whose raw loss is within ~1e-13 of 2*a*x0 on the
// evaluation ball, so deviations are exactly linear in the radius.
MlpModel steep_linear_model(double a) {
    MlpModel m;
    m.layer_dims = {2, 2};
    Mat w(2, 2, 0.0);
    w(0, 0) = -a;
    w(1, 0) = a;
    m.weights = {w};
    m.biases = {Vec(2, 0.0)};
    return m;
}

} // namespace

TEST_CASE("zero radius gives zero deviation") {
    Dataset data = small_blobs();
    auto ensemble = small_ensemble(data, 3);
    PerturbationSpec spec{Norm::Linf, 0.0, false};
    BoundedLoss bound{kDefaultLossBound};
    auto est = empirical_ensemble_robustness(ensemble, data, spec, bound);
    CHECK(est.epsilon_bar_emp == 0.0);
    CHECK(est.variance_alpha == 0.0);
    CHECK(est.T == 3);
    for (double v : est.per_run_max) CHECK(v == 0.0);
}

TEST_CASE("ensemble estimate is the mean of per-member maxima") {
    Dataset data = small_blobs();
    auto ensemble = small_ensemble(data, 3);
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    BoundedLoss bound{kDefaultLossBound};

    Vec direct;
    for (const auto& h : ensemble)
        direct.push_back(per_hypothesis_max_deviation(h, data, spec, bound));

    auto est = empirical_ensemble_robustness(ensemble, data, spec, bound);
    REQUIRE(est.per_run_max.size() == 3);
    double mean = (direct[0] + direct[1] + direct[2]) / 3.0;
    double var = 0.0;
    for (double v : direct) var += (v - mean) * (v - mean);
    var /= 2.0; // unbiased
    CHECK(est.per_run_max == direct);
    CHECK(est.epsilon_bar_emp == doctest::Approx(mean).epsilon(1e-15));
    CHECK(est.variance_alpha == doctest::Approx(var).epsilon(1e-12));
    for (double v : direct) {
        CHECK(v >= 0.0);
        CHECK(v <= bound.M);
    }
}

TEST_CASE("parallel evaluation matches serial") {
    Dataset data = small_blobs();
    auto ensemble = small_ensemble(data, 4);
    PerturbationSpec spec{Norm::L2, 0.05, false};
    BoundedLoss bound{kDefaultLossBound};
    auto serial = empirical_ensemble_robustness(ensemble, data, spec, bound, 0, 1);
    auto parallel = empirical_ensemble_robustness(ensemble, data, spec, bound, 0, 4);
    CHECK(serial.per_run_max == parallel.per_run_max);
    CHECK(serial.epsilon_bar_emp == parallel.epsilon_bar_emp);
    CHECK(serial.variance_alpha == parallel.variance_alpha);
}

TEST_CASE("single member has zero variance") {
    Dataset data = small_blobs();
    auto ensemble = small_ensemble(data, 1);
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    BoundedLoss bound{kDefaultLossBound};
    auto est = empirical_ensemble_robustness(ensemble, data, spec, bound);
    CHECK(est.T == 1);
    CHECK(est.variance_alpha == 0.0);
    CHECK(est.epsilon_bar_emp ==
          per_hypothesis_max_deviation(ensemble[0], data, spec, bound));
}

TEST_CASE("mixed configurations are rejected") {
    Dataset data = small_blobs();
    auto a = small_ensemble(data, 1, 11);
    TrainConfig c;
    c.algorithm = Algorithm::Sgd;
    c.layer_dims = {2, 8, 2};
    c.lr = 0.2; // different hash
    c.batch_size = 20;
    c.epochs = 8;
    c.seed = 12;
    a.push_back(train(c, data));
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    BoundedLoss bound{kDefaultLossBound};
    CHECK_THROWS_AS(empirical_ensemble_robustness(a, data, spec, bound), ProtocolError);
    CHECK_THROWS_AS(
        empirical_ensemble_robustness({}, data, spec, bound), ConfigError);
}

TEST_CASE("sample_cap scans a deterministic prefix") {
    Dataset data = small_blobs(50);
    auto ensemble = small_ensemble(data, 1);
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    BoundedLoss bound{kDefaultLossBound};

    Dataset head;
    head.features = Mat(10, data.dim());
    head.labels.assign(data.labels.begin(), data.labels.begin() + 10);
    head.class_count = data.class_count;
    head.name = "head";
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < data.dim(); ++j)
            head.features(i, j) = data.features(i, j);

    CHECK(per_hypothesis_max_deviation(ensemble[0], data, spec, bound, 10) ==
          per_hypothesis_max_deviation(ensemble[0], head, spec, bound));
    // cap larger than the dataset is a full scan
    CHECK(per_hypothesis_max_deviation(ensemble[0], data, spec, bound, 5000) ==
          per_hypothesis_max_deviation(ensemble[0], data, spec, bound));
}

TEST_CASE("deviation_profile tracks per-radius estimates") {
    Dataset data = small_blobs();
    auto ensemble = small_ensemble(data, 2);
    BoundedLoss bound{kDefaultLossBound};
    std::vector<double> radii{0.0, 0.05, 0.1};
    auto profile = deviation_profile(ensemble, data, radii, Norm::Linf, bound);
    REQUIRE(profile.size() == 3);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        CHECK(profile[k].first == radii[k]);
        PerturbationSpec spec{Norm::Linf, radii[k], false};
        auto direct = empirical_ensemble_robustness(ensemble, data, spec, bound);
        CHECK(profile[k].second.epsilon_bar_emp == direct.epsilon_bar_emp);
    }
    CHECK(profile[0].second.epsilon_bar_emp == 0.0);

    CHECK_THROWS_AS(deviation_profile(ensemble, data, {0.1, 0.05}, Norm::Linf, bound),
                    ConfigError);
    CHECK_THROWS_AS(deviation_profile(ensemble, data, {-0.1, 0.05}, Norm::Linf, bound),
                    ConfigError);
    CHECK_THROWS_AS(deviation_profile(ensemble, data, {}, Norm::Linf, bound),
                    ConfigError);
}

TEST_CASE("profile deviations grow linearly for a steep linear model") {
    MlpModel model = steep_linear_model(40.0);
    Hypothesis h;
    h.model = model;
    h.algorithm = "sgd";

    Dataset data;
    data.features = Mat(1, 2);
    data.features(0, 0) = 0.5;
    data.features(0, 1) = 0.5;
    data.labels = {0};
    data.class_count = 2;
    data.name = "point";

    BoundedLoss bound{100.0};
    std::vector<double> radii{0.025, 0.05, 0.1};
    auto profile = deviation_profile({h}, data, radii, Norm::Linf, bound);
    for (std::size_t k = 0; k < radii.size(); ++k)
        CHECK(profile[k].second.epsilon_bar_emp ==
              doctest::Approx(2.0 * 40.0 * radii[k]).epsilon(1e-9));
}

TEST_CASE("grid oracle validates the closed-form solver on a linear model") {
    MlpModel model = steep_linear_model(40.0);
    Vec x{0.5, 0.5};
    BoundedLoss bound{100.0};
    for (Norm norm : {Norm::L1, Norm::L2, Norm::Linf}) {
        PerturbationSpec spec{norm, 0.1, false};
        Hypothesis h;
        h.model = model;
        Dataset point;
        point.features = Mat(1, 2);
        point.features(0, 0) = x[0];
        point.features(0, 1) = x[1];
        point.labels = {0};
        point.class_count = 2;
        point.name = "point";
        double achieved = per_hypothesis_max_deviation(h, point, spec, bound);
        double oracle = brute_force_deviation_oracle(model, x, 0, spec, 21, bound);
        CHECK(oracle >= achieved - 1e-12);
        CHECK(oracle == doctest::Approx(achieved).epsilon(1e-9));
    }
}

TEST_CASE("grid oracle bounds the solver from above on small nets") {
    Dataset data = synthetic_blobs(20, 3, 2, 0.5, 0.05, 41);
    TrainConfig c;
    c.algorithm = Algorithm::Sgd;
    c.layer_dims = {3, 6, 2};
    c.lr = 0.1;
    c.batch_size = 10;
    c.epochs = 6;
    c.seed = 5;
    Hypothesis h = train(c, data);
    BoundedLoss bound{kDefaultLossBound};
    PerturbationSpec spec{Norm::Linf, 0.05, false};
    for (std::size_t i = 0; i < 5; ++i) {
        auto s = data.sample(i);
        Vec delta = adversarial_perturbation(h.model, s, data.labels[i], spec, bound);
        Vec moved = perturbed_sample(s, delta);
        double achieved = std::fabs(loss_at(h.model, moved, data.labels[i], bound) -
                                    loss_at(h.model, s, data.labels[i], bound));
        double oracle =
            brute_force_deviation_oracle(h.model, s, data.labels[i], spec, 9, bound);
        CHECK(oracle >= achieved - 1e-12);
    }
}

TEST_CASE("grid oracle scope limits") {
    MlpModel model = init_mlp({5, 3}, 2);
    Vec x(5, 0.5);
    BoundedLoss bound{kDefaultLossBound};
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    CHECK_THROWS_AS(brute_force_deviation_oracle(model, x, 0, spec, 9, bound),
                    OracleScopeError);

    MlpModel ok = init_mlp({2, 3}, 2);
    Vec y(2, 0.5);
    CHECK_THROWS_AS(brute_force_deviation_oracle(ok, y, 0, spec, 2, bound),
                    ConfigError);
    PerturbationSpec zero{Norm::Linf, 0.0, false};
    CHECK(brute_force_deviation_oracle(ok, y, 0, zero, 9, bound) == 0.0);
}
