#include <doctest.h>

#include <cmath>

#include "ensrob/analysis.hpp"
#include "ensrob/dataset.hpp"
#include "ensrob/errors.hpp"
#include "ensrob/trainers.hpp"

using namespace ensrob;

TEST_CASE("pearson hand values") {
    CHECK(pearson({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pearson rejects degenerate inputs") {
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), DomainError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {5, 5, 5}), DomainError);
    CHECK_THROWS_AS(pearson({1}, {2}), DomainError);
    CHECK_THROWS_AS(pearson({}, {}), DomainError);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), ShapeError);
}

TEST_CASE("average_ranks shares tied positions") {
    CHECK(average_ranks({10, 20, 30}) == Vec{1, 2, 3});
    CHECK(average_ranks({30, 10, 20}) == Vec{3, 1, 2});
    CHECK(average_ranks({10, 20, 20, 30}) == Vec{1, 2.5, 2.5, 4});
    CHECK(average_ranks({5, 5, 5}) == Vec{2, 2, 2});
}

TEST_CASE("spearman is rank-based") {
    // monotone, wildly nonlinear
    CHECK(spearman({1, 2, 3, 4}, {1, 10, 100, 1000}) == 1.0);
    CHECK(spearman({1, 2, 3, 4}, {1000, 100, 10, 1}) == -1.0);
    CHECK(spearman({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-12));
    // scale invariance
    CHECK(spearman({0.001, 0.002, 0.003}, {7, 9, 8}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), DomainError);
}

TEST_CASE("generalization_gap is zero against the training set itself") {
    Dataset data = synthetic_blobs(80, 2, 2, 0.5, 0.05, 61);
    TrainConfig c;
    c.algorithm = Algorithm::Sgd;
    c.layer_dims = {2, 8, 2};
    c.lr = 0.1;
    c.batch_size = 20;
    c.epochs = 10;
    Hypothesis h = train(c, data);
    BoundedLoss bound{kDefaultLossBound};
    GapResult g = generalization_gap(h, data, data, bound);
    CHECK(g.error_gap == 0.0);
    CHECK(g.loss_gap == 0.0);
    CHECK(g.train_error == g.test_error);
    CHECK(g.train_loss == g.test_loss);
}

TEST_CASE("generalization_gap fields are mutually consistent") {
    Dataset all = synthetic_blobs(120, 2, 2, 0.5, 0.1, 62);
    auto [train_set, test_set] = split(all, 0.75, 1);
    TrainConfig c;
    c.algorithm = Algorithm::Sgd;
    c.layer_dims = {2, 8, 2};
    c.lr = 0.1;
    c.batch_size = 20;
    c.epochs = 12;
    Hypothesis h = train(c, train_set);
    BoundedLoss bound{kDefaultLossBound};
    GapResult g = generalization_gap(h, train_set, test_set, bound);
    CHECK(g.error_gap == doctest::Approx(g.test_error - g.train_error).epsilon(1e-15));
    CHECK(g.loss_gap == doctest::Approx(g.test_loss - g.train_loss).epsilon(1e-15));
    CHECK(g.train_error == error_rate(h.model, train_set));
    CHECK(g.test_loss == mean_loss(h.model, test_set, bound));
    CHECK(g.train_error >= 0.0);
    CHECK(g.train_loss <= bound.M);
}

namespace {

ExperimentRecord rec(const std::string& alg, double eps, double gap, double t1) {
    ExperimentRecord r;
    r.algorithm = alg;
    r.epsilon_bar_emp = eps;
    r.error_gap = gap;
    r.robustness_t1 = t1;
    return r;
}

} // namespace

TEST_CASE("build_report computes grouped correlations") {
    std::vector<ExperimentRecord> records{
        rec("sgd", 0.1, 0.01, 0.12),
        rec("sgd", 0.2, 0.03, 0.25),
        rec("sgd", 0.3, 0.02, 0.28),
        rec("adversarial_linf", 0.05, 0.005, 0.06),
        rec("adversarial_linf", 0.08, 0.012, 0.09),
    };
    ExperimentReport report = build_report(records);
    REQUIRE(report.records.size() == 5);
    REQUIRE(report.per_algorithm.count("sgd") == 1);
    REQUIRE(report.per_algorithm.count("adversarial_linf") == 1);

    CHECK(report.overall.available);
    Vec eps, gap, t1;
    for (const auto& r : records) {
        eps.push_back(r.epsilon_bar_emp);
        gap.push_back(r.error_gap);
        t1.push_back(r.robustness_t1);
    }
    CHECK(report.overall.pearson_ensemble_gap ==
          doctest::Approx(pearson(eps, gap)).epsilon(1e-15));
    CHECK(report.overall.spearman_ensemble_gap ==
          doctest::Approx(spearman(eps, gap)).epsilon(1e-15));
    CHECK(report.overall.pearson_t1_gap ==
          doctest::Approx(pearson(t1, gap)).epsilon(1e-15));

    const auto& sgd = report.per_algorithm.at("sgd");
    CHECK(sgd.available);
    CHECK(sgd.pearson_ensemble_gap ==
          doctest::Approx(pearson({0.1, 0.2, 0.3}, {0.01, 0.03, 0.02})).epsilon(1e-15));
    // two points correlate perfectly
    const auto& adv = report.per_algorithm.at("adversarial_linf");
    CHECK(adv.available);
    CHECK(adv.pearson_ensemble_gap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_report marks degenerate groups unavailable") {
    SUBCASE("single record") {
        ExperimentReport report = build_report({rec("sgd", 0.1, 0.01, 0.1)});
        CHECK(!report.overall.available);
        CHECK(!report.per_algorithm.at("sgd").available);
    }
    SUBCASE("constant column") {
        ExperimentReport report = build_report({
            rec("sgd", 0.1, 0.01, 0.1),
            rec("sgd", 0.1, 0.02, 0.2),
        });
        CHECK(!report.overall.available);
    }
    SUBCASE("empty input") {
        ExperimentReport report = build_report({});
        CHECK(!report.overall.available);
        CHECK(report.per_algorithm.empty());
    }
    SUBCASE("mixed availability") {
        ExperimentReport report = build_report({
            rec("sgd", 0.1, 0.01, 0.1),
            rec("sgd", 0.2, 0.03, 0.2),
            rec("prioritized", 0.15, 0.02, 0.15),
        });
        CHECK(report.overall.available);
        CHECK(report.per_algorithm.at("sgd").available);
        CHECK(!report.per_algorithm.at("prioritized").available);
    }
}
