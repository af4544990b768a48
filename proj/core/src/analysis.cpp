#include "ensrob/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ensrob/errors.hpp"

namespace ensrob {

GapResult generalization_gap(const Hypothesis& h, const Dataset& train,
                             const Dataset& test, const BoundedLoss& bound) {
    if (train.dim() != test.dim())
        throw ShapeError("train/test feature dimensions differ");
    GapResult r;
    r.train_error = error_rate(h.model, train);
    r.test_error = error_rate(h.model, test);
    r.error_gap = r.test_error - r.train_error;
    r.train_loss = mean_loss(h.model, train, bound);
    r.test_loss = mean_loss(h.model, test, bound);
    r.loss_gap = r.test_loss - r.train_loss;
    return r;
}

double pearson(const Vec& xs, const Vec& ys) {
    if (xs.size() != ys.size()) throw ShapeError("correlation inputs differ in length");
    if (xs.size() < 2) throw DomainError("correlation needs at least 2 points");
    double n = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw DomainError("correlation undefined for a constant sequence");
    return sxy / std::sqrt(sxx * syy);
}

Vec average_ranks(const Vec& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    Vec ranks(xs.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0; // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const Vec& xs, const Vec& ys) {
    return pearson(average_ranks(xs), average_ranks(ys));
}

namespace {

CorrelationSummary summarize(const std::vector<const ExperimentRecord*>& group) {
    CorrelationSummary s;
    if (group.size() < 2) return s;
    Vec eps, t1, gap;
    eps.reserve(group.size());
    t1.reserve(group.size());
    gap.reserve(group.size());
    for (const ExperimentRecord* r : group) {
        eps.push_back(r->epsilon_bar_emp);
        t1.push_back(r->robustness_t1);
        gap.push_back(r->error_gap);
    }
    try {
        s.pearson_ensemble_gap = pearson(eps, gap);
        s.spearman_ensemble_gap = spearman(eps, gap);
        s.pearson_t1_gap = pearson(t1, gap);
        s.spearman_t1_gap = spearman(t1, gap);
        s.available = true;
    } catch (const DomainError&) {
        s = CorrelationSummary{};
    }
    return s;
}

} // namespace

ExperimentReport build_report(const std::vector<ExperimentRecord>& records) {
    ExperimentReport report;
    report.records = records;

    std::vector<const ExperimentRecord*> all;
    all.reserve(records.size());
    std::map<std::string, std::vector<const ExperimentRecord*>> groups;
    for (const ExperimentRecord& r : records) {
        all.push_back(&r);
        groups[r.algorithm].push_back(&r);
    }
    report.overall = summarize(all);
    for (const auto& [name, group] : groups)
        report.per_algorithm[name] = summarize(group);
    return report;
}

} // namespace ensrob
