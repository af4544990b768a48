#include <benchmark/benchmark.h>

#include "ensrob/dataset.hpp"
#include "ensrob/mlp.hpp"
#include "ensrob/perturbation.hpp"
#include "ensrob/robustness.hpp"
#include "ensrob/trainers.hpp"

namespace {

using namespace ensrob;

MlpModel bench_model(int width) {
    return init_mlp({20, width, 4}, 99, 1.0);
}

Dataset bench_data(int n) {
    return synthetic_blobs(n, 20, 4, 0.5, 0.15, 31);
}

void bm_forward(benchmark::State& state) {
    MlpModel m = bench_model(static_cast<int>(state.range(0)));
    Dataset ds = bench_data(64);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(m, ds.sample(i)));
        i = (i + 1) % ds.size();
    }
}
BENCHMARK(bm_forward)->Arg(32)->Arg(128)->Arg(512);

void bm_backward(benchmark::State& state) {
    MlpModel m = bench_model(static_cast<int>(state.range(0)));
    Dataset ds = bench_data(64);
    BoundedLoss bound(kDefaultLossBound);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(m, ds.sample(i), ds.labels[i], bound));
        i = (i + 1) % ds.size();
    }
}
BENCHMARK(bm_backward)->Arg(32)->Arg(128)->Arg(512);

void bm_adversarial_perturbation(benchmark::State& state) {
    MlpModel m = bench_model(64);
    Dataset ds = bench_data(64);
    BoundedLoss bound(kDefaultLossBound);
    Norm norm = static_cast<Norm>(state.range(0));
    PerturbationSpec spec{norm, 0.1, false};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            adversarial_perturbation(m, ds.sample(i), ds.labels[i], spec, bound));
        i = (i + 1) % ds.size();
    }
}
BENCHMARK(bm_adversarial_perturbation)
    ->Arg(static_cast<int>(Norm::L1))
    ->Arg(static_cast<int>(Norm::L2))
    ->Arg(static_cast<int>(Norm::Linf));

void bm_max_deviation(benchmark::State& state) {
    Dataset ds = bench_data(static_cast<int>(state.range(0)));
    TrainConfig cfg;
    cfg.algorithm = Algorithm::Sgd;
    cfg.layer_dims = {20, 32, 4};
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.seed = 5;
    Hypothesis h = train(cfg, ds);
    BoundedLoss bound(kDefaultLossBound);
    PerturbationSpec spec{Norm::Linf, 0.1, false};
    for (auto _ : state)
        benchmark::DoNotOptimize(per_hypothesis_max_deviation(h, ds, spec, bound));
}
BENCHMARK(bm_max_deviation)->Arg(256)->Arg(1024);

void bm_train_epoch(benchmark::State& state) {
    Dataset ds = bench_data(512);
    TrainConfig cfg;
    cfg.algorithm = static_cast<Algorithm>(state.range(0));
    cfg.layer_dims = {20, 32, 4};
    cfg.epochs = 1;
    cfg.batch_size = 64;
    cfg.adv_radius = 0.1;
    cfg.dropout_rate = 0.5;
    cfg.seed = 5;
    for (auto _ : state) benchmark::DoNotOptimize(train(cfg, ds));
}
BENCHMARK(bm_train_epoch)
    ->Arg(static_cast<int>(Algorithm::Sgd))
    ->Arg(static_cast<int>(Algorithm::SgdDropout))
    ->Arg(static_cast<int>(Algorithm::Prioritized))
    ->Arg(static_cast<int>(Algorithm::AdversarialLinf))
    ->Arg(static_cast<int>(Algorithm::BayesByBackprop));

} // namespace

BENCHMARK_MAIN();
