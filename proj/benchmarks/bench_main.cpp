#include <benchmark/benchmark.h>

#include "spacebind/binding.hpp"
#include "spacebind/matrix.hpp"
#include "spacebind/net.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/rng.hpp"
#include "spacebind/routing.hpp"

namespace {

using namespace spacebind;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t key) {
    Rng rng(key);
    return rng.normal_matrix(rows, cols, 1.0);
}

void BM_Matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1);
    const Matrix b = random_matrix(n, n, 2);
    for (auto _ : state) {
        Matrix c = matmul(a, b);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_PerceptronForward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Perceptron net(24, 128, 32, OutputActivation::Identity);
    Rng rng(3);
    net.init(rng);
    const Matrix input = random_matrix(batch, 24, 4);
    for (auto _ : state) {
        Perceptron::Cache cache;
        Matrix out = net.forward(input, cache);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_PerceptronForward)->Arg(64)->Arg(256);

void BM_PerceptronBackward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Perceptron net(24, 128, 32, OutputActivation::Identity);
    Rng rng(5);
    net.init(rng);
    const Matrix input = random_matrix(batch, 24, 6);
    const Matrix upstream = random_matrix(batch, 32, 7);
    Perceptron::Cache cache;
    net.forward(input, cache);
    for (auto _ : state) {
        Perceptron::Gradients grads = net.backward(cache, upstream);
        benchmark::DoNotOptimize(grads.w1.data.data());
    }
}
BENCHMARK(BM_PerceptronBackward)->Arg(64)->Arg(256);

void BM_InfoNce(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Matrix x = l2_normalize_rows(random_matrix(batch, 32, 8));
    Matrix y = l2_normalize_rows(random_matrix(batch, 32, 9));
    for (auto _ : state) {
        InfoNceResult result = info_nce(x, y, 0.03);
        benchmark::DoNotOptimize(result.loss);
    }
}
BENCHMARK(BM_InfoNce)->Arg(64)->Arg(256);

void BM_Top1(benchmark::State& state) {
    const std::size_t pool = static_cast<std::size_t>(state.range(0));
    const Matrix queries = random_matrix(128, 32, 10);
    const Matrix candidates = random_matrix(pool, 32, 11);
    for (auto _ : state) {
        std::vector<std::size_t> picks = top1(queries, candidates);
        benchmark::DoNotOptimize(picks.data());
    }
}
BENCHMARK(BM_Top1)->Arg(1000)->Arg(4000);

void BM_RouteWeights(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    const std::size_t count = 5;
    const std::size_t dim = 32;
    Router router;
    router.modality = Modality::Image;
    router.net = Perceptron(count * dim, 128, count, OutputActivation::Sigmoid);
    Rng rng(12);
    router.net.init(rng);
    std::vector<Matrix> slices;
    for (std::size_t j = 0; j < count; ++j)
        slices.push_back(l2_normalize_rows(random_matrix(batch, dim, 13 + j)));
    for (auto _ : state) {
        RouteEval eval = route_weights(router, slices);
        benchmark::DoNotOptimize(eval.weights.data.data());
    }
}
BENCHMARK(BM_RouteWeights)->Arg(64)->Arg(256);

} // namespace

BENCHMARK_MAIN();
