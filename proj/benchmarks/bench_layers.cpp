#include <benchmark/benchmark.h>

#include <random>

#include "ain/ail.hpp"
#include "ain/ops.hpp"

using namespace ain;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor<float> t(std::move(shape));
    for (float& v : t.data()) v = u(rng);
    return t;
}

void BM_Conv3x3(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    const auto x = Var<float>::constant(random_tensor({1, size, size, c}, 1));
    const auto w = Var<float>::constant(random_tensor({3, 3, c, c}, 2));
    const auto b = Var<float>::constant(Tensor<float>({c}));
    for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, {3, 3, 1, 1, 1}).value().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size * c * c * 9));
}
BENCHMARK(BM_Conv3x3)->Args({32, 16})->Args({32, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

// The three interchangeable transitions, all halving a (size, size, c) map.
void BM_TransitionLail(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    std::mt19937_64 rng(3);
    const AilConfig cfg = AilConfig::local(c, c);
    const auto params = AilParams<float>::init(cfg, "lail", rng);
    const auto x = Var<float>::constant(random_tensor({1, size, size, c}, 4));
    for (auto _ : state) benchmark::DoNotOptimize(ail_forward(x, cfg, params).value().data());
}
BENCHMARK(BM_TransitionLail)->Args({32, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_TransitionMaxPool(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    const auto x = Var<float>::constant(random_tensor({1, size, size, c}, 4));
    for (auto _ : state) benchmark::DoNotOptimize(ops::maxpool2d(x, 2, 2).value().data());
}
BENCHMARK(BM_TransitionMaxPool)->Args({32, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_TransitionStridedConv(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    const auto x = Var<float>::constant(random_tensor({1, size, size, c}, 4));
    const auto w = Var<float>::constant(random_tensor({1, 1, c, c}, 5));
    const auto b = Var<float>::constant(Tensor<float>({c}));
    for (auto _ : state) benchmark::DoNotOptimize(ops::relu(ops::conv2d(x, w, b, {1, 1, 2, 0, 0})).value().data());
}
BENCHMARK(BM_TransitionStridedConv)->Args({32, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

// Forward plus backward through a LAIL, the cost that matters in training.
void BM_LailBackward(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const std::size_t c = 32;
    std::mt19937_64 rng(6);
    const AilConfig cfg = AilConfig::local(c, c);
    const auto params = AilParams<float>::init(cfg, "lail", rng);
    const auto x = Var<float>::constant(random_tensor({1, size, size, c}, 7));
    auto list = params.list();
    for (auto _ : state) {
        zero_grad(list);
        backward(ops::sum(ail_forward(x, cfg, params)));
    }
}
BENCHMARK(BM_LailBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
