#include <benchmark/benchmark.h>

#include <random>

#include "ain/nets.hpp"
#include "ain/ops.hpp"

using namespace ain;

namespace {

Tensor<float> random_batch(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Tensor<float> t(std::move(shape));
    for (float& v : t.data()) v = u(rng);
    return t;
}

void BM_AinTinyPredict(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Network<float> net(presets::ain_tiny(10), rng);
    const auto image = random_batch({size, size, 3}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(net.predict(image).data());
}
BENCHMARK(BM_AinTinyPredict)->Arg(32)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_AinTinyTrainStep(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Network<float> net(presets::ain_tiny(10), rng);
    const auto images = random_batch({batch, 32, 32, 3}, 3);
    std::vector<std::size_t> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = i % 10;
    auto params = net.parameters();
    for (auto _ : state) {
        zero_grad(params);
        backward(ops::softmax_cross_entropy(net.forward(images, true), labels));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_AinTinyTrainStep)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SpeechPredict(benchmark::State& state) {
    const auto frames = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Network<float> net(presets::speech(30), rng);
    const auto utterance = random_batch({frames, 40}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(net.predict(utterance).data());
}
BENCHMARK(BM_SpeechPredict)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
