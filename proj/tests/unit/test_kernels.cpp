#include <gtest/gtest.h>

#include <cmath>

#include "ain/errors.hpp"
#include "ain/kernels.hpp"
#include "reference.hpp"

using namespace ain;

TEST(Conv2d, IdentityPointwiseKernel) {
    std::mt19937_64 rng(1);
    auto k = ConvKernel<double>::same(1, 1, 1, 1);
    k.weights[0] = 1.0;
    const auto x = ref::random<double>({6, 5, 1}, rng);
    EXPECT_EQ(conv2d(x, k), x);
}

TEST(Conv2d, StemHalvesExtents) {
    auto k = ConvKernel<float>::same(7, 7, 3, 64, 2);
    const auto y = conv2d(Tensor<float>({32, 32, 3}), k);
    EXPECT_EQ(y.shape(), (Shape{16, 16, 64}));
}

TEST(Conv2d, OnesKernelCountsNeighbours) {
    auto k = ConvKernel<double>::same(3, 3, 1, 1);
    k.weights.fill(1.0);
    const auto y = conv2d(Tensor<double>({4, 4, 1}, 1.0), k);
    EXPECT_EQ(y.at(0, 0, 0), 4.0);
    EXPECT_EQ(y.at(3, 3, 0), 4.0);
    EXPECT_EQ(y.at(1, 1, 0), 9.0);
    EXPECT_EQ(y.at(2, 2, 0), 9.0);
    EXPECT_EQ(y.at(0, 1, 0), 6.0);
}

TEST(Conv2d, ChannelMismatchIsConfigError) {
    auto k = ConvKernel<float>::same(3, 3, 2, 4);
    EXPECT_THROW(conv2d(Tensor<float>({5, 5, 3}), k), ConfigError);
}

TEST(Conv2d, ShapeLawOverRandomShapes) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> extent(1, 64);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t h = extent(rng), w = extent(rng);
        for (std::size_t k : {1u, 3u, 7u})
            for (std::size_t s : {1u, 2u}) {
                if (h + 2 * (k / 2) < k || w + 2 * (k / 2) < k) continue;
                auto kern = ConvKernel<float>::same(k, k, 1, 2, s);
                const auto y = conv2d(Tensor<float>({h, w, 1}), kern);
                EXPECT_EQ(y.dim(0), (h + s - 1) / s) << h << "x" << w << " k" << k << " s" << s;
                EXPECT_EQ(y.dim(1), (w + s - 1) / s);
            }
    }
}

TEST(Conv2d, MatchesNaiveReference) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 12; ++trial) {
        std::uniform_int_distribution<std::size_t> e(1, 16), c(1, 4), kk(0, 2), ss(1, 2);
        const std::size_t k = 2 * kk(rng) + 1, s = ss(rng);
        const std::size_t h = std::max(e(rng), k / 2 + 1), w = std::max(e(rng), k / 2 + 1);
        const std::size_t ci = c(rng), co = c(rng);
        const auto x = ref::random<double>({2, h, w, ci}, rng);
        const auto wt = ref::random<double>({k, k, ci, co}, rng);
        const auto b = ref::random<double>({co}, rng);
        const ConvGeometry g{k, k, s, k / 2, k / 2};
        const auto fast = kernels::conv2d_forward(x, wt, &b, g);
        const auto slow = ref::conv2d(x, wt, &b, s, k / 2, k / 2);
        ASSERT_EQ(fast.shape(), slow.shape());
        EXPECT_LT(ref::max_rel_diff(fast, slow), 1e-5);
    }
}

TEST(Conv2d, ZeroSizedInputIsDomainError) {
    EXPECT_THROW(conv_out_extent(0, 3, 1, 1), DomainError);
}

TEST(Conv1d, TableFourStemLength) {
    auto k = ConvKernel<float>::same_1d(15, 40, 64, 2);
    EXPECT_EQ(conv1d(Tensor<float>({100, 40}), k).shape(), (Shape{50, 64}));
}

TEST(Conv1d, RunningSums) {
    auto k = ConvKernel<double>::same_1d(3, 1, 1);
    k.weights.fill(1.0);
    const auto y = conv1d(Tensor<double>({4, 1}, {1, 2, 3, 4}), k);
    EXPECT_EQ(y.to_vector(), (std::vector<double>{3, 6, 9, 7}));
}

TEST(Conv1d, IdentityKernel) {
    auto k = ConvKernel<double>::same_1d(1, 1, 1);
    k.weights[0] = 1.0;
    const Tensor<double> x({5, 1}, {0.5, -1, 2, 3, 7});
    EXPECT_EQ(conv1d(x, k), x);
}

TEST(Activations, Relu) {
    EXPECT_EQ(relu(Tensor<double>({3}, {-1, 0, 2})).to_vector(), (std::vector<double>{0, 0, 2}));
    EXPECT_EQ(relu(Tensor<double>({1}, {-5.5})).to_vector(), (std::vector<double>{0}));
    const Tensor<double> pos({3}, {0.0, 1.5, 3});
    EXPECT_EQ(relu(pos), pos);
}

TEST(Activations, Sigmoid) {
    const auto y = sigmoid(Tensor<double>({4}, {0.0, 4.0, -4.0, 800.0}));
    EXPECT_EQ(y[0], 0.5);
    EXPECT_NEAR(y[1], 1.0 / (1.0 + std::exp(-4.0)), 1e-15);
    EXPECT_NEAR(y[1], 0.98201379003790845, 1e-15);
    EXPECT_NEAR(y[1] + y[2], 1.0, 1e-15);
    EXPECT_TRUE(std::isfinite(y[3]));
    std::mt19937_64 rng(2);
    const auto r = sigmoid(ref::random<double>({200}, rng, -30, 30));
    for (double v : r.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(MaxPool, PicksMaximum) {
    const auto y = maxpool2d(Tensor<double>({2, 2, 1}, {1, 2, 3, 4}), 2, 2);
    EXPECT_EQ(y.to_vector(), (std::vector<double>{4}));
}

TEST(MaxPool, Ramp) {
    Tensor<double> x({4, 4, 1});
    for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i + 1);
    EXPECT_EQ(maxpool2d(x, 2, 2).to_vector(), (std::vector<double>{6, 8, 14, 16}));
}

TEST(MaxPool, ConstantStaysConstant) {
    const auto y = maxpool2d(Tensor<double>({5, 5, 2}, 3.5), 2, 2);
    for (double v : y.data()) EXPECT_EQ(v, 3.5);
}

TEST(MaxPool, MatchesNaiveReferenceIncludingOddExtents) {
    std::mt19937_64 rng(9);
    for (Shape s : {Shape{2, 7, 5, 3}, Shape{1, 8, 8, 2}, Shape{2, 9, 1, 4}}) {
        const auto x = ref::random<double>(s, rng);
        const auto fast = kernels::maxpool2d_forward(x, 2, 2, 0).output;
        const auto slow = ref::maxpool(x, 2, 2);
        ASSERT_EQ(fast.shape(), slow.shape());
        EXPECT_EQ(ref::max_abs_diff(fast, slow), 0.0);
    }
}

TEST(MaxPool, WindowLargerThanInputIsDomainError) {
    EXPECT_THROW(maxpool2d(Tensor<double>({1, 1, 1}), 2, 2), DomainError);
}

TEST(MaxPool, BackwardRoutesToFirstMaximum) {
    const Tensor<double> x({1, 2, 2, 1}, {5, 5, 5, 5});
    const auto r = kernels::maxpool2d_forward(x, 2, 2, 0);
    const auto g = kernels::maxpool2d_backward(Tensor<double>({1, 1, 1, 1}, 1.0), r.argmax, x.shape());
    EXPECT_EQ(g.to_vector(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(LinearSoftmax, ZeroWeightsGiveUniform) {
    const auto p = linear_softmax(Tensor<double>({7}, 1.0), Tensor<double>({7, 128}), Tensor<double>({128}));
    for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 128, 1e-15);
}

TEST(LinearSoftmax, ClosedForm) {
    Tensor<double> w({1, 2}, {0.0, 1.0});
    const auto p = linear_softmax(Tensor<double>({1}, {std::log(3.0)}), w, Tensor<double>({2}));
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(LinearSoftmax, ShiftInvariantAndNormalized) {
    std::mt19937_64 rng(4);
    const auto x = ref::random<double>({6}, rng);
    const auto w = ref::random<double>({6, 10}, rng);
    const auto b = ref::random<double>({10}, rng);
    auto shifted = b;
    for (double& v : shifted.data()) v += 17.0;
    const auto p = linear_softmax(x, w, b), q = linear_softmax(x, w, shifted);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_LT(ref::max_abs_diff(p, q), 1e-9);
    for (double v : p.data()) EXPECT_GE(v, 0.0);
}

TEST(LinearSoftmax, DimensionMismatchIsConfigError) {
    EXPECT_THROW(linear_softmax(Tensor<double>({3}), Tensor<double>({4, 2}), Tensor<double>({2})), ConfigError);
}

TEST(Kernels, FiniteInputsGiveFiniteOutputs) {
    std::mt19937_64 rng(8);
    const auto x = ref::random<float>({2, 9, 9, 3}, rng, -50, 50);
    const auto w = ref::random<float>({3, 3, 3, 4}, rng);
    EXPECT_TRUE(kernels::conv2d_forward<float>(x, w, nullptr, {3, 3, 2, 1, 1}).all_finite());
    EXPECT_TRUE(kernels::sigmoid(x).all_finite());
    EXPECT_TRUE(kernels::softmax_rows(x.reshaped({2, 243})).all_finite());
}
