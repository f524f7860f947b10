#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ain/ail.hpp"
#include "ain/errors.hpp"
#include "ain/gradcheck.hpp"
#include "ain/ops.hpp"
#include "reference.hpp"

using namespace ain;

namespace {

template <typename T>
AilParams<T> random_params(const AilConfig& c, std::mt19937_64& rng) {
    auto p = AilParams<T>::init(c, "ail", rng);
    for (auto* bias : {&p.content_bias, &p.attention_bias})
        for (auto& v : bias->value().data()) v = static_cast<T>(std::normal_distribution<double>(0, 0.3)(rng));
    return p;
}

}  // namespace

TEST(AilBranches, ZeroParamsGiveZeroContentAndHalfAttention) {
    const auto cfg = AilConfig::local(3, 4);
    const auto p = AilParams<double>::zeros(cfg, "z");
    const auto br = ail_branches(Var<double>::constant(Tensor<double>({1, 6, 5, 3})), cfg, p);
    EXPECT_EQ(br.content.shape(), (Shape{1, 6, 5, 4}));
    EXPECT_EQ(br.attention.shape(), (Shape{1, 6, 5, 4}));
    for (double v : br.content.value().data()) EXPECT_EQ(v, 0.0);
    for (double v : br.attention.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(AilBranches, ContentIsNonNegativeAndAttentionInUnitInterval) {
    std::mt19937_64 rng(2);
    const auto cfg = AilConfig::local(3, 5);
    const auto p = random_params<double>(cfg, rng);
    const auto br = ail_branches(Var<double>::constant(ref::random<double>({2, 7, 6, 3}, rng, -3, 3)), cfg, p);
    for (double v : br.content.value().data()) EXPECT_GE(v, 0.0);
    for (double v : br.attention.value().data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Windows, TilingAndGlobalCounts) {
    const Tensor<double> map({4, 4, 1});
    EXPECT_EQ(window_iter(map, WindowGeometry::local(2, 2, 2)).size(), 4u);
    EXPECT_EQ(window_iter(map, WindowGeometry::whole()).size(), 1u);
    EXPECT_EQ(window_iter(map, WindowGeometry::whole())[0].values.shape(), (Shape{4, 4, 1}));
    EXPECT_EQ(window_iter(Tensor<double>({5, 5, 1}), WindowGeometry::local(3, 3, 2, 1, 1)).size(), 9u);
}

TEST(Windows, TilingVisitsEverySiteOnce) {
    Tensor<double> map({6, 4, 1});
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<double>(i);
    double total = 0;
    for (const auto& w : window_iter(map, WindowGeometry::local(2, 2, 2))) total += w.values.sum();
    EXPECT_EQ(total, map.sum());
}

TEST(Incorporate, WorkedExample) {
    const Tensor<double> x({2, 2, 1}, {1, 2, 3, 4});
    const Tensor<double> w({2, 2, 1}, {1, 0, 0, 1});
    EXPECT_NEAR(incorporate(x, w, 1e-8)[0], 2.5, 1e-7);
}

TEST(Incorporate, UniformWeightsGiveMean) {
    const Tensor<double> x({2, 2, 1}, {1, 2, 3, 4});
    EXPECT_NEAR(incorporate(x, Tensor<double>({2, 2, 1}, 0.5), 1e-8)[0], 2.5, 1e-7);
}

TEST(Incorporate, OneHotSelects) {
    std::mt19937_64 rng(4);
    const auto x = ref::random<double>({3, 3, 2}, rng);
    Tensor<double> w({3, 3, 2});
    w.at(1, 2, 0) = 1.0;
    w.at(0, 0, 1) = 1.0;
    const auto out = incorporate(x, w, 1e-8);
    EXPECT_NEAR(out[0], x.at(1, 2, 0), 1e-7);
    EXPECT_NEAR(out[1], x.at(0, 0, 1), 1e-7);
}

TEST(AilForward, LocalShapeOnOddMap) {
    std::mt19937_64 rng(6);
    const auto cfg = AilConfig::local(4, 8);
    const auto p = AilParams<float>::init(cfg, "l", rng);
    const auto y = ail_forward(Var<float>::constant(ref::random<float>({1, 17, 23, 4}, rng)), cfg, p);
    EXPECT_EQ(y.shape(), (Shape{1, 9, 12, 8}));
}

TEST(AilForward, GlobalShape) {
    std::mt19937_64 rng(6);
    const auto cfg = AilConfig::global(8, 512);
    const auto p = AilParams<float>::init(cfg, "g", rng);
    const auto y = ail_forward(Var<float>::constant(ref::random<float>({1, 7, 7, 8}, rng)), cfg, p);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 512}));
}

TEST(AilForward, GlobalShapeOverRandomSizes) {
    std::mt19937_64 rng(8);
    const auto cfg = AilConfig::global(2, 3);
    const auto p = AilParams<double>::init(cfg, "g", rng);
    std::uniform_int_distribution<std::size_t> e(1, 20);
    for (int i = 0; i < 20; ++i) {
        const auto y = ail_forward(Var<double>::constant(ref::random<double>({1, e(rng), e(rng), 2}, rng)), cfg, p);
        EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 3}));
    }
}

TEST(AilForward, MatchesDefinitionOverPaddedInput) {
    std::mt19937_64 rng(10);
    for (std::size_t s : {1u, 2u}) {
        const auto cfg = AilConfig::local(2, 3, 3, 3, s);
        const auto p = random_params<double>(cfg, rng);
        const auto x = ref::random<double>({2, 7, 6, 2}, rng);
        const auto y = ail_forward(Var<double>::constant(x), cfg, p);

        // Oracle: pad by one, run both branches as plain convolutions, then the window formula.
        const auto content = ref::conv2d(x, p.content_weights.value(), &p.content_bias.value(), 1, 1, 1);
        const auto attention = ref::conv2d(x, p.attention_weights.value(), &p.attention_bias.value(), 1, 2, 2);
        auto xc = content;
        for (auto& v : xc.data()) v = std::max(v, 0.0);
        auto wa = attention;
        for (auto& v : wa.data()) v = 1.0 / (1.0 + std::exp(-v));
        const auto expected = ref::ail_windows(xc, wa, 3, 3, s, 1e-8);
        ASSERT_EQ(y.shape(), expected.shape());
        EXPECT_LT(ref::max_abs_diff(y.value(), expected), 1e-12);
    }
}

TEST(AilIncorporate, UniformAttentionIsAveragePooling) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = ref::random<double>({1, 6, 8, 3}, rng, 0, 2);
        const auto y = ail_incorporate_forward(x, Tensor<double>(x.shape(), 0.7), WindowGeometry::local(2, 2, 2), 0.0);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                for (std::size_t c = 0; c < 3; ++c) {
                    const double avg = (x.at(0, 2 * i, 2 * j, c) + x.at(0, 2 * i + 1, 2 * j, c) +
                                        x.at(0, 2 * i, 2 * j + 1, c) + x.at(0, 2 * i + 1, 2 * j + 1, c)) / 4;
                    EXPECT_NEAR(y.at(0, i, j, c), avg, 1e-12);
                }
    }
}

TEST(AilIncorporate, BoundedByWindowExtremes) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = ref::random<double>({1, 3, 3, 1}, rng, 0, 5);
        const auto w = ref::random<double>({1, 3, 3, 1}, rng, 0.01, 1);
        const double y = ail_incorporate_forward(x, w, WindowGeometry::whole(), 1e-8)[0];
        const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
        EXPECT_GE(y, *lo - 1e-9);
        EXPECT_LE(y, *hi + 1e-9);
    }
}

TEST(AilIncorporate, ScaleInvariantInAttention) {
    std::mt19937_64 rng(16);
    const auto x = ref::random<long double>({2, 6, 6, 2}, rng, 0, 3);
    auto w = ref::random<long double>({2, 6, 6, 2}, rng, 0.2, 1);
    const auto g = WindowGeometry::local(3, 3, 1);
    const auto base = ail_incorporate_forward(x, w, g, 1e-8L);
    for (long double k : {0.5L, 2.0L}) {
        auto scaled = w;
        scaled *= k;
        EXPECT_LT(ref::max_abs_diff(ail_incorporate_forward(x, scaled, g, 1e-8L), base), 1e-6);
    }
}

TEST(AilBackward, ContentGradientMassEqualsUpstream) {
    std::mt19937_64 rng(18);
    const auto w = ref::random<double>({1, 4, 4, 1}, rng, 0.1, 1);
    const Tensor<double> up({1, 1, 1, 1}, 1.0);
    const auto g = ail_backward_content(up, w, WindowGeometry::whole(), 0.0);
    EXPECT_NEAR(g.sum(), 1.0, 1e-12);
}

TEST(AilBackward, ConstantContentGivesZeroAttentionGradient) {
    std::mt19937_64 rng(20);
    const Tensor<double> x({1, 4, 4, 2}, 1.3);
    const auto w = ref::random<double>({1, 4, 4, 2}, rng, 0.1, 1);
    const auto up = ref::random<double>({1, 2, 2, 2}, rng);
    const auto g = ail_backward_attention(up, x, w, WindowGeometry::local(2, 2, 2), 0.0, GradMode::Analytic);
    EXPECT_LT(g.max_abs(), 1e-12);
}

TEST(AilBackward, SingleSiteWindowFormulas) {
    const Tensor<double> x({1, 1, 1, 1}, 3.0), w({1, 1, 1, 1}, 0.25);
    const Tensor<double> up({1, 1, 1, 1}, 1.0);
    const double eps = 1e-3;
    const auto g = WindowGeometry::whole();
    EXPECT_NEAR(ail_incorporate_forward(x, w, g, eps)[0], 0.25 * 3 / (0.25 + eps), 1e-15);
    EXPECT_NEAR(ail_backward_content(up, w, g, eps)[0], 0.25 / (0.25 + eps), 1e-15);
    EXPECT_NEAR(ail_backward_attention(up, x, w, g, eps, GradMode::Analytic)[0],
                3 * eps / ((0.25 + eps) * (0.25 + eps)), 1e-12);
}

TEST(AilBackward, SquaredNormRuleDiffersFromDerivative) {
    std::mt19937_64 rng(22);
    const auto x = ref::random<double>({1, 3, 3, 1}, rng, 0, 2);
    const auto w = ref::random<double>({1, 3, 3, 1}, rng, 0.1, 1);
    const Tensor<double> up({1, 1, 1, 1}, 1.0);
    const auto g = WindowGeometry::whole();
    const auto exact = ail_backward_attention(up, x, w, g, 1e-8, GradMode::Analytic);
    const auto printed = ail_backward_attention(up, x, w, g, 1e-8, GradMode::SquaredNorm);
    EXPECT_GT(ref::max_rel_diff(exact, printed), 1e-2);
}

TEST(AilConfig, ParsesGradModes) {
    EXPECT_EQ(parse_grad_mode("analytic"), GradMode::Analytic);
    EXPECT_EQ(parse_grad_mode("squared-norm"), GradMode::SquaredNorm);
    EXPECT_THROW(parse_grad_mode("paper"), ConfigError);
    EXPECT_EQ(to_string(GradMode::SquaredNorm), "squared-norm");
}

TEST(AilConfig, RejectsZeroWindow) {
    EXPECT_THROW(AilConfig::local(2, 2, 0, 3, 2), ConfigError);
    EXPECT_THROW(AilConfig::local(2, 2, 3, 3, 0), ConfigError);
}

TEST(AilGradient, LocalLayerMatchesFiniteDifferences) {
    std::mt19937_64 rng(24);
    const auto cfg = AilConfig::local(2, 3);
    auto p = random_params<Extended>(cfg, rng);
    Parameter<Extended> x("x", ref::random<Extended>({2, 5, 6, 2}, rng));
    const auto probe = ref::random<Extended>({2, 3, 3, 3}, rng);
    auto params = p.list();
    params.push_back(x);
    const auto report = finite_diff_check(
        [&] { return ops::weighted_sum(ail_forward(x.var(), cfg, p), probe); }, params);
    EXPECT_TRUE(report.pass) << report.max_rel_err;
}
