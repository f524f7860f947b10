#include <gtest/gtest.h>

#include <random>

#include "ain/autodiff.hpp"
#include "ain/errors.hpp"
#include "ain/gradcheck.hpp"
#include "ain/ops.hpp"
#include "reference.hpp"

using namespace ain;

TEST(Autodiff, SumGivesOnes) {
    Parameter<double> p("p", Tensor<double>({2, 3}, {1, -2, 3, 4, 5, -6}));
    backward(ops::sum(p.var()));
    for (double g : p.grad().data()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, DeadReluGivesZeros) {
    Parameter<double> p("p", Tensor<double>({4}, {-1, -2, -0.5, -3}));
    backward(ops::sum(ops::relu(p.var())));
    for (double g : p.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, SigmoidSlopeAtZero) {
    Parameter<double> p("p", Tensor<double>({1}, {0.0}));
    backward(ops::sum(ops::sigmoid(p.var())));
    EXPECT_EQ(p.grad()[0], 0.25);
}

TEST(Autodiff, NonScalarRootIsContractError) {
    Parameter<double> p("p", Tensor<double>({3}, 1.0));
    EXPECT_THROW(backward(ops::relu(p.var())), ContractError);
}

TEST(Autodiff, GradientsAccumulateUntilZeroed) {
    Parameter<double> p("p", Tensor<double>({3}, {1, 2, 3}));
    std::vector<Parameter<double>> ps{p};
    backward(ops::sum(ops::mul(p.var(), p.var())));
    const Tensor<double> once = p.grad();
    backward(ops::sum(ops::mul(p.var(), p.var())));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(p.grad()[i], 2 * once[i]);
    zero_grad(ps);
    for (double g : p.grad().data()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(once.to_vector(), (std::vector<double>{2, 4, 6}));
}

TEST(Autodiff, SharedNodeFanOut) {
    Parameter<double> p("p", Tensor<double>({2}, {1.5, -2}));
    const Var<double> x = p.var();
    backward(ops::sum(ops::add(ops::mul(x, x), x)));
    EXPECT_EQ(p.grad()[0], 4.0);
    EXPECT_EQ(p.grad()[1], -3.0);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
    Parameter<double> p("p", Tensor<double>({2}, {1, 2}));
    const auto c = Var<double>::constant(Tensor<double>({2}, {3, 4}));
    backward(ops::sum(ops::mul(p.var(), c)));
    EXPECT_EQ(p.grad().to_vector(), (std::vector<double>{3, 4}));
    EXPECT_FALSE(c.requires_grad());
}

TEST(GradCheck, SumOfSquares) {
    std::mt19937_64 rng(1);
    Parameter<Extended> p("theta", ref::random<Extended>({4, 5}, rng));
    const auto report = finite_diff_check(
        [&] { return ops::sum(ops::mul(p.var(), p.var())); }, {p});
    EXPECT_TRUE(report.pass);
    EXPECT_LT(report.max_rel_err, 1e-8);
}

TEST(GradCheck, ConstantLossPasses) {
    Parameter<Extended> p("theta", Tensor<Extended>({3}, 1.0L));
    const auto report = finite_diff_check(
        [&] { return ops::sum(Var<Extended>::constant(Tensor<Extended>({2}, 1.0L))); }, {p});
    EXPECT_TRUE(report.pass);
    EXPECT_EQ(report.max_rel_err, 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
    Parameter<Extended> p("theta", Tensor<Extended>({2}, {1.0L, 2.0L}));
    // Backward rule deliberately off by a factor of two.
    auto broken = [&] {
        const Var<Extended> x = p.var();
        Tensor<Extended> value({1}, {x.value()[0] + x.value()[1]});
        return make_node<Extended>("broken", value, {x}, [](Node<Extended>& n) {
            n.parents[0]->accumulate(Tensor<Extended>({2}, 2 * n.grad[0]));
        });
    };
    const auto report = finite_diff_check<Extended>(broken, {p});
    EXPECT_FALSE(report.pass);
    EXPECT_NEAR(report.max_rel_err, 0.5, 1e-6);
}

TEST(GradCheck, RelativeErrorFloor) {
    EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
    EXPECT_NEAR(relative_error(1e-12, 0.0), 1e-4, 1e-18);
    EXPECT_NEAR(relative_error(2.0, 1.0), 0.5, 1e-15);
}

TEST(GradCheck, ReportCsvColumns) {
    Parameter<Extended> p("theta", Tensor<Extended>({2}, 1.0L));
    const auto report = finite_diff_check([&] { return ops::sum(p.var()); }, {p});
    std::ostringstream s;
    report.write_csv(s);
    EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "parameter,analytic,numeric,rel_err,index,checked,refined");
    EXPECT_NE(s.str().find("theta,"), std::string::npos);
}

namespace {

// Builds one loss over a mix of ops and returns the parameters' gradients.
std::vector<Tensor<double>> gradients_in_order(bool reversed) {
    std::mt19937_64 rng(3);
    Parameter<double> a("a", ref::random<double>({1, 4, 4, 2}, rng));
    Parameter<double> w("w", ref::random<double>({3, 3, 2, 3}, rng));
    Parameter<double> b("b", ref::random<double>({3}, rng));
    auto head = [&] { return ops::sum(ops::relu(ops::conv2d(a.var(), w.var(), b.var(), {3, 3, 1, 1, 1}))); };
    auto tail = [&] { return ops::sum(ops::sigmoid(ops::mul(a.var(), a.var()))); };
    const Var<double> loss = reversed ? ops::add(tail(), head()) : ops::add(head(), tail());
    backward(loss);
    return {a.grad(), w.grad(), b.grad()};
}

}  // namespace

TEST(Autodiff, IndependentOfOperandOrder) {
    const auto x = gradients_in_order(false), y = gradients_in_order(true);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(ref::max_abs_diff(x[i], y[i]), 1e-12);
}

TEST(Autodiff, ConvGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    Parameter<Extended> x("x", ref::random<Extended>({2, 5, 4, 2}, rng));
    Parameter<Extended> w("w", ref::random<Extended>({3, 3, 2, 3}, rng));
    Parameter<Extended> b("b", ref::random<Extended>({3}, rng));
    const auto probe = ref::random<Extended>({2, 3, 2, 3}, rng);
    const auto report = finite_diff_check(
        [&] { return ops::weighted_sum(ops::conv2d(x.var(), w.var(), b.var(), {3, 3, 2, 1, 1}), probe); }, {x, w, b});
    EXPECT_TRUE(report.pass) << report.max_rel_err;
}
