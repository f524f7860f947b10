#include "ain/gradcheck_suite.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "ain/ail.hpp"
#include "ain/nets.hpp"
#include "ain/ops.hpp"

namespace ain {

namespace {

using E = Extended;
using V = Var<E>;
using P = Parameter<E>;
using Td = Tensor<E>;

Td uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    Td t(std::move(shape));
    for (E& v : t.data()) v = d(rng);
    return t;
}

Td normal(Shape shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, stddev);
    Td t(std::move(shape));
    for (E& v : t.data()) v = d(rng);
    return t;
}

// Biases and norm shifts start at zero, which puts ReLUs over padded sites
// exactly on their kink; random offsets keep every check in a smooth region.
void jitter_vectors(std::vector<P>& params, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 0.3);
    for (auto& p : params) {
        if (p.value().rank() != 1) continue;
        const bool scale = p.name().ends_with(".gamma");
        for (E& v : p.value().data()) v = (scale ? 1.0 : 0.0) + d(rng);
    }
}

struct Runner {
    const GradCheckSuiteOptions& opt;
    GradCheckSuite& suite;

    void add(std::string name, const std::function<V()>& loss, std::vector<P> params, bool informational = false,
             std::size_t sample = 0) {
        GradCheckOptions o;
        o.step = opt.step;
        o.tolerance = opt.tolerance;
        o.max_elements_per_param = sample;
        o.seed = opt.seed;
        o.refine_at_kinks = opt.refine_at_kinks;
        GradCheckCase c{std::move(name), informational, finite_diff_check<E>(loss, std::move(params), o)};
        if (informational) {
            suite.informational_max = std::max(suite.informational_max, c.report.max_rel_err);
        } else {
            suite.max_rel_err = std::max(suite.max_rel_err, c.report.max_rel_err);
            suite.pass = suite.pass && c.report.pass;
        }
        suite.cases.push_back(std::move(c));
    }
};

void incorporate_cases(Runner& run, std::mt19937_64& rng) {
    const WindowGeometry g = WindowGeometry::local(3, 3, 2);
    const WindowGeometry whole = WindowGeometry::whole();
    const E eps = 1e-8;

    P content("content", uniform({1, 6, 6, 2}, 0.0, 1.0, rng));
    const Td attention = uniform({1, 6, 6, 2}, 0.05, 0.95, rng);
    const Td probe = normal({1, 2, 2, 2}, 1.0, rng);
    run.add("ail.content", [=] {
        return ops::weighted_sum(ail_incorporate(content.var(), V::constant(attention), g, eps), probe);
    }, {content});

    const Td fixed_content = uniform({1, 6, 6, 2}, 0.0, 1.0, rng);
    P weights("attention", uniform({1, 6, 6, 2}, 0.05, 0.95, rng));
    for (GradMode mode : {GradMode::Analytic, GradMode::SquaredNorm}) {
        const bool info = mode == GradMode::SquaredNorm;
        run.add("ail.attention." + to_string(mode), [=] {
            return ops::weighted_sum(ail_incorporate(V::constant(fixed_content), weights.var(), g, eps, mode), probe);
        }, {weights}, info);
        const Td probe_g = normal({1, 1, 1, 2}, 1.0, rng);
        run.add("gail.attention." + to_string(mode), [=] {
            return ops::weighted_sum(ail_incorporate(V::constant(fixed_content), weights.var(), whole, eps, mode),
                                     probe_g);
        }, {weights}, info);
    }
}

void layer_cases(Runner& run, std::mt19937_64& rng) {
    auto ail_case = [&](const std::string& name, const AilConfig& cfg, Shape in) {
        AilParams<E> p = AilParams<E>::init(cfg, name, rng);
        auto params = p.list();
        jitter_vectors(params, rng);
        const Td x = normal(std::move(in), 1.0, rng);
        const V probe_shape = ail_forward(V::constant(x), cfg, p);
        const Td probe = normal(probe_shape.shape(), 1.0, rng);
        run.add(name, [=] { return ops::weighted_sum(ail_forward(V::constant(x), cfg, p), probe); }, params);
    };
    ail_case("lail", AilConfig::local(2, 3), {2, 6, 6, 2});
    ail_case("lail.odd", AilConfig::local(2, 2, 3, 3, 2), {1, 7, 5, 2});
    ail_case("gail", AilConfig::global(2, 3), {2, 5, 6, 2});
    ail_case("lail1d", AilConfig::local_1d(3, 2), {2, 9, 1, 3});
    ail_case("gail1d", AilConfig::global_1d(3, 2), {2, 7, 1, 3});

    {
        P x("input", normal({2, 5, 5, 2}, 1.0, rng));
        P w("weights", normal({3, 3, 2, 3}, 0.5, rng));
        P b("bias", normal({3}, 0.5, rng));
        const Td probe = normal({2, 3, 3, 3}, 1.0, rng);
        run.add("conv2d", [=] {
            return ops::weighted_sum(ops::conv2d(x.var(), w.var(), b.var(), ConvGeometry{3, 3, 2, 1, 1}), probe);
        }, {x, w, b});
    }
    {
        P x("input", normal({2, 5, 5, 2}, 1.0, rng));
        const Td probe = normal({2, 3, 3, 2}, 1.0, rng);
        run.add("maxpool", [=] { return ops::weighted_sum(ops::maxpool2d(x.var(), 2, 2), probe); }, {x});
    }
    {
        P x("input", normal({2, 5, 5, 2}, 1.0, rng));
        const Td probe = normal({2, 5, 5, 2}, 1.0, rng);
        run.add("relu", [=] { return ops::weighted_sum(ops::relu(x.var()), probe); }, {x});
        run.add("sigmoid", [=] { return ops::weighted_sum(ops::sigmoid(x.var()), probe); }, {x});
    }
    {
        P x("input", normal({3, 3, 3, 2}, 1.0, rng));
        P gamma("bn.gamma", uniform({2}, 0.5, 1.5, rng));
        P beta("bn.beta", normal({2}, 0.5, rng));
        const Td probe = normal({3, 3, 3, 2}, 1.0, rng);
        run.add("batch_norm", [=] {
            ops::BatchNormState<E> state{Td({2}), Td({2}, 1.0)};
            return ops::weighted_sum(ops::batch_norm(x.var(), gamma.var(), beta.var(), state, true), probe);
        }, {x, gamma, beta});
    }
    {
        P x("input", normal({4, 5}, 1.0, rng));
        P w("fc.weights", normal({5, 3}, 0.5, rng));
        P b("fc.bias", normal({3}, 0.5, rng));
        const std::vector<std::size_t> labels{0, 2, 1, 2};
        run.add("linear.softmax_cross_entropy", [=] {
            return ops::softmax_cross_entropy(ops::linear(x.var(), w.var(), b.var()), labels);
        }, {x, w, b});
    }
}

void network_case(Runner& run, const std::string& name, const NetworkSpec& spec, Shape in, std::size_t sample,
                  std::mt19937_64& rng) {
    auto net = std::make_shared<Network<E>>(spec, rng);
    auto params = net->parameters();
    jitter_vectors(params, rng);
    const Td x = normal(std::move(in), 1.0, rng);
    std::vector<std::size_t> labels;
    std::uniform_int_distribution<std::size_t> label(0, spec.num_classes - 1);
    for (std::size_t i = 0; i < x.dim(0); ++i) labels.push_back(label(rng));
    run.add(name, [=] { return ops::softmax_cross_entropy(net->forward(x, true), labels); }, params, false, sample);
}

NetworkSpec two_lail_gail() {
    NetworkSpec s;
    s.name = "lail-lail-gail";
    s.input_channels = 2;
    s.num_classes = 3;
    LayerSpec stem;
    stem.kind = LayerKind::Conv2d;
    stem.kernel = 3;
    stem.out_channels = 3;
    LayerSpec l1;
    l1.kind = LayerKind::Lail;
    l1.stride = 2;
    l1.out_channels = 4;
    LayerSpec l2 = l1;
    l2.out_channels = 4;
    LayerSpec g;
    g.kind = LayerKind::Gail;
    g.out_channels = 5;
    LayerSpec fc;
    fc.kind = LayerKind::Classifier;
    fc.num_classes = 3;
    s.layers = {stem, l1, l2, g, fc};
    s.validate();
    return s;
}

}  // namespace

void GradCheckSuite::write_csv(std::ostream& out) const {
    out << "case,parameter,analytic,numeric,rel_err,index,checked,refined,mode\n" << std::setprecision(10);
    for (const auto& c : cases)
        for (const auto& r : c.report.rows)
            out << c.name << ',' << r.name << ',' << r.analytic << ',' << r.numeric << ',' << r.rel_err << ','
                << r.index << ',' << r.checked << ',' << r.refined << ',' << (c.informational ? "report" : "check")
                << '\n';
}

GradCheckSuite run_gradcheck_suite(const GradCheckSuiteOptions& options) {
    GradCheckSuite suite;
    Runner run{options, suite};
    std::mt19937_64 rng(options.seed);
    if (options.layers) {
        incorporate_cases(run, rng);
        layer_cases(run, rng);
    }
    if (options.composed) network_case(run, "network.lail-lail-gail", two_lail_gail(), {2, 7, 8, 2}, 0, rng);
    if (options.tiny)
        network_case(run, "network.ain-tiny", presets::ain_tiny(4), {2, 8, 8, 3}, options.sampled_elements, rng);
    if (options.speech)
        network_case(run, "network.ain-speech", presets::speech(30), {2, 24, 40}, options.sampled_elements, rng);
    return suite;
}

}  // namespace ain
