#include "ain/nets.hpp"

#include <cmath>

namespace ain {
namespace {

using nlohmann::json;

template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, std::mt19937_64* rng) {
    Tensor<T> t(std::move(shape));
    if (!rng) return t;
    std::normal_distribution<double> dist(0.0, stddev);
    for (T& v : t.data()) v = static_cast<T>(dist(*rng));
    return t;
}

template <typename T>
class ConvLayer final : public Layer<T> {
public:
    ConvLayer(std::string name, LayerKind kind, std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
              std::size_t stride, bool relu, std::mt19937_64* rng)
        : name_(std::move(name)), kind_(kind), geom_{kh, kw, stride, kh / 2, kw / 2}, relu_(relu) {
        weights_ = Parameter<T>(name_ + ".weights", normal_init<T>({kh, kw, c_in, c_out},
                                                                   std::sqrt(2.0 / double(kh * kw * c_in)), rng));
        bias_ = Parameter<T>(name_ + ".bias", Tensor<T>({c_out}));
    }

    Var<T> forward(const Var<T>& x, ForwardContext<T>&) override {
        Var<T> y = ops::conv2d(x, weights_.var(), bias_.var(), geom_);
        return relu_ ? ops::relu(y) : y;
    }
    std::vector<Parameter<T>> parameters() const override { return {weights_, bias_}; }
    std::string name() const override { return name_; }
    LayerKind kind() const override { return kind_; }

private:
    std::string name_;
    LayerKind kind_;
    ConvGeometry geom_;
    bool relu_;
    Parameter<T> weights_, bias_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
public:
    BatchNormLayer(std::string name, std::size_t channels)
        : name_(std::move(name)),
          gamma_(name_ + ".gamma", Tensor<T>({channels}, T{1})),
          beta_(name_ + ".beta", Tensor<T>({channels})) {
        state_.running_mean = Tensor<T>({channels});
        state_.running_var = Tensor<T>({channels}, T{1});
    }

    Var<T> forward(const Var<T>& x, ForwardContext<T>& ctx) override {
        return ops::batch_norm(x, gamma_.var(), beta_.var(), state_, ctx.training);
    }
    std::vector<Parameter<T>> parameters() const override { return {gamma_, beta_}; }
    std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
        return {{name_ + ".running_mean", &state_.running_mean}, {name_ + ".running_var", &state_.running_var}};
    }
    std::string name() const override { return name_; }
    LayerKind kind() const override { return LayerKind::BatchNorm; }

private:
    std::string name_;
    Parameter<T> gamma_, beta_;
    ops::BatchNormState<T> state_;
};

template <typename T>
class AilLayer final : public Layer<T> {
public:
    AilLayer(std::string name, AilConfig config, std::mt19937_64* rng)
        : name_(std::move(name)),
          config_(config),
          params_(rng ? AilParams<T>::init(config, name_, *rng) : AilParams<T>::zeros(config, name_)) {}

    Var<T> forward(const Var<T>& x, ForwardContext<T>& ctx) override {
        return ail_forward(x, config_, params_, ctx.attention, name_);
    }
    std::vector<Parameter<T>> parameters() const override { return params_.list(); }
    std::string name() const override { return name_; }
    LayerKind kind() const override {
        return config_.kind == WindowKind::Global ? LayerKind::Gail : LayerKind::Lail;
    }

private:
    std::string name_;
    AilConfig config_;
    AilParams<T> params_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
public:
    MaxPoolLayer(std::string name, std::size_t window, std::size_t stride, std::size_t c_in, std::size_t c_out,
                 bool one_d, std::mt19937_64* rng)
        : name_(std::move(name)), window_(window), stride_(stride) {
        if (c_in != c_out)
            project_ = std::make_unique<ConvLayer<T>>(name_ + ".project", LayerKind::Conv2d, 1, 1, c_in, c_out, 1,
                                                      true, rng);
        (void)one_d;  // width-1 maps pool along height only (see kernels)
    }

    Var<T> forward(const Var<T>& x, ForwardContext<T>& ctx) override {
        Var<T> y = project_ ? project_->forward(x, ctx) : x;
        return ops::maxpool2d(y, window_, stride_, 0);
    }
    std::vector<Parameter<T>> parameters() const override {
        return project_ ? project_->parameters() : std::vector<Parameter<T>>{};
    }
    std::string name() const override { return name_; }
    LayerKind kind() const override { return LayerKind::MaxPool; }

private:
    std::string name_;
    std::size_t window_, stride_;
    std::unique_ptr<ConvLayer<T>> project_;
};

template <typename T>
class DenseBlockLayer final : public Layer<T> {
public:
    DenseBlockLayer(std::string name, DenseBlockSpec spec, std::size_t c_in, bool one_d, std::mt19937_64* rng)
        : name_(std::move(name)), spec_(spec) {
        const std::size_t kw = one_d ? 1 : 3;
        std::size_t ch = c_in;
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            const std::string p = name_ + ".rep" + std::to_string(r + 1);
            Unit u;
            u.bn1 = std::make_unique<BatchNormLayer<T>>(p + ".bn1", ch);
            if (spec.bottleneck) {
                u.conv1 = std::make_unique<ConvLayer<T>>(p + ".conv1", LayerKind::Conv2d, 1, 1, ch, 4 * spec.growth,
                                                         1, false, rng);
                u.bn2 = std::make_unique<BatchNormLayer<T>>(p + ".bn2", 4 * spec.growth);
                u.conv2 = std::make_unique<ConvLayer<T>>(p + ".conv2", LayerKind::Conv2d, 3, kw, 4 * spec.growth,
                                                         spec.growth, 1, false, rng);
            } else {
                u.conv2 = std::make_unique<ConvLayer<T>>(p + ".conv2", LayerKind::Conv2d, 3, kw, ch, spec.growth, 1,
                                                         false, rng);
            }
            units_.push_back(std::move(u));
            ch += spec.growth;
        }
    }

    Var<T> forward(const Var<T>& x, ForwardContext<T>& ctx) override {
        Var<T> features = x;
        for (auto& u : units_) {
            Var<T> h = ops::relu(u.bn1->forward(features, ctx));
            if (u.conv1) h = ops::relu(u.bn2->forward(u.conv1->forward(h, ctx), ctx));
            h = u.conv2->forward(h, ctx);
            features = ops::concat_channels<T>({features, h});
        }
        return features;
    }

    std::vector<Parameter<T>> parameters() const override {
        std::vector<Parameter<T>> out;
        for (const auto& u : units_)
            for (const Layer<T>* l : {static_cast<const Layer<T>*>(u.bn1.get()), static_cast<const Layer<T>*>(u.conv1.get()),
                                      static_cast<const Layer<T>*>(u.bn2.get()), static_cast<const Layer<T>*>(u.conv2.get())})
                if (l)
                    for (auto& p : l->parameters()) out.push_back(p);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (auto& u : units_)
            for (BatchNormLayer<T>* bn : {u.bn1.get(), u.bn2.get()})
                if (bn)
                    for (auto& b : bn->buffers()) out.push_back(b);
        return out;
    }

    std::string name() const override { return name_; }
    LayerKind kind() const override { return LayerKind::DenseBlock; }

private:
    struct Unit {
        std::unique_ptr<BatchNormLayer<T>> bn1, bn2;
        std::unique_ptr<ConvLayer<T>> conv1, conv2;
    };
    std::string name_;
    DenseBlockSpec spec_;
    std::vector<Unit> units_;
};

template <typename T>
class ClassifierLayer final : public Layer<T> {
public:
    ClassifierLayer(std::string name, std::size_t in_features, std::size_t classes, std::mt19937_64* rng)
        : name_(std::move(name)),
          weights_(name_ + ".weights", normal_init<T>({in_features, classes}, std::sqrt(1.0 / double(in_features)), rng)),
          bias_(name_ + ".bias", Tensor<T>({classes})),
          in_features_(in_features) {}

    Var<T> forward(const Var<T>& x, ForwardContext<T>&) override {
        const std::size_t n = x.shape()[0];
        const std::size_t f = x.value().size() / n;
        if (f != in_features_)
            throw DomainError("classifier expects " + std::to_string(in_features_) + " features per sample, got " +
                              std::to_string(f));
        return ops::linear(ops::reshape(x, {n, f}), weights_.var(), bias_.var());
    }
    std::vector<Parameter<T>> parameters() const override { return {weights_, bias_}; }
    std::string name() const override { return name_; }
    LayerKind kind() const override { return LayerKind::Classifier; }

private:
    std::string name_;
    Parameter<T> weights_, bias_;
    std::size_t in_features_;
};

// Channel width after each layer; validates the chain as it goes.
struct Plan {
    std::vector<std::size_t> in_channels;
    std::vector<std::size_t> out_channels;
};

std::size_t layer_stride(const LayerSpec& l) {
    switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::Conv1d:
        case LayerKind::Lail:
        case LayerKind::MaxPool:
        case LayerKind::StridedConv: return l.stride;
        default: return 1;
    }
}

std::size_t stride_1d_aware(const NetworkSpec& spec, std::size_t extent, const LayerSpec& l, bool width) {
    if (width && spec.dims == 1) return extent;
    switch (l.kind) {
        case LayerKind::Gail: return 1;
        case LayerKind::MaxPool: return (extent + l.stride - 1) / l.stride;
        default: return (extent + layer_stride(l) - 1) / layer_stride(l);
    }
}

Plan plan(const NetworkSpec& spec) {
    auto fail = [&](std::size_t i, const std::string& msg) {
        throw ConfigError(spec.name + ": layer " + std::to_string(i) + " (" + to_string(spec.layers[i].kind) +
                          "): " + msg);
    };
    if (spec.dims != 1 && spec.dims != 2) throw ConfigError(spec.name + ": dims must be 1 or 2");
    if (spec.input_channels == 0) throw ConfigError(spec.name + ": input_channels must be positive");
    if (spec.num_classes == 0) throw ConfigError(spec.name + ": num_classes must be positive");
    if (spec.layers.empty()) throw ConfigError(spec.name + ": no layers");
    if (spec.layers.back().kind != LayerKind::Classifier)
        throw ConfigError(spec.name + ": layer " + std::to_string(spec.layers.size() - 1) +
                          " must be a classifier (final layer)");

    Plan p;
    std::size_t ch = spec.input_channels;
    std::size_t globals = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        p.in_channels.push_back(ch);
        const std::size_t out = l.out_channels ? l.out_channels : ch;
        switch (l.kind) {
            case LayerKind::Conv2d:
                if (spec.dims != 2) fail(i, "conv2d in a 1-D network");
                [[fallthrough]];
            case LayerKind::Conv1d:
                if (l.kind == LayerKind::Conv1d && spec.dims != 1) fail(i, "conv1d in a 2-D network");
                [[fallthrough]];
            case LayerKind::StridedConv:
            case LayerKind::Lail:
            case LayerKind::MaxPool:
                if (l.kernel == 0) fail(i, "kernel must be >= 1");
                if (l.stride == 0) fail(i, "stride must be >= 1");
                ch = out;
                break;
            case LayerKind::Gail:
                ++globals;
                ch = out;
                break;
            case LayerKind::DenseBlock:
                if (l.dense.growth == 0 && l.dense.repetitions > 0) fail(i, "dense block growth must be >= 1");
                ch = l.dense.out_channels(ch);
                break;
            case LayerKind::BatchNorm: break;
            case LayerKind::Classifier:
                if (i + 1 != spec.layers.size()) fail(i, "classifier must be the final layer");
                if (l.num_classes && l.num_classes != spec.num_classes)
                    fail(i, "classifier num_classes " + std::to_string(l.num_classes) + " != network num_classes " +
                                std::to_string(spec.num_classes));
                break;
        }
        p.out_channels.push_back(ch);
    }
    if (globals > 1) throw ConfigError(spec.name + ": more than one gail layer");
    if (globals == 0) {
        if (spec.variable_size)
            throw ConfigError(spec.name + ": layer " + std::to_string(spec.layers.size() - 1) +
                              " (classifier): variable-size network needs a gail layer before the classifier");
        if (!spec.input_size) throw ConfigError(spec.name + ": fixed-size network without gail needs input_size");
    }
    return p;
}

std::size_t classifier_features(const NetworkSpec& spec, const Plan& p) {
    const std::size_t ch = p.in_channels.back();
    bool has_global = false;
    for (const auto& l : spec.layers) has_global = has_global || l.kind == LayerKind::Gail;
    if (has_global) return ch;
    auto [h, w] = *spec.input_size;
    if (spec.dims == 1) w = 1;
    for (const auto& l : spec.layers) {
        h = stride_1d_aware(spec, h, l, false);
        w = stride_1d_aware(spec, w, l, true);
    }
    return h * w * ch;
}

std::size_t get_size(const json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + "." + key + ": expected a nonnegative integer");
    return v.get<std::size_t>();
}

}  // namespace

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Conv1d: return "conv1d";
        case LayerKind::Lail: return "lail";
        case LayerKind::Gail: return "gail";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::StridedConv: return "strided_conv";
        case LayerKind::DenseBlock: return "dense_block";
        case LayerKind::BatchNorm: return "batch_norm";
        case LayerKind::Classifier: return "classifier";
    }
    return "unknown";
}

LayerKind parse_layer_kind(const std::string& s) {
    for (LayerKind k : {LayerKind::Conv2d, LayerKind::Conv1d, LayerKind::Lail, LayerKind::Gail, LayerKind::MaxPool,
                        LayerKind::StridedConv, LayerKind::DenseBlock, LayerKind::BatchNorm, LayerKind::Classifier})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown layer kind '" + s + "'");
}

void NetworkSpec::validate() const { (void)plan(*this); }

std::size_t NetworkSpec::min_input_extent() const {
    std::size_t m = 1;
    for (const auto& l : layers) m *= layer_stride(l);
    return m;
}

json to_json(const NetworkSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers) {
        json j{{"kind", to_string(l.kind)}};
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::Conv1d:
            case LayerKind::StridedConv:
                j["kernel"] = l.kernel;
                j["stride"] = l.stride;
                j["out_channels"] = l.out_channels;
                j["relu"] = l.relu;
                break;
            case LayerKind::Lail:
            case LayerKind::MaxPool:
                j["kernel"] = l.kernel;
                j["stride"] = l.stride;
                j["out_channels"] = l.out_channels;
                break;
            case LayerKind::Gail: j["out_channels"] = l.out_channels; break;
            case LayerKind::DenseBlock:
                j["repetitions"] = l.dense.repetitions;
                j["growth"] = l.dense.growth;
                j["bottleneck"] = l.dense.bottleneck;
                break;
            case LayerKind::BatchNorm: break;
            case LayerKind::Classifier: j["num_classes"] = l.num_classes ? l.num_classes : spec.num_classes; break;
        }
        layers.push_back(std::move(j));
    }
    json out{{"name", spec.name},
             {"dims", spec.dims},
             {"input_channels", spec.input_channels},
             {"variable_size", spec.variable_size},
             {"num_classes", spec.num_classes},
             {"grad_mode", to_string(spec.grad_mode)},
             {"epsilon", spec.epsilon},
             {"layers", std::move(layers)}};
    if (spec.input_size) out["input_size"] = {spec.input_size->first, spec.input_size->second};
    return out;
}

NetworkSpec network_spec_from_json(const json& j) {
    const std::string where = "network";
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    if (j.contains("preset")) {
        if (!j.at("preset").is_string()) throw ConfigError(where + ".preset: expected a string");
        const auto transition = presets::parse_transition(j.value("transition", std::string("lail")));
        NetworkSpec spec = presets::by_name(j.at("preset").get<std::string>(), get_size(j, "num_classes", 10, where),
                                            transition);
        if (j.contains("grad_mode")) spec.grad_mode = parse_grad_mode(j.at("grad_mode").get<std::string>());
        if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
        spec.validate();
        return spec;
    }
    NetworkSpec spec;
    spec.name = j.value("name", std::string("network"));
    spec.dims = get_size(j, "dims", 2, where);
    spec.input_channels = get_size(j, "input_channels", 3, where);
    spec.variable_size = j.value("variable_size", true);
    spec.num_classes = get_size(j, "num_classes", 10, where);
    if (j.contains("grad_mode")) spec.grad_mode = parse_grad_mode(j.at("grad_mode").get<std::string>());
    spec.epsilon = j.value("epsilon", 1e-8);
    if (j.contains("input_size")) {
        const json& s = j.at("input_size");
        if (!s.is_array() || s.size() != 2) throw ConfigError(where + ".input_size: expected [h, w]");
        spec.input_size = std::make_pair(s[0].get<std::size_t>(), s[1].get<std::size_t>());
    }
    if (!j.contains("layers") || !j.at("layers").is_array()) throw ConfigError(where + ".layers: expected an array");
    const json& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const json& lj = layers[i];
        const std::string lw = where + ".layers[" + std::to_string(i) + "]";
        if (!lj.contains("kind") || !lj.at("kind").is_string()) throw ConfigError(lw + ".kind: expected a string");
        LayerSpec l;
        try {
            l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(lw + ".kind: " + e.what());
        }
        const bool transition = l.kind == LayerKind::Lail || l.kind == LayerKind::MaxPool ||
                                l.kind == LayerKind::StridedConv;
        const std::size_t default_kernel =
            l.kind == LayerKind::MaxPool ? 2 : (l.kind == LayerKind::StridedConv ? 1 : 3);
        l.kernel = get_size(lj, "kernel", default_kernel, lw);
        l.stride = get_size(lj, "stride", transition ? 2 : 1, lw);
        l.out_channels = get_size(lj, "out_channels", 0, lw);
        l.relu = lj.value("relu", true);
        l.dense.repetitions = get_size(lj, "repetitions", 0, lw);
        l.dense.growth = get_size(lj, "growth", 12, lw);
        l.dense.bottleneck = lj.value("bottleneck", true);
        l.num_classes = get_size(lj, "num_classes", 0, lw);
        if (lj.contains("in_channels")) {
            // Optional cross-check of the inferred channel chain.
            NetworkSpec partial = spec;
            partial.layers.push_back(l);
            LayerSpec head;
            head.kind = LayerKind::Classifier;
            partial.layers.push_back(head);
            partial.variable_size = false;
            partial.input_size = std::make_pair(std::size_t{64}, std::size_t{64});
            const Plan p = plan(partial);
            const std::size_t declared = get_size(lj, "in_channels", 0, lw);
            if (declared != p.in_channels[i])
                throw ConfigError(spec.name + ": layer " + std::to_string(i) + " (" + to_string(l.kind) +
                                  "): declares in_channels " + std::to_string(declared) + " but receives " +
                                  std::to_string(p.in_channels[i]));
        }
        spec.layers.push_back(l);
    }
    spec.validate();
    return spec;
}

namespace presets {

Transition parse_transition(const std::string& s) {
    if (s == "lail" || s == "ail") return Transition::Lail;
    if (s == "maxpool") return Transition::MaxPool;
    if (s == "strided_conv" || s == "strided-conv") return Transition::StridedConv;
    throw ConfigError("unknown transition '" + s + "' (expected lail, maxpool or strided_conv)");
}

namespace {

LayerSpec conv(LayerKind kind, std::size_t k, std::size_t s, std::size_t c) {
    LayerSpec l;
    l.kind = kind;
    l.kernel = k;
    l.stride = s;
    l.out_channels = c;
    return l;
}

LayerSpec transition(Transition t, std::size_t c) {
    switch (t) {
        case Transition::Lail: return conv(LayerKind::Lail, 3, 2, c);
        case Transition::MaxPool: return conv(LayerKind::MaxPool, 2, 2, c);
        case Transition::StridedConv: return conv(LayerKind::StridedConv, 1, 2, c);
    }
    return {};
}

LayerSpec dense(std::size_t r, std::size_t g) {
    LayerSpec l;
    l.kind = LayerKind::DenseBlock;
    l.dense = {r, g, true};
    return l;
}

LayerSpec gail(std::size_t c) {
    LayerSpec l;
    l.kind = LayerKind::Gail;
    l.out_channels = c;
    return l;
}

LayerSpec classifier(std::size_t k) {
    LayerSpec l;
    l.kind = LayerKind::Classifier;
    l.num_classes = k;
    return l;
}

NetworkSpec densenet_style(std::string name, std::size_t classes, std::initializer_list<std::size_t> blocks) {
    NetworkSpec s;
    s.name = std::move(name);
    s.num_classes = classes;
    s.layers.push_back(conv(LayerKind::Conv2d, 7, 2, 64));
    std::size_t ch = 64;
    std::size_t width = 64;
    for (std::size_t r : blocks) {
        s.layers.push_back(conv(LayerKind::Lail, 3, 2, width));
        s.layers.push_back(dense(r, 32));
        ch = width + r * 32;
        width = ch / 2;
    }
    s.layers.push_back(gail(512));
    s.layers.push_back(classifier(classes));
    s.validate();
    return s;
}

}  // namespace

NetworkSpec ain121(std::size_t num_classes) { return densenet_style("ain-121", num_classes, {6, 12, 24, 16}); }
NetworkSpec ain169(std::size_t num_classes) { return densenet_style("ain-169", num_classes, {6, 12, 32, 32}); }

NetworkSpec ain_tiny(std::size_t num_classes, Transition t) {
    NetworkSpec s;
    s.name = "ain-tiny";
    s.num_classes = num_classes;
    s.layers = {conv(LayerKind::Conv2d, 3, 1, 16), transition(t, 16), dense(4, 12), transition(t, 32),
                dense(4, 12), gail(64), classifier(num_classes)};
    s.validate();
    return s;
}

NetworkSpec ain_small(std::size_t num_classes, Transition t) {
    NetworkSpec s;
    s.name = "ain-small";
    s.num_classes = num_classes;
    s.layers = {conv(LayerKind::Conv2d, 3, 1, 16), transition(t, 16), dense(4, 12), transition(t, 32), dense(4, 12),
                transition(t, 40), dense(4, 12), gail(64), classifier(num_classes)};
    s.validate();
    return s;
}

NetworkSpec speech(std::size_t num_classes, std::size_t filters, std::size_t features) {
    NetworkSpec s;
    s.name = "ain-speech";
    s.dims = 1;
    s.input_channels = features;
    s.num_classes = num_classes;
    s.layers = {conv(LayerKind::Conv1d, 15, 2, filters), conv(LayerKind::Lail, 3, 2, filters),
                conv(LayerKind::Conv1d, 5, 1, 2 * filters), gail(2 * filters), classifier(num_classes)};
    s.validate();
    return s;
}

NetworkSpec by_name(const std::string& name, std::size_t num_classes, Transition t) {
    if (name == "ain-121") return ain121(num_classes);
    if (name == "ain-169") return ain169(num_classes);
    if (name == "ain-tiny") return ain_tiny(num_classes, t);
    if (name == "ain-small") return ain_small(num_classes, t);
    if (name == "ain-speech" || name == "speech") return speech(num_classes);
    throw ConfigError("unknown network preset '" + name + "'");
}

}  // namespace presets

std::size_t count_parameters(const NetworkSpec& spec) {
    const Plan p = plan(spec);
    const std::size_t kw_of = spec.dims == 1 ? 1 : 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::size_t ci = p.in_channels[i], co = p.out_channels[i];
        const std::size_t kw = kw_of ? 1 : l.kernel;
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::Conv1d:
            case LayerKind::StridedConv: total += l.kernel * kw * ci * co + co; break;
            case LayerKind::Lail:
            case LayerKind::Gail: total += (ci * co + co) + (3 * (kw_of ? 1 : 3) * ci * co + co); break;
            case LayerKind::MaxPool: total += ci == co ? 0 : ci * co + co; break;
            case LayerKind::BatchNorm: total += 2 * ci; break;
            case LayerKind::DenseBlock: {
                const std::size_t g = l.dense.growth, k3 = 3 * (kw_of ? 1 : 3);
                for (std::size_t r = 0; r < l.dense.repetitions; ++r) {
                    const std::size_t ch = ci + r * g;
                    if (l.dense.bottleneck)
                        total += 2 * ch + (ch * 4 * g + 4 * g) + 2 * 4 * g + (k3 * 4 * g * g + g);
                    else
                        total += 2 * ch + (k3 * ch * g + g);
                }
                break;
            }
            case LayerKind::Classifier: total += classifier_features(spec, p) * spec.num_classes + spec.num_classes; break;
        }
    }
    return total;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
    build(&rng);
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    build(nullptr);
}

template <typename T>
void Network<T>::build(std::mt19937_64* rng) {
    const Plan p = plan(spec_);
    const bool one_d = spec_.dims == 1;
    std::size_t n_conv = 0, n_lail = 0, n_pool = 0, n_dense = 0, n_bn = 0;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const std::size_t ci = p.in_channels[i], co = p.out_channels[i];
        const std::size_t kw = one_d ? 1 : l.kernel;
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::Conv1d:
                layers_.push_back(std::make_unique<ConvLayer<T>>("conv" + std::to_string(++n_conv), l.kind, l.kernel,
                                                                 kw, ci, co, l.stride, l.relu, rng));
                break;
            case LayerKind::StridedConv:
                layers_.push_back(std::make_unique<ConvLayer<T>>("strided" + std::to_string(++n_pool),
                                                                 LayerKind::StridedConv, l.kernel, kw, ci, co, l.stride,
                                                                 l.relu, rng));
                break;
            case LayerKind::Lail: {
                AilConfig c = one_d ? AilConfig::local_1d(ci, co, l.kernel, l.stride)
                                    : AilConfig::local(ci, co, l.kernel, l.kernel, l.stride);
                c.epsilon = spec_.epsilon;
                c.grad_mode = spec_.grad_mode;
                layers_.push_back(std::make_unique<AilLayer<T>>("lail" + std::to_string(++n_lail), c, rng));
                break;
            }
            case LayerKind::Gail: {
                AilConfig c = one_d ? AilConfig::global_1d(ci, co) : AilConfig::global(ci, co);
                c.epsilon = spec_.epsilon;
                c.grad_mode = spec_.grad_mode;
                layers_.push_back(std::make_unique<AilLayer<T>>("gail", c, rng));
                break;
            }
            case LayerKind::MaxPool:
                layers_.push_back(std::make_unique<MaxPoolLayer<T>>("maxpool" + std::to_string(++n_pool), l.kernel,
                                                                    l.stride, ci, co, one_d, rng));
                break;
            case LayerKind::DenseBlock:
                layers_.push_back(
                    std::make_unique<DenseBlockLayer<T>>("dense" + std::to_string(++n_dense), l.dense, ci, one_d, rng));
                break;
            case LayerKind::BatchNorm:
                layers_.push_back(std::make_unique<BatchNormLayer<T>>("bn" + std::to_string(++n_bn), ci));
                break;
            case LayerKind::Classifier:
                layers_.push_back(
                    std::make_unique<ClassifierLayer<T>>("fc", classifier_features(spec_, p), spec_.num_classes, rng));
                break;
        }
    }
}

template <typename T>
Tensor<T> Network<T>::as_nhwc(const Tensor<T>& batch) const {
    if (spec_.dims == 1) {
        if (batch.rank() != 3) throw ConfigError(spec_.name + ": expected (N, L, F) batch, got " + to_string(batch.shape()));
        return batch.reshaped({batch.dim(0), batch.dim(1), 1, batch.dim(2)});
    }
    if (batch.rank() != 4) throw ConfigError(spec_.name + ": expected NHWC batch, got " + to_string(batch.shape()));
    return batch;
}

template <typename T>
Var<T> Network<T>::forward(const Tensor<T>& batch, ForwardContext<T>& ctx) {
    Tensor<T> x = as_nhwc(batch);
    if (x.dim(3) != spec_.input_channels)
        throw ConfigError(spec_.name + ": input has " + std::to_string(x.dim(3)) + " channels, network expects " +
                          std::to_string(spec_.input_channels));
    const std::size_t min_extent = min_input_extent();
    const bool short_h = x.dim(1) < min_extent;
    const bool short_w = spec_.dims == 2 && x.dim(2) < min_extent;
    if (short_h || short_w)
        throw DomainError(spec_.name + ": input extent " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                          " below the network minimum of " + std::to_string(min_extent));
    if (!spec_.variable_size && spec_.input_size &&
        (x.dim(1) != spec_.input_size->first || (spec_.dims == 2 && x.dim(2) != spec_.input_size->second)))
        throw DomainError(spec_.name + ": fixed-size network expects " + std::to_string(spec_.input_size->first) +
                          "x" + std::to_string(spec_.input_size->second) + " inputs");
    Var<T> h = Var<T>::constant(std::move(x));
    for (auto& layer : layers_) {
        h = layer->forward(h, ctx);
        if (ctx.shapes) ctx.shapes->push_back(h.shape());
    }
    return h;
}

template <typename T>
Var<T> Network<T>::forward(const Tensor<T>& batch, bool training) {
    ForwardContext<T> ctx;
    ctx.training = training;
    return forward(batch, ctx);
}

template <typename T>
Tensor<T> Network<T>::predict_batch(const Tensor<T>& batch) {
    return kernels::softmax_rows(forward(batch, false).value());
}

template <typename T>
Tensor<T> Network<T>::predict(const Tensor<T>& sample) {
    Shape s{1};
    s.insert(s.end(), sample.shape().begin(), sample.shape().end());
    Tensor<T> p = predict_batch(sample.reshaped(std::move(s)));
    return p.reshaped({p.dim(1)});
}

template <typename T>
std::vector<Parameter<T>> Network<T>::parameters() const {
    std::vector<Parameter<T>> out;
    for (const auto& l : layers_)
        for (auto& p : l->parameters()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::buffers() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (auto& l : layers_)
        for (auto& b : l->buffers()) out.push_back(b);
    return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

template class Network<float>;
template class Network<double>;
template class Network<long double>;

}  // namespace ain
