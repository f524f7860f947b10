#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ain/ail.hpp"
#include "ain/autodiff.hpp"
#include "ain/ops.hpp"

namespace ain {

enum class LayerKind { Conv2d, Conv1d, Lail, Gail, MaxPool, StridedConv, DenseBlock, BatchNorm, Classifier };

std::string to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);

struct DenseBlockSpec {
    std::size_t repetitions = 0;
    std::size_t growth = 12;
    bool bottleneck = true;  // 1x1 conv to 4*growth ahead of each 3x3

    std::size_t out_channels(std::size_t in) const { return in + repetitions * growth; }
};

/// One row of a network plan. Only the fields meaningful for `kind` are read:
///   Conv2d/Conv1d  kernel, stride, out_channels, relu
///   Lail           kernel, stride, out_channels
///   Gail           out_channels
///   MaxPool        kernel (window), stride, out_channels (adds a 1x1 conv + relu when it differs)
///   StridedConv    kernel, stride, out_channels (conv + relu)
///   DenseBlock     dense
///   BatchNorm      -
///   Classifier     num_classes
struct LayerSpec {
    LayerKind kind = LayerKind::Conv2d;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t out_channels = 0;  // 0 keeps the input width
    bool relu = true;
    DenseBlockSpec dense;
    std::size_t num_classes = 0;
};

struct NetworkSpec {
    std::string name = "network";
    std::size_t dims = 2;  // 2 for images (H,W,C), 1 for sequences (L,F)
    std::size_t input_channels = 3;
    /// Set when inputs of differing spatial extents must be accepted; requires
    /// exactly one Gail ahead of the classifier.
    bool variable_size = true;
    /// Fixed input extents for specs without a Gail head.
    std::optional<std::pair<std::size_t, std::size_t>> input_size;
    std::size_t num_classes = 10;
    GradMode grad_mode = GradMode::Analytic;
    double epsilon = 1e-8;
    std::vector<LayerSpec> layers;

    /// Throws ConfigError naming the offending layer index.
    void validate() const;
    /// Product of all spatial strides.
    std::size_t min_input_extent() const;
};

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

namespace presets {

enum class Transition { Lail, MaxPool, StridedConv };
Transition parse_transition(const std::string& s);

/// Stem 7x7/s2, four LAIL transitions around dense blocks (6,12,24,16), GAIL(512), FC.
NetworkSpec ain121(std::size_t num_classes = 128);
/// As ain121 with dense blocks (6,12,32,32).
NetworkSpec ain169(std::size_t num_classes = 128);
/// Conv3x3(16) -> T/s2 -> Dense(4,12) -> T/s2 -> Dense(4,12) -> GAIL(64) -> FC.
NetworkSpec ain_tiny(std::size_t num_classes = 10, Transition t = Transition::Lail);
/// Three transitions.
NetworkSpec ain_small(std::size_t num_classes = 10, Transition t = Transition::Lail);
/// Conv1d k15/s2 -> LAIL1d/s2 -> Conv1d k5 -> GAIL1d -> FC over L x features inputs.
NetworkSpec speech(std::size_t num_classes = 30, std::size_t filters = 64, std::size_t features = 40);

NetworkSpec by_name(const std::string& name, std::size_t num_classes, Transition t = Transition::Lail);

}  // namespace presets

/// Mutable per-pass context.
template <typename T>
struct ForwardContext {
    bool training = false;
    std::vector<AttentionCapture<T>>* attention = nullptr;
    std::vector<Shape>* shapes = nullptr;  // output shape of every layer
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Var<T> forward(const Var<T>& x, ForwardContext<T>& ctx) = 0;
    virtual std::vector<Parameter<T>> parameters() const { return {}; }
    /// Non-learned state persisted in checkpoints (batch-norm running stats).
    virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }
    virtual std::string name() const = 0;
    virtual LayerKind kind() const = 0;
};

/// Built network: a parameterized forward function on the graph.
template <typename T>
class Network {
public:
    /// Builds with fan-in scaled initialization drawn from `rng`.
    Network(NetworkSpec spec, std::mt19937_64& rng);
    /// Builds with every parameter zero.
    explicit Network(NetworkSpec spec);

    /// Logits (N, K). Accepts NHWC (2-D) or (N, L, F) (1-D) batches.
    Var<T> forward(const Tensor<T>& batch, ForwardContext<T>& ctx);
    Var<T> forward(const Tensor<T>& batch, bool training = false);

    /// Class distribution for one unbatched sample (H,W,C) or (L,F).
    Tensor<T> predict(const Tensor<T>& sample);
    /// Class distributions (N, K) for a batch.
    Tensor<T> predict_batch(const Tensor<T>& batch);

    const NetworkSpec& spec() const { return spec_; }
    std::vector<Parameter<T>> parameters() const;
    std::vector<std::pair<std::string, Tensor<T>*>> buffers();
    std::size_t parameter_count() const;
    const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }
    std::size_t min_input_extent() const { return spec_.min_input_extent(); }

private:
    void build(std::mt19937_64* rng);
    Tensor<T> as_nhwc(const Tensor<T>& batch) const;

    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Analytic parameter count of a spec, computed without building it.
std::size_t count_parameters(const NetworkSpec& spec);

}  // namespace ain
