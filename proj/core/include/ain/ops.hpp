#pragma once

#include <cstddef>
#include <vector>

#include "ain/autodiff.hpp"
#include "ain/kernels.hpp"

namespace ain::ops {

// Differentiable ops over batched NHWC Vars. Each records its backward rule on
// the graph; the primitive arithmetic lives in ain::kernels.

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weights, const Var<T>& bias, const ConvGeometry& g);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

template <typename T>
Var<T> maxpool2d(const Var<T>& x, std::size_t window, std::size_t stride, std::size_t pad = 0);

/// Running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
};

/// Per-channel normalization over (N, H, W). With `training` and N > 1 batch
/// statistics are used and the running averages updated; otherwise the
/// running statistics are applied as constants.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state, bool training);

/// Concatenates NHWC maps along channels.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs);

/// x (N, c) . w (c, K) + b (K).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weights, const Var<T>& bias);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

enum class Reduction { Sum, Mean };

/// Softmax cross-entropy of (N, K) logits against integer labels; scalar.
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<std::size_t>& labels,
                             Reduction reduction = Reduction::Mean);

template <typename T>
Var<T> sum(const Var<T>& x);

/// sum(x * weights) for a constant weight tensor; a scalar probe loss.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

}  // namespace ain::ops
