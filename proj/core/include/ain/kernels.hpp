#pragma once

#include <cstddef>
#include <vector>

#include "ain/tensor.hpp"

namespace ain {

/// Spatial geometry of a 2-D convolution or pooling window.
struct ConvGeometry {
    std::size_t kh = 1;
    std::size_t kw = 1;
    std::size_t stride = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;
};

/// floor((in + 2*pad - k) / stride) + 1. With odd k and pad = k/2 this is ceil(in/stride).
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

/// Convolution weights (kh, kw, c_in, c_out) plus bias (c_out). A 1-D kernel of
/// length k is stored as (k, 1, c_in, c_out) and applied along the height axis.
template <typename T>
struct ConvKernel {
    Tensor<T> weights;
    Tensor<T> bias;
    std::size_t stride = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;

    /// Zero-initialized kernel with "same-with-stride" padding floor(k/2).
    static ConvKernel same(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
                           std::size_t stride = 1);
    static ConvKernel same_1d(std::size_t k, std::size_t c_in, std::size_t c_out, std::size_t stride = 1);

    std::size_t kh() const { return weights.dim(0); }
    std::size_t kw() const { return weights.dim(1); }
    std::size_t c_in() const { return weights.dim(2); }
    std::size_t c_out() const { return weights.dim(3); }
    ConvGeometry geometry() const { return {kh(), kw(), stride, pad_h, pad_w}; }
    void validate() const;
};

namespace kernels {

// Batched NHWC primitives. These are the forward/backward building blocks the
// autodiff ops wrap; none of them allocate graph state.

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, const ConvGeometry& g);

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out, const ConvGeometry& g,
                             bool need_input_grad = true);

template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::size_t> argmax;  // flat input offset per output element
};

/// Max pooling in ceil mode: output extent ceil((H + 2p - k) / s) + 1, windows
/// clipped to the input. Ties resolve to the first row-major index.
template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t k, std::size_t stride, std::size_t pad);

std::size_t pool_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax, const Shape& input_shape);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// x (N, c) times w (c, K) plus b (K).
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Row-wise softmax over the last axis of a (N, K) tensor.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace kernels

// Unbatched convenience entry points. Rank-3 (H, W, c) images and rank-2 (L, c)
// sequences are accepted; batched inputs pass through unchanged.

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvKernel<T>& kernel);

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const ConvKernel<T>& kernel);

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    return kernels::relu(input);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
    return kernels::sigmoid(input);
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t pad = 0);

/// softmax(input . weights + bias) for a single feature vector (c) -> (K).
template <typename T>
Tensor<T> linear_softmax(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

/// Worker threads used by the GEMM backend (no-op without OpenMP).
void set_num_threads(int n);
int num_threads();

}  // namespace ain
