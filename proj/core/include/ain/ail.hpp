#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ain/autodiff.hpp"
#include "ain/kernels.hpp"

namespace ain {

/// Attention Incorporate Layer.
///
/// Two stride-1 branches run at full input resolution:
///   content    X = relu(conv1x1(x_in))
///   attention  W = sigmoid(conv3x3(x_in))
/// Each window of X and W is then collapsed per channel into the
/// attention-weighted mean
///   out_k = sum_ij(W_ijk * X_ijk) / (sum_ij W_ijk + eps).
/// A Local layer slides an (m, n) window with stride s; a Global layer uses a
/// single window covering the whole map and always emits (1, 1, c_out).

enum class WindowKind { Local, Global };

/// Backward formula for the attention branch.
enum class GradMode {
    /// Exact quotient-rule derivative (X_xy (S + eps) - sum(W X)) / (S + eps)^2.
    Analytic,
    /// sum_ij W_ij (X_xy - X_ij) / (sum_ij W_ij^2 + eps). Not the derivative of
    /// the forward map; kept for comparison experiments.
    SquaredNorm,
};

GradMode parse_grad_mode(const std::string& s);
std::string to_string(GradMode m);

struct AilConfig {
    WindowKind kind = WindowKind::Local;
    std::size_t m = 3;
    std::size_t n = 3;
    std::size_t stride = 2;  // ignored for Global
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    double epsilon = 1e-8;
    GradMode grad_mode = GradMode::Analytic;
    bool one_d = false;  // sequences: n is 1 and the attention kernel is 3x1

    static AilConfig local(std::size_t c_in, std::size_t c_out, std::size_t m = 3, std::size_t n = 3,
                           std::size_t stride = 2);
    static AilConfig global(std::size_t c_in, std::size_t c_out);
    static AilConfig local_1d(std::size_t c_in, std::size_t c_out, std::size_t m = 3, std::size_t stride = 2);
    static AilConfig global_1d(std::size_t c_in, std::size_t c_out);

    void validate() const;
    std::size_t pad_h() const { return kind == WindowKind::Local ? m / 2 : 0; }
    std::size_t pad_w() const { return kind == WindowKind::Local ? n / 2 : 0; }
    std::size_t attention_kh() const { return 3; }
    std::size_t attention_kw() const { return one_d ? 1 : 3; }
    bool operator==(const AilConfig&) const = default;
};

/// Window placement over a map. Padded sites read as zero in both X and W, so
/// they drop out of both sums.
struct WindowGeometry {
    bool global = false;
    std::size_t m = 1, n = 1, stride = 1, pad_h = 0, pad_w = 0;

    static WindowGeometry local(std::size_t m, std::size_t n, std::size_t stride, std::size_t pad_h = 0,
                                std::size_t pad_w = 0);
    static WindowGeometry whole();

    std::size_t out_h(std::size_t h) const;
    std::size_t out_w(std::size_t w) const;
};

template <typename T>
struct Window {
    std::size_t row = 0;
    std::size_t col = 0;
    Tensor<T> values;  // (m, n, C)
};

/// Windows of an unbatched (M, N, C) map in row-major output order.
template <typename T>
std::vector<Window<T>> window_iter(const Tensor<T>& map, const WindowGeometry& geometry);

/// Attention-weighted mean of one window pair; returns (1, 1, C).
template <typename T>
Tensor<T> incorporate(const Tensor<T>& content, const Tensor<T>& attention, T epsilon);

/// Batched forward over NHWC content/attention maps.
template <typename T>
Tensor<T> ail_incorporate_forward(const Tensor<T>& content, const Tensor<T>& attention, const WindowGeometry& g,
                                  T epsilon);

/// d loss / d X given d loss / d out; overlapping windows accumulate.
template <typename T>
Tensor<T> ail_backward_content(const Tensor<T>& grad_out, const Tensor<T>& attention, const WindowGeometry& g,
                               T epsilon);

/// d loss / d W given d loss / d out, using the formula selected by `mode`.
template <typename T>
Tensor<T> ail_backward_attention(const Tensor<T>& grad_out, const Tensor<T>& content, const Tensor<T>& attention,
                                 const WindowGeometry& g, T epsilon, GradMode mode);

/// Differentiable incorporate step on the graph.
template <typename T>
Var<T> ail_incorporate(const Var<T>& content, const Var<T>& attention, const WindowGeometry& g, T epsilon,
                       GradMode mode = GradMode::Analytic);

template <typename T>
struct AilParams {
    Parameter<T> content_weights;    // (1, 1, c_in, c_out)
    Parameter<T> content_bias;       // (c_out)
    Parameter<T> attention_weights;  // (3, 3, c_in, c_out) or (3, 1, c_in, c_out)
    Parameter<T> attention_bias;     // (c_out)

    /// Zero-valued parameters named "<prefix>.content.weights" etc.
    static AilParams zeros(const AilConfig& config, const std::string& prefix);
    /// Fan-in scaled normal weights for both branches, zero biases.
    static AilParams init(const AilConfig& config, const std::string& prefix, std::mt19937_64& rng);

    std::vector<Parameter<T>> list() const {
        return {content_weights, content_bias, attention_weights, attention_bias};
    }
};

template <typename T>
struct AilBranches {
    Var<T> content;
    Var<T> attention;
};

/// Content and attention maps. `extra_pad_*` zero-pads x_in before both
/// convolutions so the maps grow by 2*pad per axis.
template <typename T>
AilBranches<T> ail_branches(const Var<T>& x_in, const AilConfig& config, const AilParams<T>& params,
                            std::size_t extra_pad_h = 0, std::size_t extra_pad_w = 0);

/// Attention map captured during a forward pass, for inspection/export.
template <typename T>
struct AttentionCapture {
    std::string layer;
    Tensor<T> weights;  // (N, H + 2*pad_h, W + 2*pad_w, c_out)
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;
};

/// Full layer: ceil(M/s) x ceil(N/s) x c_out for Local (odd m, n), 1 x 1 x c_out for Global.
template <typename T>
Var<T> ail_forward(const Var<T>& x_in, const AilConfig& config, const AilParams<T>& params,
                   std::vector<AttentionCapture<T>>* capture = nullptr, const std::string& name = "ail");

}  // namespace ain
