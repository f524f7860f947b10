#include "ain/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace ain {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Upper bound on im2col buffer elements; larger batches are processed in chunks.
constexpr std::size_t kColBudget = std::size_t{1} << 24;

struct ConvDims {
    std::size_t n, h, w, c, ho, wo, co;
    ConvGeometry g;

    std::size_t patch() const { return g.kh * g.kw * c; }
    std::size_t rows_per_sample() const { return ho * wo; }
    bool pointwise() const { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0; }
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g) {
    if (x.rank() != 4) throw ConfigError("conv2d expects NHWC input, got shape " + to_string(x.shape()));
    if (w.rank() != 4) throw ConfigError("conv2d expects (kh,kw,c_in,c_out) weights, got " + to_string(w.shape()));
    if (w.dim(0) != g.kh || w.dim(1) != g.kw) throw ConfigError("conv2d weight extents disagree with geometry");
    if (g.stride == 0) throw ConfigError("conv2d stride must be >= 1");
    if (x.dim(3) != w.dim(2))
        throw ConfigError("conv2d channel mismatch: input has " + std::to_string(x.dim(3)) + ", kernel expects " +
                          std::to_string(w.dim(2)));
    ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), 0, 0, w.dim(3), g};
    d.ho = conv_out_extent(d.h, g.kh, g.stride, g.pad_h);
    d.wo = conv_out_extent(d.w, g.kw, g.stride, g.pad_w);
    return d;
}

std::size_t samples_per_chunk(const ConvDims& d) {
    const std::size_t per = std::max<std::size_t>(1, d.rows_per_sample() * d.patch());
    return std::clamp<std::size_t>(kColBudget / per, 1, d.n);
}

// Fills rows [n0, n1) of the im2col matrix: one row per output pixel, columns
// ordered (ki, kj, channel) to match the weight layout.
template <typename T>
void im2col(const T* x, const ConvDims& d, std::size_t n0, std::size_t n1, T* col) {
    const auto& g = d.g;
    const std::size_t patch = d.patch();
    for (std::size_t n = n0; n < n1; ++n) {
        const T* xs = x + n * d.h * d.w * d.c;
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
                T* row = col + (((n - n0) * d.ho + oh) * d.wo + ow) * patch;
                for (std::size_t ki = 0; ki < g.kh; ++ki) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
                    for (std::size_t kj = 0; kj < g.kw; ++kj) {
                        const auto iw =
                            static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad_w);
                        T* dst = row + (ki * g.kw + kj) * d.c;
                        if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(d.h) ||
                            iw >= static_cast<std::ptrdiff_t>(d.w)) {
                            std::fill(dst, dst + d.c, T{0});
                        } else {
                            std::memcpy(dst, xs + (static_cast<std::size_t>(ih) * d.w + static_cast<std::size_t>(iw)) * d.c,
                                        d.c * sizeof(T));
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, std::size_t n0, std::size_t n1, T* gx) {
    const auto& g = d.g;
    const std::size_t patch = d.patch();
    for (std::size_t n = n0; n < n1; ++n) {
        T* gs = gx + n * d.h * d.w * d.c;
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
                const T* row = col + (((n - n0) * d.ho + oh) * d.wo + ow) * patch;
                for (std::size_t ki = 0; ki < g.kh; ++ki) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kj = 0; kj < g.kw; ++kj) {
                        const auto iw =
                            static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad_w);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        const T* src = row + (ki * g.kw + kj) * d.c;
                        T* dst = gs + (static_cast<std::size_t>(ih) * d.w + static_cast<std::size_t>(iw)) * d.c;
                        for (std::size_t c = 0; c < d.c; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }
}

Shape batched(const Shape& s, std::size_t expected_rank) {
    Shape out{1};
    out.insert(out.end(), s.begin(), s.end());
    if (out.size() != expected_rank) throw ConfigError("unexpected input rank " + to_string(s));
    return out;
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    if (in == 0) throw DomainError("zero-sized spatial input");
    if (stride == 0) throw ConfigError("stride must be >= 1");
    if (in + 2 * pad < k)
        throw DomainError("kernel extent " + std::to_string(k) + " exceeds padded input extent " +
                          std::to_string(in + 2 * pad));
    return (in + 2 * pad - k) / stride + 1;
}

std::size_t kernels::pool_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    if (in == 0) throw DomainError("zero-sized spatial input");
    if (k == 0 || stride == 0) throw ConfigError("pool window and stride must be >= 1");
    if (in + 2 * pad < k)
        throw DomainError("pool window " + std::to_string(k) + " larger than padded input extent " +
                          std::to_string(in + 2 * pad));
    std::size_t out = (in + 2 * pad - k + stride - 1) / stride + 1;
    // The last window must start inside the input or the leading pad.
    if ((out - 1) * stride >= in + pad) --out;
    return out;
}

template <typename T>
ConvKernel<T> ConvKernel<T>::same(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
                                  std::size_t stride) {
    ConvKernel k;
    k.weights = Tensor<T>({kh, kw, c_in, c_out});
    k.bias = Tensor<T>({c_out});
    k.stride = stride;
    k.pad_h = kh / 2;
    k.pad_w = kw / 2;
    k.validate();
    return k;
}

template <typename T>
ConvKernel<T> ConvKernel<T>::same_1d(std::size_t k, std::size_t c_in, std::size_t c_out, std::size_t stride) {
    return same(k, 1, c_in, c_out, stride);
}

template <typename T>
void ConvKernel<T>::validate() const {
    if (weights.rank() != 4) throw ConfigError("conv kernel weights must be rank 4 (kh,kw,c_in,c_out)");
    if (bias.rank() != 1 || bias.dim(0) != c_out())
        throw ConfigError("conv bias must have shape (" + std::to_string(c_out()) + ")");
    if (stride == 0) throw ConfigError("conv stride must be >= 1");
}

namespace kernels {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, const ConvGeometry& g) {
    const ConvDims d = conv_dims(x, w, g);
    if (bias && (bias->rank() != 1 || bias->dim(0) != d.co)) throw ConfigError("conv2d bias length mismatch");
    Tensor<T> y({d.n, d.ho, d.wo, d.co});
    ConstMatMap<T> wm(w.raw(), d.patch(), d.co);
    if (d.pointwise()) {
        ConstMatMap<T> xm(x.raw(), d.n * d.h * d.w, d.c);
        MatMap<T> ym(y.raw(), d.n * d.ho * d.wo, d.co);
        ym.noalias() = xm * wm;
    } else {
        const std::size_t chunk = samples_per_chunk(d);
        AlignedVector<T> col(chunk * d.rows_per_sample() * d.patch());
        for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
            const std::size_t n1 = std::min(d.n, n0 + chunk);
            const std::size_t rows = (n1 - n0) * d.rows_per_sample();
            im2col(x.raw(), d, n0, n1, col.data());
            ConstMatMap<T> cm(col.data(), rows, d.patch());
            MatMap<T> ym(y.raw() + n0 * d.rows_per_sample() * d.co, rows, d.co);
            ym.noalias() = cm * wm;
        }
    }
    if (bias) {
        MatMap<T> ym(y.raw(), d.n * d.ho * d.wo, d.co);
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias->raw(), d.co);
        ym.rowwise() += bv;
    }
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out, const ConvGeometry& g,
                             bool need_input_grad) {
    const ConvDims d = conv_dims(x, w, g);
    if (grad_out.shape() != Shape{d.n, d.ho, d.wo, d.co}) throw ContractError("conv2d grad_out shape mismatch");
    ConvGrads<T> out{need_input_grad ? Tensor<T>(x.shape()) : Tensor<T>(), Tensor<T>(w.shape()), Tensor<T>({d.co})};
    ConstMatMap<T> wm(w.raw(), d.patch(), d.co);
    MatMap<T> gw(out.weights.raw(), d.patch(), d.co);
    ConstMatMap<T> gy_all(grad_out.raw(), d.n * d.ho * d.wo, d.co);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(out.bias.raw(), d.co) = gy_all.colwise().sum();

    if (d.pointwise()) {
        ConstMatMap<T> xm(x.raw(), d.n * d.h * d.w, d.c);
        gw.noalias() = xm.transpose() * gy_all;
        if (need_input_grad) {
            MatMap<T> gx(out.input.raw(), d.n * d.h * d.w, d.c);
            gx.noalias() = gy_all * wm.transpose();
        }
        return out;
    }

    const std::size_t chunk = samples_per_chunk(d);
    AlignedVector<T> col(chunk * d.rows_per_sample() * d.patch());
    for (std::size_t n0 = 0; n0 < d.n; n0 += chunk) {
        const std::size_t n1 = std::min(d.n, n0 + chunk);
        const std::size_t rows = (n1 - n0) * d.rows_per_sample();
        ConstMatMap<T> gy(grad_out.raw() + n0 * d.rows_per_sample() * d.co, rows, d.co);
        im2col(x.raw(), d, n0, n1, col.data());
        {
            ConstMatMap<T> cm(col.data(), rows, d.patch());
            gw.noalias() += cm.transpose() * gy;
        }
        if (need_input_grad) {
            MatMap<T> gcol(col.data(), rows, d.patch());
            gcol.noalias() = gy * wm.transpose();
            col2im_add(col.data(), d, n0, n1, out.input.raw());
        }
    }
    return out;
}

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t k, std::size_t stride, std::size_t pad) {
    if (x.rank() != 4) throw ConfigError("maxpool2d expects NHWC input");
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    // A width-1 map (1-D sequence) pools along height only.
    const std::size_t kw = w == 1 ? 1 : k;
    const std::size_t pw = w == 1 ? 0 : pad;
    const std::size_t ho = pool_out_extent(h, k, stride, pad);
    const std::size_t wo = pool_out_extent(w, kw, w == 1 ? 1 : stride, pw);
    PoolResult<T> r{Tensor<T>({n, ho, wo, c}), std::vector<std::size_t>(n * ho * wo * c)};
    const std::size_t sw = w == 1 ? 1 : stride;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oh = 0; oh < ho; ++oh)
            for (std::size_t ow = 0; ow < wo; ++ow) {
                const auto h0 = static_cast<std::ptrdiff_t>(oh * stride) - static_cast<std::ptrdiff_t>(pad);
                const auto w0 = static_cast<std::ptrdiff_t>(ow * sw) - static_cast<std::ptrdiff_t>(pw);
                const std::size_t hs = static_cast<std::size_t>(std::max<std::ptrdiff_t>(h0, 0));
                const std::size_t ws = static_cast<std::size_t>(std::max<std::ptrdiff_t>(w0, 0));
                const std::size_t he = static_cast<std::size_t>(std::min<std::ptrdiff_t>(h0 + k, h));
                const std::size_t we = static_cast<std::size_t>(std::min<std::ptrdiff_t>(w0 + kw, w));
                const std::size_t obase = ((b * ho + oh) * wo + ow) * c;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t arg = 0;
                    for (std::size_t i = hs; i < he; ++i)
                        for (std::size_t j = ws; j < we; ++j) {
                            const std::size_t off = ((b * h + i) * w + j) * c + ch;
                            if (x[off] > best) {
                                best = x[off];
                                arg = off;
                            }
                        }
                    r.output[obase + ch] = best;
                    r.argmax[obase + ch] = arg;
                }
            }
    return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                             const Shape& input_shape) {
    Tensor<T> gx(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
    return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (T& v : y.data()) v = v > T{0} ? v : T{0};
    return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (T& v : y.data()) {
        if (v >= T{0}) {
            v = T{1} / (T{1} + std::exp(-v));
        } else {
            const T e = std::exp(v);
            v = e / (T{1} + e);
        }
    }
    return y;
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
        throw ConfigError("linear expects x (N,c), w (c,K), b (K)");
    if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
        throw ConfigError("linear dimension mismatch: x " + to_string(x.shape()) + ", w " + to_string(w.shape()) +
                          ", b " + to_string(b.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), k = w.dim(1);
    Tensor<T> y({n, k});
    MatMap<T> ym(y.raw(), n, k);
    ym.noalias() = ConstMatMap<T>(x.raw(), n, c) * ConstMatMap<T>(w.raw(), c, k);
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.raw(), k);
    return y;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ConfigError("softmax_rows expects (N,K)");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor<T> p(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* z = logits.raw() + i * k;
        T* out = p.raw() + i * k;
        const T mx = *std::max_element(z, z + k);
        T total{0};
        for (std::size_t j = 0; j < k; ++j) total += out[j] = std::exp(z[j] - mx);
        for (std::size_t j = 0; j < k; ++j) out[j] /= total;
    }
    return p;
}

}  // namespace kernels

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    kernel.validate();
    const bool single = input.rank() == 3;
    const Tensor<T> x = single ? input.reshaped(batched(input.shape(), 4)) : input;
    Tensor<T> y = kernels::conv2d_forward(x, kernel.weights, &kernel.bias, kernel.geometry());
    if (single) return y.reshaped({y.dim(1), y.dim(2), y.dim(3)});
    return y;
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    kernel.validate();
    if (kernel.kw() != 1 || kernel.pad_w != 0) throw ConfigError("conv1d needs a (k,1,c_in,c_out) kernel");
    const bool single = input.rank() == 2;
    if (!single && input.rank() != 3) throw ConfigError("conv1d expects (L,c) or (N,L,c)");
    const std::size_t n = single ? 1 : input.dim(0);
    const std::size_t l = input.dim(input.rank() - 2), c = input.dim(input.rank() - 1);
    Tensor<T> y = kernels::conv2d_forward(input.reshaped({n, l, 1, c}), kernel.weights, &kernel.bias,
                                          kernel.geometry());
    if (single) return y.reshaped({y.dim(1), y.dim(3)});
    return y.reshaped({n, y.dim(1), y.dim(3)});
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t pad) {
    const bool single = input.rank() == 3;
    const Tensor<T> x = single ? input.reshaped(batched(input.shape(), 4)) : input;
    Tensor<T> y = kernels::maxpool2d_forward(x, window, stride, pad).output;
    if (single) return y.reshaped({y.dim(1), y.dim(2), y.dim(3)});
    return y;
}

template <typename T>
Tensor<T> linear_softmax(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    if (input.rank() != 1) throw ConfigError("linear_softmax expects a feature vector");
    const Tensor<T> logits = kernels::linear_forward(input.reshaped({1, input.dim(0)}), weights, bias);
    return kernels::softmax_rows(logits).reshaped({logits.dim(1)});
}

#define AIN_INSTANTIATE(T)                                                                                     \
    template struct ConvKernel<T>;                                                                             \
    template Tensor<T> kernels::conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,           \
                                               const ConvGeometry&);                                           \
    template kernels::ConvGrads<T> kernels::conv2d_backward(const Tensor<T>&, const Tensor<T>&,                \
                                                            const Tensor<T>&, const ConvGeometry&, bool);      \
    template kernels::PoolResult<T> kernels::maxpool2d_forward(const Tensor<T>&, std::size_t, std::size_t,     \
                                                               std::size_t);                                   \
    template Tensor<T> kernels::maxpool2d_backward(const Tensor<T>&, const std::vector<std::size_t>&,          \
                                                   const Shape&);                                              \
    template Tensor<T> kernels::relu(const Tensor<T>&);                                                        \
    template Tensor<T> kernels::sigmoid(const Tensor<T>&);                                                     \
    template Tensor<T> kernels::linear_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T> kernels::softmax_rows(const Tensor<T>&);                                                \
    template Tensor<T> conv2d(const Tensor<T>&, const ConvKernel<T>&);                                         \
    template Tensor<T> conv1d(const Tensor<T>&, const ConvKernel<T>&);                                         \
    template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                     \
    template Tensor<T> linear_softmax(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);
AIN_INSTANTIATE(float)
AIN_INSTANTIATE(double)
AIN_INSTANTIATE(long double)
#undef AIN_INSTANTIATE

}  // namespace ain
