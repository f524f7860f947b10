#include "ain/ail.hpp"

#include <algorithm>
#include <cmath>

#include "ain/ops.hpp"

namespace ain {
namespace {

struct Span {
    std::size_t begin, end;
};

// Valid (unpadded) rows/cols covered by window `o` along one axis.
Span clip(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent) {
    const auto start = static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(pad);
    const auto stop = start + static_cast<std::ptrdiff_t>(k);
    return {static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0)),
            static_cast<std::size_t>(std::min<std::ptrdiff_t>(stop, static_cast<std::ptrdiff_t>(extent)))};
}

struct MapDims {
    std::size_t n, h, w, c, ho, wo;
    std::size_t m, k;  // window extents
    WindowGeometry g;

    Span rows(std::size_t oh) const { return g.global ? Span{0, h} : clip(oh, m, g.stride, g.pad_h, h); }
    Span cols(std::size_t ow) const { return g.global ? Span{0, w} : clip(ow, k, g.stride, g.pad_w, w); }
    std::size_t site(std::size_t b, std::size_t i, std::size_t j) const { return ((b * h + i) * w + j) * c; }
    std::size_t out(std::size_t b, std::size_t oh, std::size_t ow) const { return ((b * ho + oh) * wo + ow) * c; }
};

template <typename T>
MapDims map_dims(const Tensor<T>& content, const Tensor<T>& attention, const WindowGeometry& g) {
    if (content.rank() != 4) throw ConfigError("AIL expects NHWC maps, got " + to_string(content.shape()));
    if (content.shape() != attention.shape())
        throw ContractError("AIL branch shape mismatch: content " + to_string(content.shape()) + " vs attention " +
                            to_string(attention.shape()));
    MapDims d{content.dim(0), content.dim(1), content.dim(2), content.dim(3), 1, 1, 0, 0, g};
    if (g.global) {
        d.m = d.h;
        d.k = d.w;
    } else {
        d.m = g.m;
        d.k = g.n;
        d.ho = g.out_h(d.h);
        d.wo = g.out_w(d.w);
    }
    return d;
}

// Per output cell and channel: S = sum W, P = sum W*X, Q = sum W^2.
template <typename T>
void window_sums(const T* x, const T* w, const MapDims& d, std::size_t b, std::size_t oh, std::size_t ow, T* s, T* p,
                 T* q) {
    std::fill(s, s + d.c, T{0});
    std::fill(p, p + d.c, T{0});
    if (q) std::fill(q, q + d.c, T{0});
    const Span r = d.rows(oh), cl = d.cols(ow);
    for (std::size_t i = r.begin; i < r.end; ++i)
        for (std::size_t j = cl.begin; j < cl.end; ++j) {
            const std::size_t off = d.site(b, i, j);
            const T* xs = x + off;
            const T* ws = w + off;
            for (std::size_t ch = 0; ch < d.c; ++ch) {
                s[ch] += ws[ch];
                p[ch] += ws[ch] * xs[ch];
            }
            if (q)
                for (std::size_t ch = 0; ch < d.c; ++ch) q[ch] += ws[ch] * ws[ch];
        }
}

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    Tensor<T> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (T& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

}  // namespace

GradMode parse_grad_mode(const std::string& s) {
    if (s == "analytic") return GradMode::Analytic;
    if (s == "squared-norm") return GradMode::SquaredNorm;
    throw ConfigError("unknown grad_mode '" + s + "' (expected analytic or squared-norm)");
}

std::string to_string(GradMode m) { return m == GradMode::Analytic ? "analytic" : "squared-norm"; }

AilConfig AilConfig::local(std::size_t c_in, std::size_t c_out, std::size_t m, std::size_t n, std::size_t stride) {
    AilConfig c;
    c.kind = WindowKind::Local;
    c.m = m;
    c.n = n;
    c.stride = stride;
    c.c_in = c_in;
    c.c_out = c_out;
    c.validate();
    return c;
}

AilConfig AilConfig::global(std::size_t c_in, std::size_t c_out) {
    AilConfig c;
    c.kind = WindowKind::Global;
    c.c_in = c_in;
    c.c_out = c_out;
    c.stride = 1;
    c.validate();
    return c;
}

AilConfig AilConfig::local_1d(std::size_t c_in, std::size_t c_out, std::size_t m, std::size_t stride) {
    AilConfig c = local(c_in, c_out, m, 1, stride);
    c.one_d = true;
    return c;
}

AilConfig AilConfig::global_1d(std::size_t c_in, std::size_t c_out) {
    AilConfig c = global(c_in, c_out);
    c.one_d = true;
    return c;
}

void AilConfig::validate() const {
    if (c_in == 0 || c_out == 0) throw ConfigError("AIL channel counts must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("AIL epsilon must be > 0");
    if (kind == WindowKind::Local) {
        if (m == 0 || n == 0) throw ConfigError("AIL local window extents must be >= 1");
        if (stride == 0) throw ConfigError("AIL stride must be >= 1");
        if (one_d && n != 1) throw ConfigError("1-D AIL requires n = 1");
    }
    if (grad_mode != GradMode::Analytic && grad_mode != GradMode::SquaredNorm)
        throw ConfigError("unknown AIL grad_mode");
}

WindowGeometry WindowGeometry::local(std::size_t m, std::size_t n, std::size_t stride, std::size_t pad_h,
                                     std::size_t pad_w) {
    if (m == 0 || n == 0 || stride == 0) throw ConfigError("window extents and stride must be >= 1");
    return {false, m, n, stride, pad_h, pad_w};
}

WindowGeometry WindowGeometry::whole() { return {true, 1, 1, 1, 0, 0}; }

std::size_t WindowGeometry::out_h(std::size_t h) const { return global ? 1 : conv_out_extent(h, m, stride, pad_h); }
std::size_t WindowGeometry::out_w(std::size_t w) const { return global ? 1 : conv_out_extent(w, n, stride, pad_w); }

template <typename T>
std::vector<Window<T>> window_iter(const Tensor<T>& map, const WindowGeometry& g) {
    if (map.rank() != 3) throw ConfigError("window_iter expects an (M,N,C) map");
    const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
    if (g.global) return {Window<T>{0, 0, map}};
    const std::size_t ho = g.out_h(h), wo = g.out_w(w);
    std::vector<Window<T>> out;
    out.reserve(ho * wo);
    for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow) {
            Window<T> win{oh, ow, Tensor<T>({g.m, g.n, c})};
            for (std::size_t i = 0; i < g.m; ++i) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad_h);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t j = 0; j < g.n; ++j) {
                    const auto iw =
                        static_cast<std::ptrdiff_t>(ow * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad_w);
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        win.values.at(i, j, ch) =
                            map.at(static_cast<std::size_t>(ih), static_cast<std::size_t>(iw), ch);
                }
            }
            out.push_back(std::move(win));
        }
    return out;
}

template <typename T>
Tensor<T> incorporate(const Tensor<T>& content, const Tensor<T>& attention, T epsilon) {
    if (content.rank() != 3 || content.shape() != attention.shape())
        throw ContractError("incorporate expects two (m,n,C) windows of equal shape");
    const std::size_t c = content.dim(2);
    const std::size_t sites = content.size() / c;
    Tensor<T> out({1, 1, c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        T s{0}, p{0};
        for (std::size_t i = 0; i < sites; ++i) {
            s += attention[i * c + ch];
            p += attention[i * c + ch] * content[i * c + ch];
        }
        out[ch] = p / (s + epsilon);
    }
    return out;
}

template <typename T>
Tensor<T> ail_incorporate_forward(const Tensor<T>& content, const Tensor<T>& attention, const WindowGeometry& g,
                                  T epsilon) {
    const MapDims d = map_dims(content, attention, g);
    Tensor<T> out({d.n, d.ho, d.wo, d.c});
    std::vector<T> s(d.c), p(d.c);
    for (std::size_t b = 0; b < d.n; ++b)
        for (std::size_t oh = 0; oh < d.ho; ++oh)
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
                window_sums(content.raw(), attention.raw(), d, b, oh, ow, s.data(), p.data(), static_cast<T*>(nullptr));
                T* o = out.raw() + d.out(b, oh, ow);
                for (std::size_t ch = 0; ch < d.c; ++ch) o[ch] = p[ch] / (s[ch] + epsilon);
            }
    return out;
}

template <typename T>
Tensor<T> ail_backward_content(const Tensor<T>& grad_out, const Tensor<T>& attention, const WindowGeometry& g,
                               T epsilon) {
    const MapDims d = map_dims(attention, attention, g);
    if (grad_out.shape() != Shape{d.n, d.ho, d.wo, d.c}) throw ContractError("AIL grad_out shape mismatch");
    Tensor<T> gx(attention.shape());
    std::vector<T> scale(d.c);
    for (std::size_t b = 0; b < d.n; ++b)
        for (std::size_t oh = 0; oh < d.ho; ++oh)
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
                const Span r = d.rows(oh), cl = d.cols(ow);
                std::fill(scale.begin(), scale.end(), T{0});
                for (std::size_t i = r.begin; i < r.end; ++i)
                    for (std::size_t j = cl.begin; j < cl.end; ++j) {
                        const T* ws = attention.raw() + d.site(b, i, j);
                        for (std::size_t ch = 0; ch < d.c; ++ch) scale[ch] += ws[ch];
                    }
                const T* go = grad_out.raw() + d.out(b, oh, ow);
                for (std::size_t ch = 0; ch < d.c; ++ch) scale[ch] = go[ch] / (scale[ch] + epsilon);
                for (std::size_t i = r.begin; i < r.end; ++i)
                    for (std::size_t j = cl.begin; j < cl.end; ++j) {
                        const std::size_t off = d.site(b, i, j);
                        const T* ws = attention.raw() + off;
                        T* dst = gx.raw() + off;
                        for (std::size_t ch = 0; ch < d.c; ++ch) dst[ch] += scale[ch] * ws[ch];
                    }
            }
    return gx;
}

template <typename T>
Tensor<T> ail_backward_attention(const Tensor<T>& grad_out, const Tensor<T>& content, const Tensor<T>& attention,
                                 const WindowGeometry& g, T epsilon, GradMode mode) {
    if (mode != GradMode::Analytic && mode != GradMode::SquaredNorm) throw ConfigError("unknown AIL grad_mode");
    const MapDims d = map_dims(content, attention, g);
    if (grad_out.shape() != Shape{d.n, d.ho, d.wo, d.c}) throw ContractError("AIL grad_out shape mismatch");
    const bool analytic = mode == GradMode::Analytic;
    Tensor<T> gw(attention.shape());
    std::vector<T> s(d.c), p(d.c), q(d.c), a(d.c), bterm(d.c);
    for (std::size_t b = 0; b < d.n; ++b)
        for (std::size_t oh = 0; oh < d.ho; ++oh)
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
                window_sums(content.raw(), attention.raw(), d, b, oh, ow, s.data(), p.data(),
                            analytic ? static_cast<T*>(nullptr) : q.data());
                const T* go = grad_out.raw() + d.out(b, oh, ow);
                // d out / d W_xy = a * X_xy - bterm, with
                //   analytic:      a = 1/(S+eps),      bterm = P/(S+eps)^2
                //   squared-norm:  a = S/(Q+eps),      bterm = P/(Q+eps)
                for (std::size_t ch = 0; ch < d.c; ++ch) {
                    if (analytic) {
                        const T den = s[ch] + epsilon;
                        a[ch] = go[ch] / den;
                        bterm[ch] = go[ch] * p[ch] / (den * den);
                    } else {
                        const T den = q[ch] + epsilon;
                        a[ch] = go[ch] * s[ch] / den;
                        bterm[ch] = go[ch] * p[ch] / den;
                    }
                }
                const Span r = d.rows(oh), cl = d.cols(ow);
                for (std::size_t i = r.begin; i < r.end; ++i)
                    for (std::size_t j = cl.begin; j < cl.end; ++j) {
                        const std::size_t off = d.site(b, i, j);
                        const T* xs = content.raw() + off;
                        T* dst = gw.raw() + off;
                        for (std::size_t ch = 0; ch < d.c; ++ch) dst[ch] += a[ch] * xs[ch] - bterm[ch];
                    }
            }
    return gw;
}

template <typename T>
Var<T> ail_incorporate(const Var<T>& content, const Var<T>& attention, const WindowGeometry& g, T epsilon,
                       GradMode mode) {
    Tensor<T> y = ail_incorporate_forward(content.value(), attention.value(), g, epsilon);
    return make_node<T>("ail_incorporate", std::move(y), {content, attention}, [g, epsilon, mode](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Node<T>& wn = *self.parents[1];
        if (xn.requires_grad) xn.accumulate(ail_backward_content(self.grad, wn.value, g, epsilon));
        if (wn.requires_grad) wn.accumulate(ail_backward_attention(self.grad, xn.value, wn.value, g, epsilon, mode));
    });
}

template <typename T>
AilParams<T> AilParams<T>::zeros(const AilConfig& config, const std::string& prefix) {
    config.validate();
    return {Parameter<T>(prefix + ".content.weights", Tensor<T>({1, 1, config.c_in, config.c_out})),
            Parameter<T>(prefix + ".content.bias", Tensor<T>({config.c_out})),
            Parameter<T>(prefix + ".attention.weights",
                         Tensor<T>({config.attention_kh(), config.attention_kw(), config.c_in, config.c_out})),
            Parameter<T>(prefix + ".attention.bias", Tensor<T>({config.c_out}))};
}

template <typename T>
AilParams<T> AilParams<T>::init(const AilConfig& config, const std::string& prefix, std::mt19937_64& rng) {
    AilParams p = zeros(config, prefix);
    p.content_weights.value() = he_normal<T>(p.content_weights.value().shape(), config.c_in, rng);
    p.attention_weights.value() = he_normal<T>(p.attention_weights.value().shape(),
                                               config.attention_kh() * config.attention_kw() * config.c_in, rng);
    return p;
}

template <typename T>
AilBranches<T> ail_branches(const Var<T>& x_in, const AilConfig& config, const AilParams<T>& params,
                            std::size_t extra_pad_h, std::size_t extra_pad_w) {
    if (x_in.value().rank() != 4) throw ConfigError("AIL expects NHWC input");
    if (x_in.shape()[3] != config.c_in)
        throw ConfigError("AIL channel mismatch: input has " + std::to_string(x_in.shape()[3]) + ", layer expects " +
                          std::to_string(config.c_in));
    const std::size_t ah = config.attention_kh(), aw = config.attention_kw();
    Var<T> content = ops::relu(ops::conv2d(x_in, params.content_weights.var(), params.content_bias.var(),
                                           ConvGeometry{1, 1, 1, extra_pad_h, extra_pad_w}));
    Var<T> attention =
        ops::sigmoid(ops::conv2d(x_in, params.attention_weights.var(), params.attention_bias.var(),
                                 ConvGeometry{ah, aw, 1, ah / 2 + extra_pad_h, aw / 2 + extra_pad_w}));
    if (content.shape() != attention.shape())
        throw ContractError("AIL branches disagree: " + to_string(content.shape()) + " vs " +
                            to_string(attention.shape()));
    return {content, attention};
}

template <typename T>
Var<T> ail_forward(const Var<T>& x_in, const AilConfig& config, const AilParams<T>& params,
                   std::vector<AttentionCapture<T>>* capture, const std::string& name) {
    config.validate();
    // Local windows are centred on input sites: x_in is zero-padded by
    // floor(m/2), floor(n/2) ahead of both branches, so border windows hold
    // computed activations and the windowing itself needs no padding.
    const std::size_t ph = config.pad_h(), pw = config.pad_w();
    AilBranches<T> br = ail_branches(x_in, config, params, ph, pw);
    if (capture) capture->push_back({name, br.attention.value(), ph, pw});
    const WindowGeometry g = config.kind == WindowKind::Global
                                 ? WindowGeometry::whole()
                                 : WindowGeometry::local(config.m, config.n, config.stride);
    return ail_incorporate(br.content, br.attention, g, static_cast<T>(config.epsilon), config.grad_mode);
}

#define AIN_INSTANTIATE(T)                                                                                        \
    template std::vector<Window<T>> window_iter(const Tensor<T>&, const WindowGeometry&);                         \
    template Tensor<T> incorporate(const Tensor<T>&, const Tensor<T>&, T);                                        \
    template Tensor<T> ail_incorporate_forward(const Tensor<T>&, const Tensor<T>&, const WindowGeometry&, T);     \
    template Tensor<T> ail_backward_content(const Tensor<T>&, const Tensor<T>&, const WindowGeometry&, T);        \
    template Tensor<T> ail_backward_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                              const WindowGeometry&, T, GradMode);                                \
    template Var<T> ail_incorporate(const Var<T>&, const Var<T>&, const WindowGeometry&, T, GradMode);            \
    template struct AilParams<T>;                                                                                 \
    template AilBranches<T> ail_branches(const Var<T>&, const AilConfig&, const AilParams<T>&, std::size_t,       \
                                         std::size_t);                                                            \
    template Var<T> ail_forward(const Var<T>&, const AilConfig&, const AilParams<T>&,                             \
                                std::vector<AttentionCapture<T>>*, const std::string&);
AIN_INSTANTIATE(float)
AIN_INSTANTIATE(double)
AIN_INSTANTIATE(long double)
#undef AIN_INSTANTIATE

}  // namespace ain
