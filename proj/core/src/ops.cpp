#include "ain/ops.hpp"

#include <cmath>

namespace ain::ops {

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weights, const Var<T>& bias, const ConvGeometry& g) {
    Tensor<T> y = kernels::conv2d_forward(x.value(), weights.value(), bias ? &bias.value() : nullptr, g);
    std::vector<Var<T>> parents{x, weights};
    if (bias) parents.push_back(bias);
    return make_node<T>("conv2d", std::move(y), std::move(parents), [g](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Node<T>& wn = *self.parents[1];
        auto grads = kernels::conv2d_backward(xn.value, wn.value, self.grad, g, xn.requires_grad);
        if (xn.requires_grad) xn.accumulate(grads.input);
        wn.accumulate(grads.weights);
        if (self.parents.size() > 2) self.parents[2]->accumulate(grads.bias);
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return make_node<T>("relu", kernels::relu(x.value()), {x}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Tensor<T> g = self.grad;
        // Subgradient at exactly 0 is 0.
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!(xn.value[i] > T{0})) g[i] = T{0};
        xn.accumulate(g);
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return make_node<T>("sigmoid", kernels::sigmoid(x.value()), {x}, [](Node<T>& self) {
        Tensor<T> g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= self.value[i] * (T{1} - self.value[i]);
        self.parents[0]->accumulate(g);
    });
}

template <typename T>
Var<T> maxpool2d(const Var<T>& x, std::size_t window, std::size_t stride, std::size_t pad) {
    auto r = kernels::maxpool2d_forward(x.value(), window, stride, pad);
    return make_node<T>("maxpool2d", std::move(r.output), {x},
                        [argmax = std::move(r.argmax)](Node<T>& self) {
                            Node<T>& xn = *self.parents[0];
                            xn.accumulate(kernels::maxpool2d_backward(self.grad, argmax, xn.value.shape()));
                        });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                  bool training) {
    const Tensor<T>& xv = x.value();
    if (xv.rank() != 4) throw ConfigError("batch_norm expects NHWC input");
    const std::size_t c = xv.dim(3);
    const std::size_t m = xv.size() / c;
    if (gamma.value().size() != c || beta.value().size() != c) throw ConfigError("batch_norm channel mismatch");
    const bool batch_stats = training && xv.dim(0) > 1;

    Tensor<T> mean({c}), inv_std({c});
    if (batch_stats) {
        Tensor<T> var({c});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < c; ++k) mean[k] += xv[i * c + k];
        for (std::size_t k = 0; k < c; ++k) mean[k] /= static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < c; ++k) {
                const T d = xv[i * c + k] - mean[k];
                var[k] += d * d;
            }
        for (std::size_t k = 0; k < c; ++k) {
            var[k] /= static_cast<T>(m);
            inv_std[k] = T{1} / std::sqrt(var[k] + state.eps);
            const T unbiased = m > 1 ? var[k] * static_cast<T>(m) / static_cast<T>(m - 1) : var[k];
            state.running_mean[k] = (T{1} - state.momentum) * state.running_mean[k] + state.momentum * mean[k];
            state.running_var[k] = (T{1} - state.momentum) * state.running_var[k] + state.momentum * unbiased;
        }
    } else {
        for (std::size_t k = 0; k < c; ++k) {
            mean[k] = state.running_mean[k];
            inv_std[k] = T{1} / std::sqrt(state.running_var[k] + state.eps);
        }
    }

    Tensor<T> xhat(xv.shape()), y(xv.shape());
    const Tensor<T>& gv = gamma.value();
    const Tensor<T>& bv = beta.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t o = i * c + k;
            xhat[o] = (xv[o] - mean[k]) * inv_std[k];
            y[o] = gv[k] * xhat[o] + bv[k];
        }

    return make_node<T>("batch_norm", std::move(y), {x, gamma, beta},
                        [xhat = std::move(xhat), inv_std, batch_stats, c, m](Node<T>& self) {
                            Node<T>& xn = *self.parents[0];
                            Node<T>& gn = *self.parents[1];
                            Node<T>& bn = *self.parents[2];
                            const Tensor<T>& gy = self.grad;
                            Tensor<T> dgamma({c}), dbeta({c});
                            for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t k = 0; k < c; ++k) {
                                    dgamma[k] += gy[i * c + k] * xhat[i * c + k];
                                    dbeta[k] += gy[i * c + k];
                                }
                            gn.accumulate(dgamma);
                            bn.accumulate(dbeta);
                            if (!xn.requires_grad) return;
                            Tensor<T> dx(xn.value.shape());
                            const Tensor<T>& gv = gn.value;
                            if (batch_stats) {
                                const T inv_m = T{1} / static_cast<T>(m);
                                // dbeta = sum(dy), dgamma = sum(dy * xhat); scaled by gamma they give
                                // sum(dxhat) and sum(dxhat * xhat).
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t k = 0; k < c; ++k) {
                                        const std::size_t o = i * c + k;
                                        dx[o] = gv[k] * inv_std[k] * inv_m *
                                                (static_cast<T>(m) * gy[o] - dbeta[k] - xhat[o] * dgamma[k]);
                                    }
                            } else {
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t k = 0; k < c; ++k) dx[i * c + k] = gy[i * c + k] * gv[k] * inv_std[k];
                            }
                            xn.accumulate(dx);
                        });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ConfigError("concat_channels needs at least one input");
    const Shape& s0 = xs.front().shape();
    if (s0.size() != 4) throw ConfigError("concat_channels expects NHWC inputs");
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.size() != 4 || s[0] != s0[0] || s[1] != s0[1] || s[2] != s0[2])
            throw ConfigError("concat_channels spatial mismatch: " + to_string(s0) + " vs " + to_string(s));
        widths.push_back(s[3]);
        total += s[3];
    }
    const std::size_t pixels = s0[0] * s0[1] * s0[2];
    Tensor<T> y({s0[0], s0[1], s0[2], total});
    std::size_t off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const T* src = xs[k].value().raw();
        for (std::size_t p = 0; p < pixels; ++p)
            std::copy(src + p * widths[k], src + (p + 1) * widths[k], y.raw() + p * total + off);
        off += widths[k];
    }
    return make_node<T>("concat_channels", std::move(y), xs, [widths, pixels, total](Node<T>& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            Node<T>& pn = *self.parents[k];
            if (pn.requires_grad) {
                Tensor<T> g(pn.value.shape());
                for (std::size_t p = 0; p < pixels; ++p) {
                    const T* src = self.grad.raw() + p * total + off;
                    std::copy(src, src + widths[k], g.raw() + p * widths[k]);
                }
                pn.accumulate(g);
            }
            off += widths[k];
        }
    });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weights, const Var<T>& bias) {
    Tensor<T> y = kernels::linear_forward(x.value(), weights.value(), bias.value());
    return make_node<T>("linear", std::move(y), {x, weights, bias}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Node<T>& wn = *self.parents[1];
        Node<T>& bn = *self.parents[2];
        const std::size_t n = xn.value.dim(0), c = xn.value.dim(1), k = wn.value.dim(1);
        const Tensor<T>& gy = self.grad;
        Tensor<T> gw({c, k}), gb({k});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < c; ++a) {
                const T xv = xn.value[i * c + a];
                for (std::size_t b = 0; b < k; ++b) gw[a * k + b] += xv * gy[i * k + b];
            }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t b = 0; b < k; ++b) gb[b] += gy[i * k + b];
        wn.accumulate(gw);
        bn.accumulate(gb);
        if (xn.requires_grad) {
            Tensor<T> gx({n, c});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t a = 0; a < c; ++a) {
                    T acc{0};
                    for (std::size_t b = 0; b < k; ++b) acc += gy[i * k + b] * wn.value[a * k + b];
                    gx[i * c + a] = acc;
                }
            xn.accumulate(gx);
        }
    });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    return make_node<T>("reshape", x.value().reshaped(std::move(shape)), {x}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        xn.accumulate(self.grad.reshaped(xn.value.shape()));
    });
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<std::size_t>& labels, Reduction reduction) {
    const Tensor<T>& z = logits.value();
    if (z.rank() != 2) throw ConfigError("softmax_cross_entropy expects (N,K) logits");
    const std::size_t n = z.dim(0), k = z.dim(1);
    if (labels.size() != n) throw ConfigError("label count does not match batch size");
    for (std::size_t l : labels)
        if (l >= k) throw ConfigError("label " + std::to_string(l) + " out of range for " + std::to_string(k) + " classes");
    Tensor<T> p = kernels::softmax_rows(z);
    T loss{0};
    for (std::size_t i = 0; i < n; ++i) {
        // log-sum-exp form avoids log(0) on saturated rows
        const T* row = z.raw() + i * k;
        const T mx = *std::max_element(row, row + k);
        T s{0};
        for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
        loss += mx + std::log(s) - row[labels[i]];
    }
    const T scale = reduction == Reduction::Mean ? T{1} / static_cast<T>(n) : T{1};
    return make_node<T>("softmax_cross_entropy", Tensor<T>::scalar(loss * scale), {logits},
                        [p = std::move(p), labels, scale, k](Node<T>& self) {
                            Tensor<T> g = p;
                            for (std::size_t i = 0; i < labels.size(); ++i) g[i * k + labels[i]] -= T{1};
                            g *= scale * self.grad[0];
                            self.parents[0]->accumulate(g);
                        });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    return make_node<T>("sum", Tensor<T>::scalar(x.value().sum()), {x}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        xn.accumulate(Tensor<T>(xn.value.shape(), self.grad[0]));
    });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
    if (weights.shape() != x.shape()) throw ConfigError("weighted_sum shape mismatch");
    T s{0};
    for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
    return make_node<T>("weighted_sum", Tensor<T>::scalar(s), {x}, [weights](Node<T>& self) {
        Tensor<T> g = weights;
        g *= self.grad[0];
        self.parents[0]->accumulate(g);
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) throw ConfigError("mul shape mismatch");
    Tensor<T> y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
    return make_node<T>("mul", std::move(y), {a, b}, [](Node<T>& self) {
        Node<T>& an = *self.parents[0];
        Node<T>& bn = *self.parents[1];
        if (an.requires_grad) {
            Tensor<T> g = self.grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= bn.value[i];
            an.accumulate(g);
        }
        if (bn.requires_grad) {
            Tensor<T> g = self.grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= an.value[i];
            bn.accumulate(g);
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) throw ConfigError("add shape mismatch");
    Tensor<T> y = a.value();
    y += b.value();
    return make_node<T>("add", std::move(y), {a, b}, [](Node<T>& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

#define AIN_INSTANTIATE(T)                                                                                        \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&);                     \
    template Var<T> relu(const Var<T>&);                                                                          \
    template Var<T> sigmoid(const Var<T>&);                                                                       \
    template Var<T> maxpool2d(const Var<T>&, std::size_t, std::size_t, std::size_t);                              \
    template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormState<T>&, bool);            \
    template Var<T> concat_channels(const std::vector<Var<T>>&);                                                  \
    template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                          \
    template Var<T> reshape(const Var<T>&, Shape);                                                                \
    template Var<T> softmax_cross_entropy(const Var<T>&, const std::vector<std::size_t>&, Reduction);             \
    template Var<T> sum(const Var<T>&);                                                                           \
    template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                                                \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                                            \
    template Var<T> add(const Var<T>&, const Var<T>&);
AIN_INSTANTIATE(float)
AIN_INSTANTIATE(double)
AIN_INSTANTIATE(long double)
#undef AIN_INSTANTIATE

}  // namespace ain::ops
