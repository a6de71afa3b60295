// Minimal differentiable layer kit: parameters with Adam state, per-frame
// dense layers, 1-D convolutions with replicate padding, pooling/upsampling,
// and ReLU. Templated on the scalar type so the same code runs the float64
// gradient-check path and the float32 training path.

#pragma once

#include <cassert>
#include <string>
#include <vector>

#include "contraseg/common.hpp"
#include "contraseg/rng.hpp"

namespace contraseg::nn {

// ============================================================================
// Parameter tensor with gradient and Adam moments
// ============================================================================
template <class S>
struct Param {
    std::string name;
    int rows = 0, cols = 0;
    std::vector<S> value, grad, m, v;
    int64_t steps = 0;

    void resize(std::string n, int r, int c) {
        name = std::move(n);
        rows = r;
        cols = c;
        const size_t sz = static_cast<size_t>(r) * c;
        value.assign(sz, S(0));
        grad.assign(sz, S(0));
        m.assign(sz, S(0));
        v.assign(sz, S(0));
        steps = 0;
    }

    void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }

    S& at(int r, int c) { return value[static_cast<size_t>(r) * cols + c]; }
    const S& at(int r, int c) const { return value[static_cast<size_t>(r) * cols + c]; }
    S& gat(int r, int c) { return grad[static_cast<size_t>(r) * cols + c]; }
};

template <class S>
void xavier_init(Param<S>& p, int fan_in, int fan_out, Rng& rng) {
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& x : p.value) x = static_cast<S>(rng.uniform(-lim, lim));
}

// Adam with L2 weight decay folded into the gradient.
template <class S>
void adam_step(Param<S>& p, double lr, double weight_decay, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
    p.steps += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.steps));
    for (size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]) + weight_decay * static_cast<double>(p.value[i]);
        const double m = beta1 * static_cast<double>(p.m[i]) + (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(p.v[i]) + (1.0 - beta2) * g * g;
        p.m[i] = static_cast<S>(m);
        p.v[i] = static_cast<S>(v);
        p.value[i] -= static_cast<S>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
    }
}

// ============================================================================
// Dense layer applied independently to each row
// ============================================================================
template <class S>
struct Dense {
    Param<S> w;  // [out x in]
    Param<S> b;  // [out x 1]
    Matrix<S> last_in;

    void init(const std::string& name, int in_dim, int out_dim, Rng& rng) {
        w.resize(name + ".w", out_dim, in_dim);
        b.resize(name + ".b", out_dim, 1);
        xavier_init(w, in_dim, out_dim, rng);
    }

    int in_dim() const { return w.cols; }
    int out_dim() const { return w.rows; }

    Matrix<S> forward(const Matrix<S>& in, bool cache = true) {
        assert(in.cols == w.cols);
        Matrix<S> out(in.rows, w.rows);
        for (int r = 0; r < in.rows; ++r) {
            const S* x = in.row(r);
            S* y = out.row(r);
            for (int o = 0; o < w.rows; ++o) {
                double acc = static_cast<double>(b.value[o]);
                const S* wr = w.value.data() + static_cast<size_t>(o) * w.cols;
                for (int i = 0; i < w.cols; ++i)
                    acc += static_cast<double>(wr[i]) * static_cast<double>(x[i]);
                y[o] = static_cast<S>(acc);
            }
        }
        if (cache) last_in = in;
        return out;
    }

    // Accumulates parameter gradients; returns gradient w.r.t. the input.
    Matrix<S> backward(const Matrix<S>& dout) {
        assert(dout.rows == last_in.rows && dout.cols == w.rows);
        Matrix<S> din(last_in.rows, w.cols, S(0));
        for (int r = 0; r < dout.rows; ++r) {
            const S* x = last_in.row(r);
            const S* dy = dout.row(r);
            S* dx = din.row(r);
            for (int o = 0; o < w.rows; ++o) {
                const S g = dy[o];
                if (g == S(0)) continue;
                b.grad[o] += g;
                S* wg = w.grad.data() + static_cast<size_t>(o) * w.cols;
                const S* wr = w.value.data() + static_cast<size_t>(o) * w.cols;
                for (int i = 0; i < w.cols; ++i) {
                    wg[i] += g * x[i];
                    dx[i] += g * wr[i];
                }
            }
        }
        return din;
    }

    std::vector<Param<S>*> params() { return {&w, &b}; }
};

// ============================================================================
// 1-D convolution over time with replicate padding (per video in the batch)
// ============================================================================
template <class S>
struct Conv1d {
    int ksize = 3;
    Param<S> w;  // [out_c x in_c*ksize]
    Param<S> b;  // [out_c x 1]
    Tensor3<S> last_in;

    void init(const std::string& name, int in_c, int out_c, int k, Rng& rng) {
        ksize = k;
        w.resize(name + ".w", out_c, in_c * k);
        b.resize(name + ".b", out_c, 1);
        xavier_init(w, in_c * k, out_c, rng);
    }

    Tensor3<S> forward(const Tensor3<S>& in, bool cache = true) {
        const int in_c = w.cols / ksize;
        assert(in.c == in_c);
        const int half = ksize / 2;
        Tensor3<S> out(in.n, in.t, w.rows);
        for (int nv = 0; nv < in.n; ++nv) {
            for (int t = 0; t < in.t; ++t) {
                S* y = out.frame(nv, t);
                for (int o = 0; o < w.rows; ++o) {
                    double acc = static_cast<double>(b.value[o]);
                    const S* wr = w.value.data() + static_cast<size_t>(o) * w.cols;
                    for (int dk = 0; dk < ksize; ++dk) {
                        const int src = std::clamp(t + dk - half, 0, in.t - 1);
                        const S* x = in.frame(nv, src);
                        const S* wk = wr + static_cast<size_t>(dk) * in_c;
                        for (int i = 0; i < in_c; ++i)
                            acc += static_cast<double>(wk[i]) * static_cast<double>(x[i]);
                    }
                    y[o] = static_cast<S>(acc);
                }
            }
        }
        if (cache) last_in = in;
        return out;
    }

    Tensor3<S> backward(const Tensor3<S>& dout) {
        const int in_c = w.cols / ksize;
        const int half = ksize / 2;
        Tensor3<S> din(last_in.n, last_in.t, last_in.c, S(0));
        for (int nv = 0; nv < dout.n; ++nv) {
            for (int t = 0; t < dout.t; ++t) {
                const S* dy = dout.frame(nv, t);
                for (int o = 0; o < w.rows; ++o) {
                    const S g = dy[o];
                    if (g == S(0)) continue;
                    b.grad[o] += g;
                    S* wg = w.grad.data() + static_cast<size_t>(o) * w.cols;
                    const S* wr = w.value.data() + static_cast<size_t>(o) * w.cols;
                    for (int dk = 0; dk < ksize; ++dk) {
                        const int src = std::clamp(t + dk - half, 0, last_in.t - 1);
                        const S* x = last_in.frame(nv, src);
                        S* dx = din.frame(nv, src);
                        S* wk_g = wg + static_cast<size_t>(dk) * in_c;
                        const S* wk = wr + static_cast<size_t>(dk) * in_c;
                        for (int i = 0; i < in_c; ++i) {
                            wk_g[i] += g * x[i];
                            dx[i] += g * wk[i];
                        }
                    }
                }
            }
        }
        return din;
    }

    std::vector<Param<S>*> params() { return {&w, &b}; }
};

// ============================================================================
// Shape ops (pure; backward takes the forward input shape)
// ============================================================================

template <class S>
Matrix<S> relu(const Matrix<S>& x) {
    Matrix<S> y = x;
    for (auto& e : y.v) e = e > S(0) ? e : S(0);
    return y;
}

template <class S>
Matrix<S> relu_backward(const Matrix<S>& dout, const Matrix<S>& forward_out) {
    Matrix<S> din = dout;
    for (size_t i = 0; i < din.v.size(); ++i)
        if (forward_out.v[i] <= S(0)) din.v[i] = S(0);
    return din;
}

template <class S>
Tensor3<S> relu(const Tensor3<S>& x) {
    Tensor3<S> y = x;
    for (auto& e : y.v) e = e > S(0) ? e : S(0);
    return y;
}

template <class S>
Tensor3<S> relu_backward(const Tensor3<S>& dout, const Tensor3<S>& forward_out) {
    Tensor3<S> din = dout;
    for (size_t i = 0; i < din.v.size(); ++i)
        if (forward_out.v[i] <= S(0)) din.v[i] = S(0);
    return din;
}

template <class S>
Tensor3<S> avg_pool2(const Tensor3<S>& x) {
    assert(x.t % 2 == 0);
    Tensor3<S> y(x.n, x.t / 2, x.c);
    for (int nv = 0; nv < x.n; ++nv)
        for (int t = 0; t < y.t; ++t) {
            const S* a = x.frame(nv, 2 * t);
            const S* b = x.frame(nv, 2 * t + 1);
            S* o = y.frame(nv, t);
            for (int k = 0; k < x.c; ++k) o[k] = static_cast<S>(0.5) * (a[k] + b[k]);
        }
    return y;
}

template <class S>
Tensor3<S> avg_pool2_backward(const Tensor3<S>& dout) {
    Tensor3<S> din(dout.n, dout.t * 2, dout.c);
    for (int nv = 0; nv < dout.n; ++nv)
        for (int t = 0; t < dout.t; ++t) {
            const S* g = dout.frame(nv, t);
            S* a = din.frame(nv, 2 * t);
            S* b = din.frame(nv, 2 * t + 1);
            for (int k = 0; k < dout.c; ++k) {
                a[k] = static_cast<S>(0.5) * g[k];
                b[k] = static_cast<S>(0.5) * g[k];
            }
        }
    return din;
}

// Nearest-neighbour upsampling by an integer factor.
template <class S>
Tensor3<S> upsample_repeat(const Tensor3<S>& x, int factor) {
    Tensor3<S> y(x.n, x.t * factor, x.c);
    for (int nv = 0; nv < x.n; ++nv)
        for (int t = 0; t < y.t; ++t) {
            const S* src = x.frame(nv, t / factor);
            S* dst = y.frame(nv, t);
            std::copy(src, src + x.c, dst);
        }
    return y;
}

template <class S>
Tensor3<S> upsample_repeat_backward(const Tensor3<S>& dout, int factor) {
    Tensor3<S> din(dout.n, dout.t / factor, dout.c, S(0));
    for (int nv = 0; nv < dout.n; ++nv)
        for (int t = 0; t < dout.t; ++t) {
            const S* g = dout.frame(nv, t);
            S* dst = din.frame(nv, t / factor);
            for (int k = 0; k < dout.c; ++k) dst[k] += g[k];
        }
    return din;
}

// Pad in time to a multiple of `mult` by replicating the last frame.
template <class S>
Tensor3<S> pad_to_multiple(const Tensor3<S>& x, int mult) {
    const int rem = x.t % mult;
    if (rem == 0) return x;
    const int t_new = x.t + (mult - rem);
    Tensor3<S> y(x.n, t_new, x.c);
    for (int nv = 0; nv < x.n; ++nv)
        for (int t = 0; t < t_new; ++t) {
            const S* src = x.frame(nv, std::min(t, x.t - 1));
            std::copy(src, src + x.c, y.frame(nv, t));
        }
    return y;
}

template <class S>
Tensor3<S> pad_to_multiple_backward(const Tensor3<S>& dout, int t_orig) {
    if (dout.t == t_orig) return dout;
    Tensor3<S> din(dout.n, t_orig, dout.c, S(0));
    for (int nv = 0; nv < dout.n; ++nv)
        for (int t = 0; t < dout.t; ++t) {
            const S* g = dout.frame(nv, t);
            S* dst = din.frame(nv, std::min(t, t_orig - 1));
            for (int k = 0; k < dout.c; ++k) dst[k] += g[k];
        }
    return din;
}

// Flatten [N x T x C] to [(N*T) x C] and back.
template <class S>
Matrix<S> flatten_frames(const Tensor3<S>& x) {
    Matrix<S> m(x.n * x.t, x.c);
    m.v = x.v;
    return m;
}

template <class S>
Tensor3<S> unflatten_frames(const Matrix<S>& m, int n, int t) {
    assert(m.rows == n * t);
    Tensor3<S> x(n, t, m.cols);
    x.v = m.v;
    return x;
}

}  // namespace contraseg::nn
