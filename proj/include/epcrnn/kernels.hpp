#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "epcrnn/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Dense kernels used by the energy and oracle modules. All of them are pure
// functions over N,C,H,W row-major tensors.
//
// Determinism contract: every output element is written by exactly one task
// and accumulated in a fixed loop order, so results are bit-identical across
// runs and across OpenMP thread counts. Parallel loops range over independent
// output planes; no atomics, no shared accumulators.
//
// conv2d uses cross-correlation semantics. Average pooling is intentionally
// not provided; the architectures here only use max pooling.

namespace ep {

// Argmax positions of one maxpool call, as flat indices into the *input*
// tensor. unpool/pool_gather validate against the recorded shapes.
struct PoolIndexCache {
    std::vector<int> in_shape;
    std::vector<int> out_shape;
    int window = 0;
    int stride = 0;
    std::vector<int64_t> idx;
};

namespace detail {

inline void require_4d(const std::vector<int>& s, const char* op, const char* name) {
    if (s.size() != 4)
        throw ShapeError(std::string(op) + ": " + name + " must be rank-4 [N,C,H,W], got " +
                         Tensor<float>::shape_string(s));
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

inline void check_conv_args(const std::vector<int>& in, const std::vector<int>& kr,
                            int stride, int pad, const char* op) {
    require_4d(in, op, "input");
    require_4d(kr, op, "kernel");
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0) throw ShapeError(std::string(op) + ": padding must be >= 0, got " + std::to_string(pad));
    if (kr[1] != in[1])
        throw ShapeError(std::string(op) + ": channel axis mismatch, kernel C=" + std::to_string(kr[1]) +
                         " vs input C=" + std::to_string(in[1]));
    if (kr[2] > in[2] + 2 * pad)
        throw ShapeError(std::string(op) + ": kernel height k=" + std::to_string(kr[2]) +
                         " exceeds padded input H=" + std::to_string(in[2] + 2 * pad));
    if (kr[3] > in[3] + 2 * pad)
        throw ShapeError(std::string(op) + ": kernel width k=" + std::to_string(kr[3]) +
                         " exceeds padded input W=" + std::to_string(in[3] + 2 * pad));
}

}  // namespace detail

// out[n,o,oh,ow] = sum_{c,kh,kw} in[n,c,oh*s-p+kh,ow*s-p+kw] * k[o,c,kh,kw]
template <class T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& kernel, int stride, int pad) {
    detail::check_conv_args(in.shape(), kernel.shape(), stride, pad, "conv2d");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
    const int OH = detail::conv_out_dim(H, KH, stride, pad);
    const int OW = detail::conv_out_dim(W, KW, stride, pad);
    if (OH < 1 || OW < 1)
        throw ShapeError("conv2d: empty output " + std::to_string(OH) + "x" + std::to_string(OW));

    Tensor<T> out({N, O, OH, OW});
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            T* op = out.data() + out.idx4(n, o, 0, 0);
            // Each output element accumulates in fixed (c,kh,kw) order; the
            // inner ow loop touches independent elements and vectorizes.
            for (int c = 0; c < C; ++c)
                for (int kh = 0; kh < KH; ++kh)
                    for (int kw = 0; kw < KW; ++kw) {
                        const T wv = kernel.at4(o, c, kh, kw);
                        if (wv == T(0)) continue;
                        // iw = ow*stride - pad + kw must lie in [0, W)
                        int ow_lo = 0, ow_hi = OW - 1;
                        while (ow_lo * stride - pad + kw < 0) ++ow_lo;
                        while (ow_hi >= 0 && ow_hi * stride - pad + kw >= W) --ow_hi;
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            const T* ip = in.data() + in.idx4(n, c, ih, 0);
                            T* orow = op + static_cast<int64_t>(oh) * OW;
                            for (int ow = ow_lo; ow <= ow_hi; ++ow)
                                orow[ow] += wv * ip[ow * stride + kw - pad];
                        }
                    }
        }
    return out;
}

// Exact adjoint of conv2d in its first argument:
// <conv2d(a,w), b> == <a, conv2d_transpose(b,w)>.
// in_h/in_w select the original input size when it is not uniquely determined
// by the output size (stride > 1); pass 0 to use the minimal size.
template <class T>
Tensor<T> conv2d_transpose(const Tensor<T>& grad, const Tensor<T>& kernel, int stride, int pad,
                           int in_h = 0, int in_w = 0) {
    detail::require_4d(grad.shape(), "conv2d_transpose", "input");
    detail::require_4d(kernel.shape(), "conv2d_transpose", "kernel");
    if (stride < 1) throw ShapeError("conv2d_transpose: stride must be >= 1");
    const int N = grad.dim(0), O = grad.dim(1), GH = grad.dim(2), GW = grad.dim(3);
    const int C = kernel.dim(1), KH = kernel.dim(2), KW = kernel.dim(3);
    if (kernel.dim(0) != O)
        throw ShapeError("conv2d_transpose: output-channel axis mismatch, kernel O=" +
                         std::to_string(kernel.dim(0)) + " vs grad O=" + std::to_string(O));
    const int H = in_h > 0 ? in_h : (GH - 1) * stride + KH - 2 * pad;
    const int W = in_w > 0 ? in_w : (GW - 1) * stride + KW - 2 * pad;
    if (detail::conv_out_dim(H, KH, stride, pad) != GH)
        throw ShapeError("conv2d_transpose: height axis inconsistent, H=" + std::to_string(H) +
                         " does not map to grad H=" + std::to_string(GH));
    if (detail::conv_out_dim(W, KW, stride, pad) != GW)
        throw ShapeError("conv2d_transpose: width axis inconsistent, W=" + std::to_string(W) +
                         " does not map to grad W=" + std::to_string(GW));

    Tensor<T> out({N, C, H, W});
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            T* op = out.data() + out.idx4(n, c, 0, 0);
            for (int o = 0; o < O; ++o)
                for (int kh = 0; kh < KH; ++kh)
                    for (int kw = 0; kw < KW; ++kw) {
                        const T wv = kernel.at4(o, c, kh, kw);
                        if (wv == T(0)) continue;
                        int ow_lo = 0, ow_hi = GW - 1;
                        while (ow_lo * stride - pad + kw < 0) ++ow_lo;
                        while (ow_hi >= 0 && ow_hi * stride - pad + kw >= W) --ow_hi;
                        for (int oh = 0; oh < GH; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            const T* gp = grad.data() + grad.idx4(n, o, oh, 0);
                            T* orow = op + static_cast<int64_t>(ih) * W;
                            for (int ow = ow_lo; ow <= ow_hi; ++ow)
                                orow[ow * stride + kw - pad] += wv * gp[ow];
                        }
                    }
        }
    return out;
}

// Adjoint of conv2d in its kernel argument:
// <conv2d_weight_grad(in, g), k> == <conv2d(in, k), g>.
template <class T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& in, const Tensor<T>& grad_out,
                             int kh_dim, int kw_dim, int stride, int pad) {
    detail::require_4d(in.shape(), "conv2d_weight_grad", "input");
    detail::require_4d(grad_out.shape(), "conv2d_weight_grad", "grad");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = grad_out.dim(1), GH = grad_out.dim(2), GW = grad_out.dim(3);
    if (grad_out.dim(0) != N)
        throw ShapeError("conv2d_weight_grad: batch axis mismatch N=" + std::to_string(N) +
                         " vs " + std::to_string(grad_out.dim(0)));
    if (detail::conv_out_dim(H, kh_dim, stride, pad) != GH ||
        detail::conv_out_dim(W, kw_dim, stride, pad) != GW)
        throw ShapeError("conv2d_weight_grad: spatial axes inconsistent with kernel/stride/pad");

    Tensor<T> wg({O, C, kh_dim, kw_dim});
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int o = 0; o < O; ++o)
        for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < kh_dim; ++kh)
                for (int kw = 0; kw < kw_dim; ++kw) {
                    int ow_lo = 0, ow_hi = GW - 1;
                    while (ow_lo * stride - pad + kw < 0) ++ow_lo;
                    while (ow_hi >= 0 && ow_hi * stride - pad + kw >= W) --ow_hi;
                    T acc = 0;
                    for (int n = 0; n < N; ++n)
                        for (int oh = 0; oh < GH; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            const T* gp = grad_out.data() + grad_out.idx4(n, o, oh, 0);
                            const T* ip = in.data() + in.idx4(n, c, ih, 0);
                            for (int ow = ow_lo; ow <= ow_hi; ++ow)
                                acc += gp[ow] * ip[ow * stride + kw - pad];
                        }
                    wg.at4(o, c, kh, kw) = acc;
                }
    return wg;
}

// Per-window maximum. Ties broken by the lowest flat index. The window must
// tile the spatial dims exactly ((H - window) % stride == 0); anything that
// would truncate is an error.
template <class T>
std::pair<Tensor<T>, PoolIndexCache> maxpool(const Tensor<T>& in, int window, int stride) {
    detail::require_4d(in.shape(), "maxpool", "input");
    if (window < 1 || stride < 1) throw ShapeError("maxpool: window and stride must be >= 1");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    if (window > H || window > W)
        throw ShapeError("maxpool: window " + std::to_string(window) + " exceeds spatial axis " +
                         std::to_string(std::min(H, W)));
    if ((H - window) % stride != 0)
        throw ShapeError("maxpool: height axis H=" + std::to_string(H) +
                         " not tiled by window " + std::to_string(window) +
                         " stride " + std::to_string(stride));
    if ((W - window) % stride != 0)
        throw ShapeError("maxpool: width axis W=" + std::to_string(W) +
                         " not tiled by window " + std::to_string(window) +
                         " stride " + std::to_string(stride));
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;

    Tensor<T> out({N, C, OH, OW});
    PoolIndexCache cache;
    cache.in_shape = in.shape();
    cache.out_shape = out.shape();
    cache.window = window;
    cache.stride = stride;
    cache.idx.assign(static_cast<size_t>(out.numel()), 0);

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    const int h0 = oh * stride, w0 = ow * stride;
                    int64_t best = in.idx4(n, c, h0, w0);
                    T bv = in[best];
                    for (int dh = 0; dh < window; ++dh)
                        for (int dw = 0; dw < window; ++dw) {
                            const int64_t i = in.idx4(n, c, h0 + dh, w0 + dw);
                            if (in[i] > bv) {  // strict: first (lowest flat index) max wins
                                bv = in[i];
                                best = i;
                            }
                        }
                    out.at4(n, c, oh, ow) = bv;
                    cache.idx[static_cast<size_t>(out.idx4(n, c, oh, ow))] = best;
                }
    return {std::move(out), std::move(cache)};
}

inline void check_cache(const PoolIndexCache& cache, const std::vector<int>& pooled_shape, const char* op) {
    if (cache.out_shape != pooled_shape)
        throw ShapeError(std::string(op) + ": cache recorded for output " +
                         Tensor<float>::shape_string(cache.out_shape) + " but got " +
                         Tensor<float>::shape_string(pooled_shape));
    if (cache.idx.size() != static_cast<size_t>(Tensor<float>::count(cache.out_shape)))
        throw ShapeError(std::string(op) + ": stale cache, index count mismatch");
}

// Scatter pooled values back to their argmax positions; adjoint of maxpool
// restricted to the cached selection. Overlapping windows accumulate.
template <class T>
Tensor<T> unpool(const Tensor<T>& pooled, const PoolIndexCache& cache) {
    check_cache(cache, pooled.shape(), "unpool");
    Tensor<T> out(cache.in_shape);
    const int N = pooled.dim(0), C = pooled.dim(1), OH = pooled.dim(2), OW = pooled.dim(3);
    const int64_t plane = static_cast<int64_t>(out.dim(2)) * out.dim(3);
    (void)plane;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    const int64_t e = pooled.idx4(n, c, oh, ow);
                    out[cache.idx[static_cast<size_t>(e)]] += pooled[e];
                }
    return out;
}

// Gather at cached argmax positions; adjoint of unpool.
template <class T>
Tensor<T> pool_gather(const Tensor<T>& full, const PoolIndexCache& cache) {
    if (full.shape() != cache.in_shape)
        throw ShapeError("pool_gather: cache recorded for input " +
                         Tensor<float>::shape_string(cache.in_shape) + " but got " +
                         full.shape_string());
    Tensor<T> out(cache.out_shape);
    for (int64_t e = 0; e < out.numel(); ++e) out[e] = full[cache.idx[static_cast<size_t>(e)]];
    return out;
}

// c[m,n] = a[m,k] * b[k,n]; transpose_a reads a as its transpose ([k,m] storage).
// b may be rank-1 ([k]), giving a rank-1 result (the matvec form).
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false) {
    if (a.rank() != 2) throw ShapeError("matmul: a must be rank-2, got " + a.shape_string());
    const bool vec = b.rank() == 1;
    if (!vec && b.rank() != 2) throw ShapeError("matmul: b must be rank-1 or rank-2, got " + b.shape_string());
    const int M = transpose_a ? a.dim(1) : a.dim(0);
    const int K = transpose_a ? a.dim(0) : a.dim(1);
    const int Nn = vec ? 1 : b.dim(1);
    const int bk = vec ? b.dim(0) : b.dim(0);
    if (bk != K)
        throw ShapeError("matmul: inner axis mismatch, a gives k=" + std::to_string(K) +
                         ", b gives k=" + std::to_string(bk));

    Tensor<T> out(vec ? std::vector<int>{M} : std::vector<int>{M, Nn});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int m = 0; m < M; ++m) {
        T* orow = out.data() + static_cast<int64_t>(m) * Nn;
        for (int k = 0; k < K; ++k) {
            const T av = transpose_a ? a.at2(k, m) : a.at2(m, k);
            const T* brow = b.data() + static_cast<int64_t>(k) * Nn;
            for (int j = 0; j < Nn; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// Batched linear-layer kernels over [N,F] states and [O,F] weights.

// out[n,o] = sum_f x[n,f] * w[o,f]
template <class T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w) {
    if (x.rank() != 2 || w.rank() != 2)
        throw ShapeError("linear_forward: expected [N,F] x [O,F]");
    if (x.dim(1) != w.dim(1))
        throw ShapeError("linear_forward: feature axis mismatch F=" + std::to_string(x.dim(1)) +
                         " vs " + std::to_string(w.dim(1)));
    const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
    Tensor<T> out({N, O});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            const T* xr = x.data() + x.idx2(n, 0);
            const T* wr = w.data() + w.idx2(o, 0);
            T acc = 0;
            for (int f = 0; f < F; ++f) acc += xr[f] * wr[f];
            out.at2(n, o) = acc;
        }
    return out;
}

// out[n,f] = sum_o g[n,o] * w[o,f]   (adjoint of linear_forward in x)
template <class T>
Tensor<T> linear_backward(const Tensor<T>& g, const Tensor<T>& w) {
    if (g.rank() != 2 || w.rank() != 2)
        throw ShapeError("linear_backward: expected [N,O] x [O,F]");
    if (g.dim(1) != w.dim(0))
        throw ShapeError("linear_backward: output axis mismatch O=" + std::to_string(g.dim(1)) +
                         " vs " + std::to_string(w.dim(0)));
    const int N = g.dim(0), O = g.dim(1), F = w.dim(1);
    Tensor<T> out({N, F});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int n = 0; n < N; ++n) {
        T* orow = out.data() + out.idx2(n, 0);
        for (int o = 0; o < O; ++o) {
            const T gv = g.at2(n, o);
            const T* wr = w.data() + w.idx2(o, 0);
            for (int f = 0; f < F; ++f) orow[f] += gv * wr[f];
        }
    }
    return out;
}

// wg[o,f] = sum_n g[n,o] * x[n,f]   (adjoint of linear_forward in w)
template <class T>
Tensor<T> linear_weight_grad(const Tensor<T>& g, const Tensor<T>& x) {
    if (g.rank() != 2 || x.rank() != 2)
        throw ShapeError("linear_weight_grad: expected [N,O] x [N,F]");
    if (g.dim(0) != x.dim(0))
        throw ShapeError("linear_weight_grad: batch axis mismatch N=" + std::to_string(g.dim(0)) +
                         " vs " + std::to_string(x.dim(0)));
    const int N = g.dim(0), O = g.dim(1), F = x.dim(1);
    Tensor<T> wg({O, F});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int o = 0; o < O; ++o) {
        T* wr = wg.data() + wg.idx2(o, 0);
        for (int n = 0; n < N; ++n) {
            const T gv = g.at2(n, o);
            const T* xr = x.data() + x.idx2(n, 0);
            for (int f = 0; f < F; ++f) wr[f] += gv * xr[f];
        }
    }
    return wg;
}

}  // namespace ep
