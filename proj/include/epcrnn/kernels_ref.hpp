#pragma once

#include <utility>

#include "epcrnn/kernels.hpp"
#include "epcrnn/tensor.hpp"

// Serial reference kernels: direct loop transcriptions of the definitions,
// one gather per output element, no parallelism, no tap skipping. These are
// the comparison baseline for the optimized kernels (tests and the
// bench_kernels target) and are intentionally kept independent of them.

namespace ep::ref {

template <class T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& kernel, int stride, int pad) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
    const int OH = (H + 2 * pad - KH) / stride + 1;
    const int OW = (W + 2 * pad - KW) / stride + 1;
    Tensor<T> out({N, O, OH, OW});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = 0;
                    for (int c = 0; c < C; ++c)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += in.at4(n, c, ih, iw) * kernel.at4(o, c, kh, kw);
                            }
                    out.at4(n, o, oh, ow) = acc;
                }
    return out;
}

template <class T>
Tensor<T> conv2d_transpose(const Tensor<T>& grad, const Tensor<T>& kernel, int stride, int pad,
                           int in_h = 0, int in_w = 0) {
    const int N = grad.dim(0), O = grad.dim(1), GH = grad.dim(2), GW = grad.dim(3);
    const int C = kernel.dim(1), KH = kernel.dim(2), KW = kernel.dim(3);
    const int H = in_h > 0 ? in_h : (GH - 1) * stride + KH - 2 * pad;
    const int W = in_w > 0 ? in_w : (GW - 1) * stride + KW - 2 * pad;
    Tensor<T> out({N, C, H, W});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int oh = 0; oh < GH; ++oh)
                for (int ow = 0; ow < GW; ++ow)
                    for (int c = 0; c < C; ++c)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                out.at4(n, c, ih, iw) += grad.at4(n, o, oh, ow) * kernel.at4(o, c, kh, kw);
                            }
    return out;
}

template <class T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& in, const Tensor<T>& grad_out,
                             int kh_dim, int kw_dim, int stride, int pad) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = grad_out.dim(1), GH = grad_out.dim(2), GW = grad_out.dim(3);
    Tensor<T> wg({O, C, kh_dim, kw_dim});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int oh = 0; oh < GH; ++oh)
                for (int ow = 0; ow < GW; ++ow)
                    for (int c = 0; c < C; ++c)
                        for (int kh = 0; kh < kh_dim; ++kh)
                            for (int kw = 0; kw < kw_dim; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                wg.at4(o, c, kh, kw) += grad_out.at4(n, o, oh, ow) * in.at4(n, c, ih, iw);
                            }
    return wg;
}

template <class T>
std::pair<Tensor<T>, PoolIndexCache> maxpool(const Tensor<T>& in, int window, int stride) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;
    Tensor<T> out({N, C, OH, OW});
    PoolIndexCache cache;
    cache.in_shape = in.shape();
    cache.out_shape = out.shape();
    cache.window = window;
    cache.stride = stride;
    cache.idx.resize(static_cast<size_t>(out.numel()));
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    int64_t best = -1;
                    T bv = 0;
                    for (int dh = 0; dh < window; ++dh)
                        for (int dw = 0; dw < window; ++dw) {
                            const int64_t i = in.idx4(n, c, oh * stride + dh, ow * stride + dw);
                            if (best < 0 || in[i] > bv) {
                                bv = in[i];
                                best = i;
                            }
                        }
                    out.at4(n, c, oh, ow) = bv;
                    cache.idx[static_cast<size_t>(out.idx4(n, c, oh, ow))] = best;
                }
    return {std::move(out), std::move(cache)};
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false) {
    const int M = transpose_a ? a.dim(1) : a.dim(0);
    const int K = transpose_a ? a.dim(0) : a.dim(1);
    const int Nn = b.rank() == 1 ? 1 : b.dim(1);
    Tensor<T> out(b.rank() == 1 ? std::vector<int>{M} : std::vector<int>{M, Nn});
    for (int m = 0; m < M; ++m)
        for (int j = 0; j < Nn; ++j) {
            T acc = 0;
            for (int k = 0; k < K; ++k)
                acc += (transpose_a ? a.at2(k, m) : a.at2(m, k)) * b[static_cast<int64_t>(k) * Nn + j];
            out[static_cast<int64_t>(m) * Nn + j] = acc;
        }
    return out;
}

}  // namespace ep::ref
