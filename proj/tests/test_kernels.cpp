#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "epcrnn/kernels.hpp"
#include "epcrnn/kernels_ref.hpp"
#include "epcrnn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace ep;

namespace {

template <class T>
Tensor<T> random_tensor(std::vector<int> shape, std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform_range(g, lo, hi));
    return t;
}

template <class T>
void check_close(const Tensor<T>& a, const Tensor<T>& b, double tol) {
    REQUIRE(a.shape() == b.shape());
    double m = 0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
    CHECK(m <= tol);
}

// relative with absolute floor, for inner-product comparisons
bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 against 3x3 kernel sums to 9") {
    auto in = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
    auto k = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
    auto out = conv2d(in, k, 1, 0);
    CHECK(out.shape() == std::vector<int>{1, 1, 1, 1});
    CHECK(out[0] == doctest::Approx(9.0f));
}

TEST_CASE("conv2d: zero kernel gives zero output") {
    auto g = substream(7, "conv-zero");
    auto in = random_tensor<float>({2, 3, 5, 5}, g);
    auto k = Tensor<float>::zeros({4, 3, 3, 3});
    auto out = conv2d(in, k, 1, 1);
    CHECK(max_abs(out) == 0.0f);
}

TEST_CASE("conv2d: matches naive reference on the spec's 2x3x8x8 case") {
    auto g = substream(11, "conv-ref");
    auto in = random_tensor<float>({2, 3, 8, 8}, g);
    auto k = random_tensor<float>({4, 3, 3, 3}, g);
    auto out = conv2d(in, k, 1, 1);
    auto want = ref::conv2d(in, k, 1, 1);
    check_close(out, want, 1e-5);
}

TEST_CASE("conv2d: output dims follow floor((H+2p-k)/s)+1") {
    auto in = Tensor<float>::zeros({1, 1, 7, 7});
    auto k = Tensor<float>::zeros({1, 1, 3, 3});
    CHECK(conv2d(in, k, 2, 0).shape() == std::vector<int>{1, 1, 3, 3});
    CHECK(conv2d(in, k, 2, 1).shape() == std::vector<int>{1, 1, 4, 4});
}

TEST_CASE("conv2d: shape errors name the offending axis") {
    auto in = Tensor<float>::zeros({1, 3, 5, 5});
    auto bad_c = Tensor<float>::zeros({2, 4, 3, 3});
    CHECK_THROWS_WITH_AS(conv2d(in, bad_c, 1, 0), doctest::Contains("channel axis"), ShapeError);
    auto bad_k = Tensor<float>::zeros({2, 3, 9, 3});
    CHECK_THROWS_WITH_AS(conv2d(in, bad_k, 1, 0), doctest::Contains("kernel height"), ShapeError);
    CHECK_THROWS_AS(conv2d(in, Tensor<float>::zeros({2, 3, 3, 3}), 0, 0), ShapeError);
}

TEST_CASE("conv2d_transpose: adjoint identity on the spec's shapes") {
    auto g = substream(13, "convT-adjoint");
    auto a = random_tensor<float>({2, 3, 8, 8}, g);
    auto w = random_tensor<float>({4, 3, 3, 3}, g);
    auto b = random_tensor<float>({2, 4, 8, 8}, g);
    double lhs = dot(conv2d(a, w, 1, 1), b);
    double rhs = dot(a, conv2d_transpose(b, w, 1, 1));
    CHECK(close_rel(lhs, rhs, 1e-4));
}

TEST_CASE("conv2d_transpose: zero input gives zero output") {
    auto w = Tensor<float>::full({2, 3, 3, 3}, 0.5f);
    auto out = conv2d_transpose(Tensor<float>::zeros({1, 2, 4, 4}), w, 1, 1);
    CHECK(max_abs(out) == 0.0f);
}

TEST_CASE("conv2d_transpose: 1x1 kernel is a per-channel scaled copy") {
    // out[c] = sum_o g[o] * k[o][c]
    Tensor<float> k({2, 1, 1, 1}, {2.0f, -3.0f});
    Tensor<float> g({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    auto out = conv2d_transpose(g, k, 1, 0);
    CHECK(out.shape() == std::vector<int>{1, 1, 2, 2});
    CHECK(out.at4(0, 0, 0, 0) == doctest::Approx(1 * 2.0f + 10 * -3.0f));
    CHECK(out.at4(0, 0, 1, 1) == doctest::Approx(4 * 2.0f + 40 * -3.0f));
}

TEST_CASE("maxpool: 2x2 window basics and tie rule") {
    Tensor<float> in({1, 1, 2, 2}, {1, 2, 3, 4});
    auto [out, cache] = maxpool(in, 2, 2);
    CHECK(out.numel() == 1);
    CHECK(out[0] == 4.0f);
    CHECK(cache.idx[0] == 3);

    auto flat = Tensor<float>::full({1, 1, 2, 2}, 5.0f);
    auto [out2, cache2] = maxpool(flat, 2, 2);
    CHECK(out2[0] == 5.0f);
    CHECK(cache2.idx[0] == 0);  // lowest flat index wins ties
}

TEST_CASE("maxpool: matches naive reference on random 4x4") {
    auto g = substream(17, "pool-ref");
    auto in = random_tensor<float>({1, 1, 4, 4}, g);
    auto [out, cache] = maxpool(in, 2, 2);
    auto [rout, rcache] = ref::maxpool(in, 2, 2);
    check_close(out, rout, 0.0);
    CHECK(cache.idx == rcache.idx);
}

TEST_CASE("maxpool: non-divisible spatial dims error instead of truncating") {
    auto in = Tensor<float>::zeros({1, 1, 5, 4});
    CHECK_THROWS_WITH_AS(maxpool(in, 2, 2), doctest::Contains("height axis"), ShapeError);
}

TEST_CASE("unpool: scatters only to argmax positions") {
    auto g = substream(19, "unpool");
    auto a = random_tensor<float>({1, 2, 4, 4}, g);
    auto [pooled, cache] = maxpool(a, 2, 2);
    auto back = unpool(pooled, cache);
    int nonzero = 0;
    for (int64_t i = 0; i < back.numel(); ++i)
        if (back[i] != 0.0f) ++nonzero;
    CHECK(nonzero == pooled.numel());
    for (int64_t e = 0; e < pooled.numel(); ++e)
        CHECK(back[cache.idx[static_cast<size_t>(e)]] == pooled[e]);
}

TEST_CASE("unpool: adjoint of maxpool selection, zero maps to zero, stale cache errors") {
    auto g = substream(23, "unpool-adjoint");
    auto a = random_tensor<float>({2, 3, 6, 6}, g);
    auto [pooled, cache] = maxpool(a, 2, 2);
    auto b = random_tensor<float>(pooled.shape(), g);
    // <maxpool(a), b> == <a, unpool(b, cache)>
    CHECK(close_rel(dot(pooled, b), dot(a, unpool(b, cache)), 1e-5));

    CHECK(max_abs(unpool(Tensor<float>::zeros(pooled.shape()), cache)) == 0.0f);

    CHECK_THROWS_AS(unpool(Tensor<float>::zeros({2, 3, 3, 1}), cache), ShapeError);
}

TEST_CASE("matmul: identity, reference, transpose round-trip, errors") {
    Tensor<float> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor<float> v({3}, {2.0f, -1.0f, 0.5f});
    auto mv = matmul(eye, v);
    CHECK(mv.shape() == std::vector<int>{3});
    for (int i = 0; i < 3; ++i) CHECK(mv[i] == v[i]);

    auto g = substream(29, "matmul");
    auto a = random_tensor<float>({3, 4}, g);
    auto b = random_tensor<float>({4, 2}, g);
    check_close(matmul(a, b), ref::matmul(a, b), 1e-6);

    auto att = transpose(transpose(a));
    CHECK(att.shape() == a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(att[i] == a[i]);

    CHECK_THROWS_WITH_AS(matmul(a, Tensor<float>::zeros({3, 2})), doctest::Contains("inner axis"), ShapeError);
}

TEST_CASE("matmul: transpose_a supports the quadratic form") {
    auto g = substream(31, "matmul-ta");
    auto a = random_tensor<double>({4, 3}, g);
    auto b = random_tensor<double>({4, 2}, g);
    auto out = matmul(a, b, /*transpose_a=*/true);  // a^T [3x4] * b [4x2]
    auto want = ref::matmul(transpose(a), b);
    check_close(out, want, 1e-12);
}

TEST_CASE("linear kernels: adjoint identities against matmul forms") {
    auto g = substream(37, "linear");
    auto x = random_tensor<double>({5, 7}, g);
    auto w = random_tensor<double>({4, 7}, g);
    auto gout = random_tensor<double>({5, 4}, g);
    // <linear_forward(x,w), g> == <x, linear_backward(g,w)> == <w, linear_weight_grad(g,x)>
    double s0 = dot(linear_forward(x, w), gout);
    double s1 = dot(x, linear_backward(gout, w));
    double s2 = dot(w, linear_weight_grad(gout, x));
    CHECK(close_rel(s0, s1, 1e-12));
    CHECK(close_rel(s0, s2, 1e-12));
}

TEST_CASE("property: naive-reference equivalence on 100+ randomized conv shapes") {
    auto g = substream(41, "prop-conv-ref");
    for (int it = 0; it < 110; ++it) {
        const int N = 1 + uniform_int(g, 2);
        const int C = 1 + uniform_int(g, 3);
        const int O = 1 + uniform_int(g, 4);
        const int k = 1 + uniform_int(g, 3);
        const int stride = 1 + uniform_int(g, 2);
        const int pad = uniform_int(g, 2);
        const int H = k + uniform_int(g, 6);
        const int W = k + uniform_int(g, 6);
        auto in = random_tensor<float>({N, C, H, W}, g);
        auto kr = random_tensor<float>({O, C, k, k}, g);
        auto out = conv2d(in, kr, stride, pad);
        check_close(out, ref::conv2d(in, kr, stride, pad), 2e-5);
        CHECK(all_finite(out));

        auto gt = random_tensor<float>(out.shape(), g);
        auto tr = conv2d_transpose(gt, kr, stride, pad, H, W);
        check_close(tr, ref::conv2d_transpose(gt, kr, stride, pad, H, W), 2e-5);

        auto wg = conv2d_weight_grad(in, gt, k, k, stride, pad);
        check_close(wg, ref::conv2d_weight_grad(in, gt, k, k, stride, pad), 2e-4);
    }
}

TEST_CASE("property: adjointness of every linear kernel, f32 and f64 tolerances") {
    auto g = substream(43, "prop-adjoint");
    int cases = 0;
    for (int it = 0; it < 110; ++it) {
        const int N = 1 + uniform_int(g, 2);
        const int C = 1 + uniform_int(g, 3);
        const int O = 1 + uniform_int(g, 3);
        const int k = 1 + uniform_int(g, 3);
        const int stride = 1 + uniform_int(g, 2);
        const int pad = uniform_int(g, 2);
        const int H = k + uniform_int(g, 6);
        const int W = k + uniform_int(g, 6);

        auto check_trilinear = [&](auto tag) {
            using T = decltype(tag);
            const double tol = sizeof(T) == 4 ? 1e-4 : 1e-9;
            auto a = random_tensor<T>({N, C, H, W}, g);
            auto w = random_tensor<T>({O, C, k, k}, g);
            auto out_shape = conv2d(a, w, stride, pad).shape();
            auto b = random_tensor<T>(out_shape, g);
            const double s_fwd = dot(conv2d(a, w, stride, pad), b);
            const double s_adj = dot(a, conv2d_transpose(b, w, stride, pad, H, W));
            const double s_wg = dot(w, conv2d_weight_grad(a, b, k, k, stride, pad));
            CHECK(close_rel(s_fwd, s_adj, tol));
            CHECK(close_rel(s_fwd, s_wg, tol));
        };
        check_trilinear(float{});
        check_trilinear(double{});
        ++cases;

        // pooling adjoint on compatible sizes
        const int win = 1 + uniform_int(g, 2);
        const int ps = win;
        const int PH = win * (1 + uniform_int(g, 3));
        const int PW = win * (1 + uniform_int(g, 3));
        auto pa = random_tensor<double>({N, C, PH, PW}, g);
        auto [pooled, cache] = maxpool(pa, win, ps);
        auto pb = random_tensor<double>(pooled.shape(), g);
        CHECK(close_rel(dot(pooled, pb), dot(pa, unpool(pb, cache)), 1e-9));
        // pool_gather is the adjoint of unpool
        auto full = random_tensor<double>(pa.shape(), g);
        CHECK(close_rel(dot(unpool(pb, cache), full), dot(pb, pool_gather(full, cache)), 1e-9));
    }
    CHECK(cases >= 100);
}

TEST_CASE("property: kernels are deterministic across repeated runs and thread counts") {
    auto g = substream(47, "prop-det");
    auto in = random_tensor<float>({3, 4, 12, 12}, g);
    auto k = random_tensor<float>({6, 4, 3, 3}, g);
    auto once = conv2d(in, k, 1, 1);
    auto twice = conv2d(in, k, 1, 1);
    CHECK(std::memcmp(once.data(), twice.data(), sizeof(float) * once.numel()) == 0);
#ifdef _OPENMP
    int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    auto serial = conv2d(in, k, 1, 1);
    omp_set_num_threads(saved);
    CHECK(std::memcmp(once.data(), serial.data(), sizeof(float) * once.numel()) == 0);
#endif
}

TEST_CASE("property: finite outputs on finite inputs") {
    auto g = substream(53, "prop-finite");
    for (int it = 0; it < 20; ++it) {
        auto in = random_tensor<float>({2, 3, 8, 8}, g, -100.0, 100.0);
        auto k = random_tensor<float>({4, 3, 3, 3}, g, -100.0, 100.0);
        CHECK(all_finite(conv2d(in, k, 1, 1)));
        auto [p, c] = maxpool(in, 2, 2);
        CHECK(all_finite(p));
        CHECK(all_finite(unpool(p, c)));
    }
}
