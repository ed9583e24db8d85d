#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "epcrnn/errors.hpp"

namespace ep {

// Dense row-major tensor. N,C,H,W axis order for 4-d data, [N,F] for
// per-sample feature vectors, [O,F] / [O,C,kh,kw] for weights.
// No implicit broadcasting anywhere; shape coercions are explicit.
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != static_cast<int64_t>(data_.size()))
            throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension " + std::to_string(d));
            n *= d;
        }
        return n;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Flat index helpers for the two layouts used throughout.
    int64_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    int64_t idx2(int r, int c) const { return static_cast<int64_t>(r) * shape_[1] + c; }

    T& at4(int n, int c, int h, int w) { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }
    const T& at4(int n, int c, int h, int w) const { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }
    T& at2(int r, int c) { return data_[static_cast<size_t>(idx2(r, c))]; }
    const T& at2(int r, int c) const { return data_[static_cast<size_t>(idx2(r, c))]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // Reshape to a new shape with identical element count; data order preserved.
    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != numel())
            throw ShapeError("reshape: element count mismatch, have " + shape_string() +
                             " want " + shape_string(shape));
        return Tensor(std::move(shape), data_);
    }

    std::string shape_string() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> d(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(d));
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

template <class T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.numel() != b.numel())
        throw ShapeError("dot: element count mismatch " + a.shape_string() + " vs " + b.shape_string());
    T s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

template <class T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
    if (!x.same_shape(y))
        throw ShapeError("axpy: shape mismatch " + x.shape_string() + " vs " + y.shape_string());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] += alpha * x[i];
}

template <class T>
void scale(Tensor<T>& x, T alpha) {
    for (int64_t i = 0; i < x.numel(); ++i) x[i] *= alpha;
}

template <class T>
T max_abs(const Tensor<T>& x) {
    T m = 0;
    for (int64_t i = 0; i < x.numel(); ++i) m = std::max(m, std::abs(x[i]));
    return m;
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b))
        throw ShapeError("max_abs_diff: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    T m = 0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <class T>
T norm2(const Tensor<T>& x) {
    T s = 0;
    for (int64_t i = 0; i < x.numel(); ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

template <class T>
bool all_finite(const Tensor<T>& x) {
    for (int64_t i = 0; i < x.numel(); ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

// 2-d transpose.
template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank-2, got " + a.shape_string());
    Tensor<T> out({a.dim(1), a.dim(0)});
    for (int r = 0; r < a.dim(0); ++r)
        for (int c = 0; c < a.dim(1); ++c) out.at2(c, r) = a.at2(r, c);
    return out;
}

}  // namespace ep
