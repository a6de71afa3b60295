// Shared containers and error types used across the library.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace contraseg {

// Thrown on invalid configuration (maps to CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on dataset/file problems (maps to CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when hidden labels are read outside an evaluation scope.
struct TaintError : std::logic_error {
    using std::logic_error::logic_error;
};

// ============================================================================
// Dense row-major matrix
// ============================================================================
template <class S>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<S> v;

    Matrix() = default;
    Matrix(int r, int c, S fill = S(0)) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    S& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    const S& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    S* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const S* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    void fill(S x) { std::fill(v.begin(), v.end(), x); }

    template <class U>
    Matrix<U> cast() const {
        Matrix<U> out(rows, cols);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using MatD = Matrix<double>;
using MatF = Matrix<float>;

// ============================================================================
// Batch tensor [n_videos x frames x channels], row-major
// ============================================================================
template <class S>
struct Tensor3 {
    int n = 0, t = 0, c = 0;
    std::vector<S> v;

    Tensor3() = default;
    Tensor3(int n_, int t_, int c_, S fill = S(0))
        : n(n_), t(t_), c(c_), v(static_cast<size_t>(n_) * t_ * c_, fill) {}

    S& at(int i, int j, int k) { return v[(static_cast<size_t>(i) * t + j) * c + k]; }
    const S& at(int i, int j, int k) const { return v[(static_cast<size_t>(i) * t + j) * c + k]; }

    S* frame(int i, int j) { return v.data() + (static_cast<size_t>(i) * t + j) * c; }
    const S* frame(int i, int j) const { return v.data() + (static_cast<size_t>(i) * t + j) * c; }

    size_t size() const { return v.size(); }
    void fill(S x) { std::fill(v.begin(), v.end(), x); }

    // One video as a [t x c] matrix copy.
    Matrix<S> video(int i) const {
        Matrix<S> m(t, c);
        std::copy(frame(i, 0), frame(i, 0) + static_cast<size_t>(t) * c, m.v.begin());
        return m;
    }
};

template <class S>
inline bool all_finite(const std::vector<S>& v) {
    for (S x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <class S>
inline bool all_finite(const Matrix<S>& m) {
    return all_finite(m.v);
}

template <class S>
inline double dot(const S* a, const S* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

// -log(sigmoid(z)) computed as softplus(-z); stable for large |z|.
inline double softplus(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

inline double neg_log_sigmoid(double z) { return softplus(-z); }

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace contraseg
