#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hg/error.hpp"

namespace hg {

// Additive mask sentinel applied to attention logits before softmax. Masked
// positions carry -1e9 rather than a literal -inf so arithmetic stays total.
inline constexpr float kMaskLogit = -1e9f;

struct Vector {
    std::vector<float> data;

    Vector() = default;
    explicit Vector(int dim, float fill = 0.0f) : data(static_cast<size_t>(dim), fill) {}
    Vector(std::initializer_list<float> init) : data(init) {}

    int dim() const { return static_cast<int>(data.size()); }
    float& operator[](int i) { return data[static_cast<size_t>(i)]; }
    float operator[](int i) const { return data[static_cast<size_t>(i)]; }
    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }
};

// Row-major, 32-bit storage. Reductions that produce Matrix/Vector values
// accumulate in 64-bit and round once on store.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}
    Matrix(int r, int c, std::initializer_list<float> init) : rows(r), cols(c), data(init) {
        if (static_cast<size_t>(r) * c != data.size()) {
            throw shape_error("matrix initializer size does not match rows*cols");
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0f;
        return m;
    }

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    Vector row_vector(int r) const {
        Vector v(cols);
        const float* src = row(r);
        for (int j = 0; j < cols; ++j) v[j] = src[j];
        return v;
    }
};

// C = a * b. Dimension mismatch raises shape_error.
Matrix matmul(const Matrix& a, const Matrix& b);

// Row-wise softmax with per-row max subtraction, computed in f64. Entries at
// or below kMaskLogit/10 are treated as masked; a fully masked row raises
// shape_error.
Matrix softmax_rows(const Matrix& m);

// Solves (a + ridge*I) x = b for symmetric positive definite a, by f64
// Cholesky. Non-symmetric input raises shape_error; a failed factorization
// raises singular_error.
Vector solve_spd(const Matrix& a, const Vector& b, double ridge);

struct Pca2d {
    Matrix projection;  // n x 2, mean-centered coordinates
    Matrix components;  // 2 x d, orthonormal rows
    double eigenvalues[2] = {0.0, 0.0};
    double total_variance = 0.0;
};

// Top-2 principal components by power iteration with deflation
// (tol 1e-9, max 10000 iterations). Identical points raise degenerate_error.
Pca2d pca_2d(const std::vector<Vector>& points);

Vector layernorm(const Vector& x, const Vector& gain, const Vector& bias, float eps);

// x * sigmoid(1.702 x)
float gelu_quick(float x);
// Exact erf-based GELU.
float gelu_exact(float x);

// f64 dot product of f32 spans; the reduction order is fixed (vector lanes,
// then a tree combine) and deterministic per build.
double dot_f64(const float* a, const float* b, int n);

double norm_f64(const float* a, int n);

inline double dot_f64(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) throw shape_error("dot: dimension mismatch");
    return dot_f64(a.ptr(), b.ptr(), a.dim());
}

inline double norm_f64(const Vector& a) { return norm_f64(a.ptr(), a.dim()); }

}  // namespace hg
