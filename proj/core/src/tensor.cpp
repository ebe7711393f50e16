#include "hg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hg/rng.hpp"
#include "kernels.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace hg {
namespace detail {

#if defined(__AVX512F__)

void gemm_f64(const float* __restrict A, const float* __restrict B,
              float* __restrict C, int M, int K, int N) {
    constexpr int MR = 8, NR = 16;
    for (int i0 = 0; i0 < M; i0 += MR) {
        const int mr = std::min(MR, M - i0);
        for (int j0 = 0; j0 < N; j0 += NR) {
            const int nr = std::min(NR, N - j0);
            const __mmask8 m0 = static_cast<__mmask8>((nr >= 8) ? 0xFF : ((1u << nr) - 1));
            const __mmask8 m1 = static_cast<__mmask8>(
                (nr <= 8) ? 0 : ((nr >= 16) ? 0xFF : ((1u << (nr - 8)) - 1)));
            __m512d acc[MR][2];
            for (int r = 0; r < MR; ++r) {
                acc[r][0] = _mm512_setzero_pd();
                acc[r][1] = _mm512_setzero_pd();
            }
            for (int k = 0; k < K; ++k) {
                const float* brow = B + static_cast<size_t>(k) * N + j0;
                const __m512d b0 = _mm512_cvtps_pd(_mm256_maskz_loadu_ps(m0, brow));
                const __m512d b1 = _mm512_cvtps_pd(_mm256_maskz_loadu_ps(m1, brow + 8));
                for (int r = 0; r < mr; ++r) {
                    const __m512d av =
                        _mm512_set1_pd(static_cast<double>(A[static_cast<size_t>(i0 + r) * K + k]));
                    acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
                    acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
                }
            }
            for (int r = 0; r < mr; ++r) {
                alignas(64) double tmp[NR];
                _mm512_storeu_pd(tmp, acc[r][0]);
                _mm512_storeu_pd(tmp + 8, acc[r][1]);
                float* crow = C + static_cast<size_t>(i0 + r) * N + j0;
                for (int j = 0; j < nr; ++j) crow[j] = static_cast<float>(tmp[j]);
            }
        }
    }
}

void gemm_nt_f32(const float* __restrict A, const float* __restrict Bt,
                 float* __restrict C, int M, int K, int N) {
    constexpr int MR = 8, JR = 3, PF = 4096;
    for (int i0 = 0; i0 < M; i0 += MR) {
        const int mr = std::min(MR, M - i0);
        int j = 0;
        for (; j + JR <= N; j += JR) {
            const float* brow[JR];
            for (int t = 0; t < JR; ++t) brow[t] = Bt + static_cast<size_t>(j + t) * K;
            __m512 acc[MR][JR];
            for (int r = 0; r < MR; ++r)
                for (int t = 0; t < JR; ++t) acc[r][t] = _mm512_setzero_ps();
            int k = 0;
            for (; k + 16 <= K; k += 16) {
                _mm_prefetch(reinterpret_cast<const char*>(brow[0] + k + PF), _MM_HINT_T0);
                _mm_prefetch(reinterpret_cast<const char*>(brow[1] + k + PF), _MM_HINT_T0);
                _mm_prefetch(reinterpret_cast<const char*>(brow[2] + k + PF), _MM_HINT_T0);
                __m512 bv[JR];
                for (int t = 0; t < JR; ++t) bv[t] = _mm512_loadu_ps(brow[t] + k);
#pragma GCC unroll 8
                for (int r = 0; r < mr; ++r) {
                    const __m512 av = _mm512_loadu_ps(A + static_cast<size_t>(i0 + r) * K + k);
                    acc[r][0] = _mm512_fmadd_ps(av, bv[0], acc[r][0]);
                    acc[r][1] = _mm512_fmadd_ps(av, bv[1], acc[r][1]);
                    acc[r][2] = _mm512_fmadd_ps(av, bv[2], acc[r][2]);
                }
            }
            for (int r = 0; r < mr; ++r) {
                for (int t = 0; t < JR; ++t) {
                    float s = _mm512_reduce_add_ps(acc[r][t]);
                    for (int kk = k; kk < K; ++kk)
                        s += A[static_cast<size_t>(i0 + r) * K + kk] * brow[t][kk];
                    C[static_cast<size_t>(i0 + r) * N + j + t] = s;
                }
            }
        }
        for (; j < N; ++j) {
            const float* brow = Bt + static_cast<size_t>(j) * K;
            for (int r = 0; r < mr; ++r) {
                const float* arow = A + static_cast<size_t>(i0 + r) * K;
                __m512 acc = _mm512_setzero_ps();
                int k = 0;
                for (; k + 16 <= K; k += 16)
                    acc = _mm512_fmadd_ps(_mm512_loadu_ps(arow + k), _mm512_loadu_ps(brow + k), acc);
                float s = _mm512_reduce_add_ps(acc);
                for (; k < K; ++k) s += arow[k] * brow[k];
                C[static_cast<size_t>(i0 + r) * N + j] = s;
            }
        }
    }
}

void headwise_project_f32(const float* __restrict S, const float* __restrict Wt,
                          float* __restrict P, int M, int d, int H, size_t head_stride) {
    const int dh = d / H;
    for (int j = 0; j < d; ++j) {
        const float* wrow = Wt + static_cast<size_t>(j) * d;
        _mm_prefetch(reinterpret_cast<const char*>(wrow + d), _MM_HINT_T0);
        _mm_prefetch(reinterpret_cast<const char*>(wrow + 2 * d), _MM_HINT_T0);
        for (int i = 0; i < M; ++i) {
            const float* srow = S + static_cast<size_t>(i) * d;
            for (int h = 0; h < H; ++h) {
                const float* sp = srow + h * dh;
                const float* wp = wrow + h * dh;
                __m512 acc = _mm512_setzero_ps();
                int k = 0;
                for (; k + 16 <= dh; k += 16)
                    acc = _mm512_fmadd_ps(_mm512_loadu_ps(sp + k), _mm512_loadu_ps(wp + k), acc);
                float s = _mm512_reduce_add_ps(acc);
                for (; k < dh; ++k) s += sp[k] * wp[k];
                P[static_cast<size_t>(h) * head_stride + static_cast<size_t>(i) * d + j] = s;
            }
        }
    }
}

#else  // scalar fallbacks

void gemm_f64(const float* A, const float* B, float* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) {
                s = std::fma(static_cast<double>(A[static_cast<size_t>(i) * K + k]),
                             static_cast<double>(B[static_cast<size_t>(k) * N + j]), s);
            }
            C[static_cast<size_t>(i) * N + j] = static_cast<float>(s);
        }
    }
}

void gemm_nt_f32(const float* A, const float* Bt, float* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            float s = 0.0f;
            const float* arow = A + static_cast<size_t>(i) * K;
            const float* brow = Bt + static_cast<size_t>(j) * K;
            for (int k = 0; k < K; ++k) s = std::fma(arow[k], brow[k], s);
            C[static_cast<size_t>(i) * N + j] = s;
        }
    }
}

void headwise_project_f32(const float* S, const float* Wt, float* P,
                          int M, int d, int H, size_t head_stride) {
    const int dh = d / H;
    for (int j = 0; j < d; ++j) {
        const float* wrow = Wt + static_cast<size_t>(j) * d;
        for (int i = 0; i < M; ++i) {
            const float* srow = S + static_cast<size_t>(i) * d;
            for (int h = 0; h < H; ++h) {
                float s = 0.0f;
                for (int k = 0; k < dh; ++k) s = std::fma(srow[h * dh + k], wrow[h * dh + k], s);
                P[static_cast<size_t>(h) * head_stride + static_cast<size_t>(i) * d + j] = s;
            }
        }
    }
}

#endif

}  // namespace detail

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw shape_error("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    detail::gemm_f64(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols);
    return c;
}

Matrix softmax_rows(const Matrix& m) {
    constexpr float kMaskedBelow = kMaskLogit / 10.0f;  // -1e8
    Matrix out(m.rows, m.cols);
    std::vector<double> e(static_cast<size_t>(m.cols));
    for (int i = 0; i < m.rows; ++i) {
        const float* src = m.row(i);
        double mx = -HUGE_VAL;
        bool any = false;
        for (int j = 0; j < m.cols; ++j) {
            if (src[j] > kMaskedBelow) {
                any = true;
                mx = std::max(mx, static_cast<double>(src[j]));
            }
        }
        if (!any) throw shape_error("softmax_rows: fully masked row");
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            const double v = (src[j] > kMaskedBelow) ? std::exp(static_cast<double>(src[j]) - mx) : 0.0;
            e[static_cast<size_t>(j)] = v;
            sum += v;
        }
        float* dst = out.row(i);
        for (int j = 0; j < m.cols; ++j)
            dst[j] = static_cast<float>(e[static_cast<size_t>(j)] / sum);
    }
    return out;
}

Vector solve_spd(const Matrix& a, const Vector& b, double ridge) {
    const int n = a.rows;
    if (a.cols != n) throw shape_error("solve_spd: matrix not square");
    if (b.dim() != n) throw shape_error("solve_spd: rhs dimension mismatch");
    if (ridge < 0.0) throw shape_error("solve_spd: negative ridge");
    float maxabs = 0.0f;
    for (float v : a.data) maxabs = std::max(maxabs, std::abs(v));
    const float sym_tol = 1e-5f * std::max(1.0f, maxabs);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(a.at(i, j) - a.at(j, i)) > sym_tol)
                throw shape_error("solve_spd: matrix not symmetric");

    // Cholesky of (a + ridge*I) in f64, lower triangle.
    std::vector<double> m(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m[static_cast<size_t>(i) * n + j] =
                static_cast<double>(a.at(i, j)) + (i == j ? ridge : 0.0);
    for (int j = 0; j < n; ++j) {
        double diag = m[static_cast<size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double l = m[static_cast<size_t>(j) * n + k];
            diag -= l * l;
        }
        if (!(diag > 0.0)) throw singular_error("solve_spd: factorization failed (matrix singular)");
        const double lj = std::sqrt(diag);
        m[static_cast<size_t>(j) * n + j] = lj;
        for (int i = j + 1; i < n; ++i) {
            double s = m[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= m[static_cast<size_t>(i) * n + k] * m[static_cast<size_t>(j) * n + k];
            m[static_cast<size_t>(i) * n + j] = s / lj;
        }
    }
    // L y = b, then L^T x = y.
    std::vector<double> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = static_cast<double>(b[i]);
        for (int k = 0; k < i; ++k) s -= m[static_cast<size_t>(i) * n + k] * y[static_cast<size_t>(k)];
        y[static_cast<size_t>(i)] = s / m[static_cast<size_t>(i) * n + i];
    }
    Vector x(n);
    std::vector<double> xd(static_cast<size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        double s = y[static_cast<size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= m[static_cast<size_t>(k) * n + i] * xd[static_cast<size_t>(k)];
        xd[static_cast<size_t>(i)] = s / m[static_cast<size_t>(i) * n + i];
    }
    for (int i = 0; i < n; ++i) x[i] = static_cast<float>(xd[static_cast<size_t>(i)]);
    return x;
}

namespace {

// One power-iteration eigenpair of the f64 matrix c (with optional
// orthogonalization against prev). Returns the eigenvalue.
double power_iterate(const std::vector<double>& c, int d, std::vector<double>& v,
                     const std::vector<double>* prev) {
    Lcg64 rng(0x50c4u);
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = static_cast<double>(rng.next_symmetric());
    auto orthonormalize = [&](std::vector<double>& w) {
        if (prev) {
            double dp = 0.0;
            for (int i = 0; i < d; ++i) dp += w[static_cast<size_t>(i)] * (*prev)[static_cast<size_t>(i)];
            for (int i = 0; i < d; ++i) w[static_cast<size_t>(i)] -= dp * (*prev)[static_cast<size_t>(i)];
        }
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-150) return false;
        for (double& x : w) x /= nrm;
        return true;
    };
    if (!orthonormalize(v)) {
        // Fall back to a basis vector not aligned with prev.
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
        orthonormalize(v);
    }
    std::vector<double> w(static_cast<size_t>(d));
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            const double* row = c.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<size_t>(j)];
            w[static_cast<size_t>(i)] = s;
        }
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-30) {
            // Null direction: the current orthonormal v is a valid
            // zero-eigenvalue component.
            return 0.0;
        }
        if (!orthonormalize(w)) return 0.0;
        // Sign-align before measuring the step.
        double dp = 0.0;
        for (int i = 0; i < d; ++i) dp += w[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        if (dp < 0.0)
            for (double& x : w) x = -x;
        double delta = 0.0;
        for (int i = 0; i < d; ++i) {
            const double diff = w[static_cast<size_t>(i)] - v[static_cast<size_t>(i)];
            delta += diff * diff;
        }
        v = w;
        if (std::sqrt(delta) < 1e-9) break;
    }
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        const double* row = c.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<size_t>(j)];
        lambda += v[static_cast<size_t>(i)] * s;
    }
    return lambda;
}

}  // namespace

Pca2d pca_2d(const std::vector<Vector>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw shape_error("pca_2d: need at least 2 points");
    const int d = points[0].dim();
    for (const auto& p : points)
        if (p.dim() != d) throw shape_error("pca_2d: inconsistent dimensions");

    std::vector<double> mean(static_cast<size_t>(d), 0.0);
    for (const auto& p : points)
        for (int i = 0; i < d; ++i) mean[static_cast<size_t>(i)] += static_cast<double>(p[i]);
    for (double& m : mean) m /= n;

    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> xt(static_cast<size_t>(d));
    double mean_sq = 0.0;
    for (double m : mean) mean_sq += m * m;
    for (const auto& p : points) {
        for (int i = 0; i < d; ++i) xt[static_cast<size_t>(i)] = static_cast<double>(p[i]) - mean[static_cast<size_t>(i)];
        for (int i = 0; i < d; ++i) {
            const double xi = xt[static_cast<size_t>(i)];
            double* row = cov.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) row[j] += xi * xt[static_cast<size_t>(j)];
        }
    }
    for (double& c : cov) c /= n;
    double trace = 0.0;
    for (int i = 0; i < d; ++i) trace += cov[static_cast<size_t>(i) * d + i];
    if (trace <= 1e-10 * std::max(1e-30, mean_sq) || trace <= 0.0)
        throw degenerate_error("pca_2d: all points identical (degenerate variance)");

    Pca2d out;
    out.total_variance = trace;
    std::vector<double> v1(static_cast<size_t>(d)), v2(static_cast<size_t>(d));
    out.eigenvalues[0] = power_iterate(cov, d, v1, nullptr);
    // Deflate and find the runner-up.
    std::vector<double> cov2 = cov;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            cov2[static_cast<size_t>(i) * d + j] -= out.eigenvalues[0] * v1[static_cast<size_t>(i)] * v1[static_cast<size_t>(j)];
    out.eigenvalues[1] = power_iterate(cov2, d, v2, &v1);

    out.components = Matrix(2, d);
    for (int j = 0; j < d; ++j) {
        out.components.at(0, j) = static_cast<float>(v1[static_cast<size_t>(j)]);
        out.components.at(1, j) = static_cast<float>(v2[static_cast<size_t>(j)]);
    }
    out.projection = Matrix(n, 2);
    for (int r = 0; r < n; ++r) {
        double p1 = 0.0, p2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double x = static_cast<double>(points[static_cast<size_t>(r)][j]) - mean[static_cast<size_t>(j)];
            p1 += x * v1[static_cast<size_t>(j)];
            p2 += x * v2[static_cast<size_t>(j)];
        }
        out.projection.at(r, 0) = static_cast<float>(p1);
        out.projection.at(r, 1) = static_cast<float>(p2);
    }
    return out;
}

Vector layernorm(const Vector& x, const Vector& gain, const Vector& bias, float eps) {
    const int d = x.dim();
    if (gain.dim() != d || bias.dim() != d) throw shape_error("layernorm: parameter dimension mismatch");
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += static_cast<double>(x[i]);
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
        const double t = static_cast<double>(x[i]) - mean;
        var += t * t;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    Vector out(d);
    for (int i = 0; i < d; ++i)
        out[i] = static_cast<float>((static_cast<double>(x[i]) - mean) * inv * gain[i] + bias[i]);
    return out;
}

float gelu_quick(float x) {
    const double xd = static_cast<double>(x);
    return static_cast<float>(xd / (1.0 + std::exp(-1.702 * xd)));
}

float gelu_exact(float x) {
    const double xd = static_cast<double>(x);
    return static_cast<float>(0.5 * xd * (1.0 + std::erf(xd / std::sqrt(2.0))));
}

double dot_f64(const float* a, const float* b, int n) {
#if defined(__AVX512F__)
    __m512d acc0 = _mm512_setzero_pd(), acc1 = _mm512_setzero_pd();
    int i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + i)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + i)), acc0);
        acc1 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + i + 8)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + i + 8)), acc1);
    }
    double s = _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
#else
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s = std::fma(static_cast<double>(a[i]), static_cast<double>(b[i]), s);
    return s;
#endif
}

double norm_f64(const float* a, int n) { return std::sqrt(dot_f64(a, a, n)); }

}  // namespace hg
