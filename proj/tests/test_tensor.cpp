#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hg/rng.hpp"
#include "hg/tensor.hpp"

using namespace hg;

namespace {

Matrix random_matrix(Lcg64& rng, int r, int c, float scale = 1.0f) {
    Matrix m(r, c);
    for (float& v : m.data) v = rng.next_symmetric() * scale;
    return m;
}

double max_rel_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double denom = std::max(1.0, std::abs(static_cast<double>(b.data[i])));
        worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]) / denom);
    }
    return worst;
}

// Jacobi eigensolver for small symmetric matrices: the independent oracle
// behind the pca_2d explained-variance check.
std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p * n + q]) < 1e-30) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = a[i * n + i];
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

}  // namespace

TEST_CASE("matmul identity cases") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix c = matmul(a, Matrix::identity(2));
    CHECK(c.data == a.data);

    const Matrix b(2, 1, {5, 7});
    const Matrix c2 = matmul(Matrix::identity(2), b);
    CHECK(c2.data == b.data);
}

TEST_CASE("matmul hand arithmetic") {
    const Matrix c = matmul(Matrix(2, 2, {1, 2, 3, 4}), Matrix(2, 1, {2, 1}));
    CHECK(c.at(0, 0) == doctest::Approx(4).epsilon(1e-7));
    CHECK(c.at(1, 0) == doctest::Approx(10).epsilon(1e-7));
}

TEST_CASE("matmul shape error") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 2)), shape_error);
}

TEST_CASE("matmul associativity on random triples") {
    Lcg64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix a = random_matrix(rng, 8, 8);
        const Matrix b = random_matrix(rng, 8, 8);
        const Matrix c = random_matrix(rng, 8, 8);
        CHECK(max_rel_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-4);
    }
}

TEST_CASE("matmul matches ordered f64 reference on odd shapes") {
    Lcg64 rng(12);
    const int m = 11, k = 29, n = 23;
    const Matrix a = random_matrix(rng, m, k);
    const Matrix b = random_matrix(rng, k, n);
    const Matrix c = matmul(a, b);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk)
                s += static_cast<double>(a.at(i, kk)) * static_cast<double>(b.at(kk, j));
            CHECK(c.at(i, j) == doctest::Approx(static_cast<float>(s)).epsilon(1e-6));
        }
}

TEST_CASE("softmax symmetric and masked rows") {
    const Matrix m(2, 2, {0, 0, 1000, kMaskLogit});
    const Matrix s = softmax_rows(m);
    CHECK(s.at(0, 0) == doctest::Approx(0.5));
    CHECK(s.at(0, 1) == doctest::Approx(0.5));
    CHECK(s.at(1, 0) == doctest::Approx(1.0));
    CHECK(s.at(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("softmax closed form") {
    const Matrix m(1, 2, {std::log(1.0f), std::log(3.0f)});
    const Matrix s = softmax_rows(m);
    CHECK(s.at(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(s.at(0, 1) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one and are permutation equivariant") {
    Lcg64 rng(13);
    Matrix m = random_matrix(rng, 6, 9, 3.0f);
    const Matrix s = softmax_rows(m);
    for (int i = 0; i < s.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < s.cols; ++j) sum += static_cast<double>(s.at(i, j));
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    Matrix m2 = m;
    for (int i = 0; i < m.rows; ++i) std::swap(m2.at(i, 2), m2.at(i, 5));
    const Matrix s2 = softmax_rows(m2);
    for (int i = 0; i < s.rows; ++i) {
        CHECK(s2.at(i, 2) == s.at(i, 5));
        CHECK(s2.at(i, 5) == s.at(i, 2));
    }
}

TEST_CASE("softmax fully masked row raises") {
    CHECK_THROWS_AS(softmax_rows(Matrix(1, 3, {kMaskLogit, kMaskLogit, kMaskLogit})), shape_error);
}

TEST_CASE("solve_spd identity and hand cases") {
    const Vector x = solve_spd(Matrix::identity(2), {3, 4}, 0.0);
    CHECK(x[0] == doctest::Approx(3));
    CHECK(x[1] == doctest::Approx(4));

    const Vector y = solve_spd(Matrix(2, 2, {4, 0, 0, 0}), {0, 2}, 1.0);
    CHECK(y[0] == doctest::Approx(0));
    CHECK(y[1] == doctest::Approx(2));

    // Cramer: [[2,1],[1,2]] x = (3,3) -> (1,1).
    const Vector z = solve_spd(Matrix(2, 2, {2, 1, 1, 2}), {3, 3}, 0.0);
    CHECK(z[0] == doctest::Approx(1).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(1).epsilon(1e-6));
}

TEST_CASE("solve_spd residual bound on random SPD systems") {
    Lcg64 rng(17);
    for (int n : {4, 16, 64}) {
        const Matrix b_mat = random_matrix(rng, n, n);
        Matrix a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                double s = (i == j) ? 0.1 : 0.0;
                for (int k = 0; k < n; ++k)
                    s += static_cast<double>(b_mat.at(k, i)) * b_mat.at(k, j);
                a.at(i, j) = a.at(j, i) = static_cast<float>(s);
            }
        Vector rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = rng.next_symmetric();
        const Vector x = solve_spd(a, rhs, 0.0);
        double res = 0.0, bn = 0.0;
        for (int i = 0; i < n; ++i) {
            double ax = 0.0;
            for (int j = 0; j < n; ++j) ax += static_cast<double>(a.at(i, j)) * x[j];
            res += (ax - rhs[i]) * (ax - rhs[i]);
            bn += static_cast<double>(rhs[i]) * rhs[i];
        }
        CHECK(std::sqrt(res) <= 1e-5 * std::sqrt(bn));
    }
}

TEST_CASE("solve_spd error paths") {
    CHECK_THROWS_AS(solve_spd(Matrix(2, 2, {1, 2, 3, 4}), {1, 1}, 0.0), shape_error);
    CHECK_THROWS_AS(solve_spd(Matrix(2, 2, {0, 0, 0, 0}), {1, 1}, 0.0), singular_error);
    CHECK_THROWS_AS(solve_spd(Matrix(2, 3), {1, 1}, 0.0), shape_error);
}

TEST_CASE("pca_2d one-dimensional spread") {
    const Pca2d p = pca_2d({{-1, 0}, {1, 0}, {2, 0}});
    CHECK(std::abs(p.components.at(0, 0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.components.at(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("pca_2d isotropic cross captures all variance") {
    const Pca2d p = pca_2d({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
    double proj_var = 0.0;
    for (int i = 0; i < p.projection.rows; ++i)
        for (int j = 0; j < 2; ++j)
            proj_var += static_cast<double>(p.projection.at(i, j)) * p.projection.at(i, j);
    proj_var /= p.projection.rows;
    CHECK(proj_var == doctest::Approx(p.total_variance).epsilon(1e-6));
}

TEST_CASE("pca_2d matches full eigensolve oracle on a random cloud") {
    Lcg64 rng(23);
    std::vector<Vector> pts;
    for (int i = 0; i < 50; ++i) {
        Vector v(8);
        for (int j = 0; j < 8; ++j) v[j] = rng.next_symmetric() * (1.0f + 0.3f * j);
        pts.push_back(v);
    }
    const Pca2d p = pca_2d(pts);

    const int d = 8, n = 50;
    std::vector<double> mean(d, 0.0);
    for (const auto& v : pts)
        for (int j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += v[j];
    for (double& m : mean) m /= n;
    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    for (const auto& v : pts)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                cov[static_cast<size_t>(i) * d + j] +=
                    (v[i] - mean[static_cast<size_t>(i)]) * (v[j] - mean[static_cast<size_t>(j)]);
    for (double& c : cov) c /= n;
    const std::vector<double> ev = jacobi_eigenvalues(cov, d);

    CHECK(p.eigenvalues[0] == doctest::Approx(ev[0]).epsilon(1e-6));
    CHECK(p.eigenvalues[1] == doctest::Approx(ev[1]).epsilon(1e-6));

    double n1 = 0, n2 = 0, dp = 0;
    for (int j = 0; j < d; ++j) {
        n1 += static_cast<double>(p.components.at(0, j)) * p.components.at(0, j);
        n2 += static_cast<double>(p.components.at(1, j)) * p.components.at(1, j);
        dp += static_cast<double>(p.components.at(0, j)) * p.components.at(1, j);
    }
    CHECK(n1 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(dp) < 1e-6);

    double proj_var = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j)
            proj_var += static_cast<double>(p.projection.at(i, j)) * p.projection.at(i, j);
    proj_var /= n;
    CHECK(proj_var <= p.total_variance * (1 + 1e-9));
}

TEST_CASE("pca_2d degenerate and shape errors") {
    CHECK_THROWS_AS(pca_2d({{1, 1}, {1, 1}, {1, 1}}), degenerate_error);
    CHECK_THROWS_AS(pca_2d({{1, 1}}), shape_error);
    CHECK_THROWS_AS(pca_2d({{1, 1}, {1, 1, 1}}), shape_error);
}

TEST_CASE("layernorm identity, zero and hand cases") {
    const Vector gain{1, 1};
    const Vector bias{0, 0};
    const Vector y = layernorm({1, -1}, gain, bias, 0.0f);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(-1.0).epsilon(1e-6));
    // Constant input maps to the bias.
    const Vector z = layernorm({5, 5}, gain, {2, 3}, 1e-5f);
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(3.0));
    // x=(0,2): mean 1, std 1, gain 2 -> (-2, 2).
    const Vector w = layernorm({0, 2}, {2, 2}, bias, 0.0f);
    CHECK(w[0] == doctest::Approx(-2.0).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK_THROWS_AS(layernorm({1, 2, 3}, gain, bias, 0.0f), shape_error);
}

TEST_CASE("gelu values") {
    CHECK(gelu_quick(0.0f) == 0.0f);
    const double expect = 1.0 / (1.0 + std::exp(-1.702));
    CHECK(gelu_quick(1.0f) == doctest::Approx(expect).epsilon(1e-6));
    CHECK(gelu_quick(-30.0f) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(gelu_exact(0.0f) == 0.0f);
    CHECK(gelu_exact(2.0f) ==
          doctest::Approx(2.0 * 0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0)))));
}

TEST_CASE("dot_f64 matches scalar reference") {
    Lcg64 rng(29);
    std::vector<float> a(137), b(137);
    for (auto& v : a) v = rng.next_symmetric();
    for (auto& v : b) v = rng.next_symmetric();
    double ref = 0.0;
    for (size_t i = 0; i < a.size(); ++i) ref += static_cast<double>(a[i]) * b[i];
    CHECK(dot_f64(a.data(), b.data(), 137) == doctest::Approx(ref).epsilon(1e-12));
}
