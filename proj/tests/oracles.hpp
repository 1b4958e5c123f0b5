#pragma once

// Test-only reference computations. Nothing here calls into the library's
// decomposition routines, so they can be used to check them.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "irr/matrix.hpp"

namespace oracle {

using irr::Matrix;
using irr::Vector;

struct Eigen {
    Vector values;  // descending
    Matrix vectors; // columns
};

// Classical two-sided cyclic Jacobi eigen-solver for a symmetric matrix.
inline Eigen symmetric_eigen(Matrix a) {
    const std::size_t n = a.rows();
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    Eigen e{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        e.values[k] = a(idx[k], idx[k]);
        for (std::size_t i = 0; i < n; ++i) e.vectors(i, k) = v(i, idx[k]);
    }
    return e;
}

// Singular values via eigenvalues of the Gram matrix ZᵀZ (sqrt, clamped at 0).
inline Vector gram_singular_values(const Matrix& z) {
    const Matrix g = irr::matmul_tn(z, z);
    auto e = symmetric_eigen(g);
    Vector s;
    for (double l : e.values) s.push_back(std::sqrt(std::max(0.0, l)));
    return s;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(r, c);
    for (double& x : m.data()) x = d(rng);
    return m;
}

inline Matrix random_nonneg_unit_columns(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    Matrix m = random_matrix(r, c, rng, 0.0, 1.0);
    for (std::size_t j = 0; j < c; ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < r; ++i) n += m(i, j) * m(i, j);
        n = std::sqrt(n);
        for (std::size_t i = 0; i < r; ++i) m(i, j) /= n;
    }
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
    return d;
}

inline double fro(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

}  // namespace oracle
