#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "irr/matrix.hpp"

namespace irr::linalg {

/// Thin SVD Z = U diag(σ) Vᵀ restricted to the numerical rank h.
/// `sigma(i)` follows the zero-padded convention: indices past the rank read as 0.
struct SvdResult {
    Matrix left;    ///< r×h, orthonormal columns
    Vector values;  ///< σ_1 ≥ … ≥ σ_h > 0
    Matrix right;   ///< s×h, orthonormal columns

    [[nodiscard]] std::size_t rank() const noexcept { return values.size(); }
    [[nodiscard]] double sigma(std::size_t i) const noexcept { return i < values.size() ? values[i] : 0.0; }
};

/// Singular values below this fraction of σ_1 are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

namespace detail {

struct JacobiColumns {
    std::vector<Vector> w;  // rotated working columns; their norms are the singular values
    std::vector<Vector> v;  // accumulated right rotations (columns)
};

// One-sided (Hestenes) Jacobi: rotates column pairs of `z` (cols ≤ rows) until
// they are mutually orthogonal. Implicitly diagonalizes the Gram matrix zᵀz.
inline JacobiColumns one_sided_jacobi(const Matrix& z) {
    const std::size_t r = z.rows(), s = z.cols();
    JacobiColumns out;
    out.w.assign(s, Vector(r));
    out.v.assign(s, Vector(s, 0.0));
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t i = 0; i < r; ++i) out.w[j][i] = z(i, j);
        out.v[j][j] = 1.0;
    }
    const double tol = 4.0 * DBL_EPSILON;
    constexpr int kMaxSweeps = 80;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < s; ++p) {
            for (std::size_t q = p + 1; q < s; ++q) {
                auto& wp = out.w[p];
                auto& wq = out.w[q];
                const double alpha = dot(wp, wp);
                const double beta = dot(wq, wq);
                const double gamma = dot(wp, wq);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (std::size_t i = 0; i < r; ++i) {
                    const double a = wp[i], b = wq[i];
                    wp[i] = c * a - sn * b;
                    wq[i] = sn * a + c * b;
                }
                auto& vp = out.v[p];
                auto& vq = out.v[q];
                for (std::size_t i = 0; i < s; ++i) {
                    const double a = vp[i], b = vq[i];
                    vp[i] = c * a - sn * b;
                    vq[i] = sn * a + c * b;
                }
            }
        }
        if (!rotated) break;
    }
    return out;
}

inline void require_usable(const Matrix& z, const char* who) {
    if (z.empty()) throw InvalidInput(std::string(who) + ": empty matrix");
    if (!z.all_finite()) throw InvalidInput(std::string(who) + ": non-finite entry");
}

// Modified Gram-Schmidt with one reorthogonalization pass, in place.
// Columns that collapse to zero are left as zero vectors.
inline void mgs_columns(std::vector<Vector>& cols) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i < j; ++i) axpy(-dot(cols[i], cols[j]), cols[i], cols[j]);
        const double n = norm2(cols[j]);
        if (n > 0.0) scale(cols[j], 1.0 / n);
    }
}

// Flip the sign of column j of `a` (and of `b` alongside) so that the
// largest-magnitude coordinate of a's column is positive.
inline void canonicalize_sign(Vector& a, Vector* b = nullptr) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < a.size(); ++i)
        if (std::abs(a[i]) > std::abs(a[arg])) arg = i;
    if (!a.empty() && a[arg] < 0.0) {
        scale(a, -1.0);
        if (b) scale(*b, -1.0);
    }
}

}  // namespace detail

/// Largest-magnitude coordinate positive.
inline void canonicalize_sign(Vector& v) { detail::canonicalize_sign(v); }

inline SvdResult svd(const Matrix& z) {
    detail::require_usable(z, "svd");
    const bool transposed = z.cols() > z.rows();
    auto jac = detail::one_sided_jacobi(transposed ? z.transpose() : z);

    const std::size_t s = jac.w.size();
    Vector norms(s);
    for (std::size_t j = 0; j < s; ++j) norms[j] = norm2(jac.w[j]);
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    const double top = s ? norms[order[0]] : 0.0;
    std::size_t h = 0;
    while (h < s && top > 0.0 && norms[order[h]] > kRankTolerance * top) ++h;

    std::vector<Vector> u(h), v(h);
    Vector sigma(h);
    for (std::size_t k = 0; k < h; ++k) {
        sigma[k] = norms[order[k]];
        u[k] = jac.w[order[k]];
        scale(u[k], 1.0 / sigma[k]);
        v[k] = jac.v[order[k]];
    }
    detail::mgs_columns(u);

    std::vector<Vector>& left = transposed ? v : u;
    std::vector<Vector>& right = transposed ? u : v;
    for (std::size_t k = 0; k < h; ++k) detail::canonicalize_sign(left[k], &right[k]);

    SvdResult res;
    res.values = std::move(sigma);
    res.left = h ? Matrix::from_columns(left) : Matrix(z.rows(), 0);
    res.right = h ? Matrix::from_columns(right) : Matrix(z.cols(), 0);
    return res;
}

/// All min(rows, cols) singular values, nonincreasing, including zeros.
inline Vector singular_values(const Matrix& z) {
    detail::require_usable(z, "singular_values");
    const bool transposed = z.cols() > z.rows();
    auto jac = detail::one_sided_jacobi(transposed ? z.transpose() : z);
    Vector out(jac.w.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = norm2(jac.w[j]);
    std::sort(out.begin(), out.end(), std::greater<>{});
    return out;
}

/// First `ell` left singular vectors as an orthonormal basis.
inline Matrix truncate_svd(const SvdResult& s, std::size_t ell) {
    if (ell < 1 || ell > s.rank())
        throw ParameterError("truncate_svd: ell must lie in [1, rank] (rank = " + std::to_string(s.rank()) + ")");
    return s.left.leading_cols(ell);
}

/// B Bᵀ X.
inline Matrix project(const Matrix& basis, const Matrix& x) {
    if (basis.rows() != x.rows()) throw DimensionMismatch("project: basis and matrix row counts differ");
    if (basis.cols() == 0) return Matrix(x.rows(), x.cols());
    return matmul(basis, matmul_tn(basis, x));
}

inline double frobenius_norm(const Matrix& z) {
    double s = 0.0;
    for (double x : z.data()) s += x * x;
    return std::sqrt(s);
}

/// Eigenvalues of a symmetric matrix, descending. Householder reduction to
/// tridiagonal form, then implicit QL with Wilkinson shifts.
inline Vector symmetric_eigenvalues(const Matrix& sym) {
    const std::size_t n = sym.rows();
    if (sym.cols() != n) throw DimensionMismatch("symmetric_eigenvalues: matrix not square");
    if (!sym.all_finite()) throw InvalidInput("symmetric_eigenvalues: non-finite entry");
    if (n == 0) return {};
    Matrix a = sym;
    Vector d(n), e(n, 0.0);

    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0;
        if (l > 0) {
            double sc = 0.0;
            for (std::size_t k = 0; k <= l; ++k) sc += std::abs(a(i, k));
            if (sc == 0.0) {
                e[i] = a(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    a(i, k) /= sc;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = sc * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                    e[j] = g / h;
                    f += e[j] * a(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = a(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
                }
            }
        } else {
            e[i] = a(i, l);
        }
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);

    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double tnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        tnorm = std::max(tnorm, std::abs(d[i]) + std::abs(e[i]) + (i > 0 ? std::abs(e[i - 1]) : 0.0));
    const double floor = DBL_EPSILON * tnorm;
    for (std::size_t l = 0; l < n; ++l) {
        for (int iter = 0;; ++iter) {
            std::size_t m = l;
            for (; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= DBL_EPSILON * dd || std::abs(e[m]) <= floor) break;
            }
            if (m == l) break;
            if (iter == 100) throw PreconditionError("symmetric_eigenvalues: no convergence");
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (std::size_t i = m; i-- > l;) {
                const double f = s * e[i], b = c * e[i];
                e[i + 1] = r = std::hypot(f, g);
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
}

/// ‖Z‖₂ of a symmetric matrix: largest eigenvalue magnitude.
inline double symmetric_spectral_norm(const Matrix& sym) {
    const Vector ev = symmetric_eigenvalues(sym);
    return ev.empty() ? 0.0 : std::max(std::abs(ev.front()), std::abs(ev.back()));
}

struct PowerOptions {
    double tolerance = 1e-13;  ///< on ‖Mx − λx‖ / λ
    std::size_t max_iterations = 10000;
};

struct PowerResult {
    double eigenvalue = 0.0;
    Vector vector;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Fixed pseudo-random unit vector; structured operators are unlikely to annihilate it.
inline Vector default_start(std::size_t n) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Vector x(n);
    for (auto& v : x) v = u(rng);
    return x;
}

/// Dominant eigenpair of a symmetric positive semidefinite operator given as a callable.
/// Starts from `start` if provided, otherwise default_start(n); if the start is
/// annihilated it falls back to e1, e2, … in turn.
template <typename Apply>
PowerResult power_iteration_psd(Apply&& apply, std::size_t n, const PowerOptions& opt = {},
                                std::optional<Vector> start = std::nullopt) {
    PowerResult res;
    if (n == 0) return res;
    Vector x = start && start->size() == n && norm2(*start) > 0.0 ? *start : default_start(n);
    scale(x, 1.0 / norm2(x));

    Vector y = apply(x);
    for (std::size_t fallback = 0; norm2(y) == 0.0; ++fallback) {
        if (fallback == n) {
            res.vector = x;
            res.converged = true;
            return res;  // the operator is zero
        }
        x.assign(n, 0.0);
        x[fallback] = 1.0;
        y = apply(x);
    }

    for (std::size_t it = 1;; ++it) {
        const double lambda = dot(x, y);
        double rsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) rsq += (y[i] - lambda * x[i]) * (y[i] - lambda * x[i]);
        res.eigenvalue = lambda;
        res.iterations = it;
        const double ny = norm2(y);
        if (std::sqrt(rsq) <= opt.tolerance * std::abs(lambda) || ny == 0.0) {
            res.converged = true;
            res.vector = x;
            return res;
        }
        if (it >= opt.max_iterations) {
            res.vector = x;
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
        y = apply(x);
    }
}

/// ‖Z‖₂ by power iteration on ZᵀZ.
inline double spectral_norm(const Matrix& z, const PowerOptions& opt = {}) {
    if (!z.all_finite()) throw InvalidInput("spectral_norm: non-finite entry");
    if (z.empty()) return 0.0;
    auto r = power_iteration_psd([&](const Vector& x) { return matvec_t(z, matvec(z, x)); }, z.cols(), opt);
    return std::sqrt(std::max(0.0, r.eigenvalue));
}

/// Maximum absolute deviation of BᵀB from the identity.
inline double orthonormality_error(const Matrix& b) {
    const Matrix g = matmul_tn(b, b);
    double e = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return e;
}

/// Orthonormal basis for the column span, dropping dependent columns.
inline Matrix orthonormalize(const Matrix& a, double drop_tol = 1e-10) {
    std::vector<Vector> kept;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        Vector c = a.col(j);
        const double n0 = norm2(c);
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& k : kept) axpy(-dot(k, c), k, c);
        const double n = norm2(c);
        if (n <= drop_tol * n0) continue;
        scale(c, 1.0 / n);
        kept.push_back(std::move(c));
    }
    return kept.empty() ? Matrix(a.rows(), 0) : Matrix::from_columns(kept);
}

struct CanonicalAngles {
    Vector angles;    ///< nonincreasing, in [0, π/2]
    double tan_norm;  ///< tan of the largest angle; +∞ when that angle is π/2
};

/// Principal angles between span(b1) and span(b2). Cosines come from σ(B1ᵀB2) and
/// sines from σ((I − B1B1ᵀ)B2) so that small angles keep full relative accuracy.
inline CanonicalAngles canonical_angles(const Matrix& b1, const Matrix& b2, double ortho_tol = 1e-8) {
    if (b1.rows() != b2.rows()) throw DimensionMismatch("canonical_angles: ambient dimensions differ");
    if (orthonormality_error(b1) > ortho_tol || orthonormality_error(b2) > ortho_tol)
        throw InvalidBasis("canonical_angles: basis columns are not orthonormal");
    const Matrix& big = b1.cols() >= b2.cols() ? b1 : b2;
    const Matrix& small = b1.cols() >= b2.cols() ? b2 : b1;
    const std::size_t q = small.cols();
    CanonicalAngles out{{}, 0.0};
    if (q == 0) return out;

    const Matrix c = matmul_tn(big, small);
    Vector cosines = singular_values(c);
    cosines.resize(q, 0.0);
    Vector sines = singular_values(small - matmul(big, c));
    sines.resize(q, 0.0);

    out.angles.resize(q);
    for (std::size_t i = 0; i < q; ++i) {
        // largest angle pairs the smallest cosine with the largest sine
        const double cs = std::clamp(cosines[q - 1 - i], 0.0, 1.0);
        const double sn = std::clamp(sines[i], 0.0, 1.0);
        out.angles[i] = std::atan2(sn, cs);
    }
    const double cmin = std::clamp(cosines[q - 1], 0.0, 1.0);
    const double smax = std::clamp(sines[0], 0.0, 1.0);
    out.tan_norm = cmin <= 1e-15 ? std::numeric_limits<double>::infinity() : smax / cmin;
    return out;
}

}  // namespace irr::linalg
