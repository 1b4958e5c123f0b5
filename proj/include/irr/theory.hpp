#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "irr/corpus.hpp"
#include "irr/linalg.hpp"

namespace irr::theory {

// ---------------------------------------------------------------------------
// Topic statistics

struct TopicStats {
    std::vector<double> dominances;  ///< Δ_t, nonincreasing
    double mingling = 0.0;           ///< μ(C)
    double nonuniformity_true = 0.0;  ///< Δ_max / Δ_min
    double f_estimate = 0.0;          ///< Σ Δ_t⁴ / n²
    std::size_t n = 0;
};

inline TopicStats topic_stats(const corpus::TopicModel& tm) {
    tm.validate();
    const std::size_t k = tm.num_topics(), n = tm.num_docs();
    const Matrix sp = matmul(tm.relevance, tm.relevance.transpose());  // k×k
    TopicStats st;
    st.n = n;
    double off = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        st.dominances.push_back(std::sqrt(sp(t, t)));
        for (std::size_t u = 0; u < k; ++u)
            if (u != t) off += sp(t, u) * sp(t, u);
    }
    std::sort(st.dominances.begin(), st.dominances.end(), std::greater<>());
    st.mingling = std::sqrt(off);
    const double dmin = st.dominances.back();
    st.nonuniformity_true = dmin > 0.0 ? st.dominances.front() / dmin : std::numeric_limits<double>::infinity();
    for (double d : st.dominances) st.f_estimate += std::pow(d, 4);
    st.f_estimate /= static_cast<double>(n) * static_cast<double>(n);
    return st;
}

/// S′[t1,t2] = Σ_d ρ(t1,d)ρ(t2,d), zero-padded to n×n.
inline Matrix s_prime_matrix(const corpus::TopicModel& tm) {
    const std::size_t k = tm.num_topics(), n = tm.num_docs();
    if (k > n) throw ParameterError("s_prime_matrix: more topics than documents");
    const Matrix sp = matmul(tm.relevance, tm.relevance.transpose());
    Matrix out(n, n);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) out(a, b) = sp(a, b);
    return out;
}

// ---------------------------------------------------------------------------
// Deviation error and the optimum-subspace oracle

/// S − P(A)ᵀP(A) with P the orthogonal projector onto span(basis).
inline Matrix deviation_matrix(const Matrix& s, const Matrix& a, const Matrix& basis) {
    if (s.rows() != a.cols() || s.cols() != a.cols()) throw DimensionMismatch("deviation: S must be n×n");
    if (basis.cols() > 0 && basis.rows() != a.rows()) throw DimensionMismatch("deviation: basis rows differ from terms");
    if (basis.cols() == 0) return s;
    const Matrix g = matmul_tn(basis, a);  // h×n coordinates of the projections
    return s - matmul_tn(g, g);
}

/// ‖E(X)‖₂.
inline double deviation_error(const Matrix& s, const Matrix& a, const Matrix& basis) {
    return linalg::symmetric_spectral_norm(deviation_matrix(s, a, basis));
}

struct OptimumSubspaceResult {
    Matrix basis;  ///< m×h, orthonormal
    double eps_opt = 0.0;
    bool is_exact = false;
    std::size_t h = 0;
};

struct OptimumSearchOptions {
    std::size_t enumerate_limit = 500;  ///< enumerate every subset when C(r,h) is at most this
    std::size_t pool_extra = 4;         ///< otherwise subsets of the top h+pool_extra singular vectors
    std::size_t complement_extra = 6;   ///< complement directions used by the rotation search
    double initial_step = 0.2;
    double min_step = 1e-3;
    double min_improvement = 1e-8;
    std::size_t max_sweeps = 60;
};

namespace detail {

inline double binomial(std::size_t r, std::size_t h) {
    double c = 1.0;
    for (std::size_t i = 1; i <= h; ++i) c = c * static_cast<double>(r - h + i) / static_cast<double>(i);
    return c;
}

template <typename F>
void for_each_subset(std::size_t pool, std::size_t h, F&& f) {
    std::vector<std::size_t> idx(h);
    for (std::size_t i = 0; i < h; ++i) idx[i] = i;
    for (;;) {
        f(idx);
        std::size_t i = h;
        while (i > 0 && idx[i - 1] == pool - h + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < h; ++j) idx[j] = idx[j - 1] + 1;
    }
}

// Objective in range(A) coordinates: E = S − G Gᵀ with G = M Q, M = VΣ (n×r).
struct CoordinateProblem {
    const Matrix& s;
    Matrix m;  // n×r
    Matrix u;  // m×r, left singular vectors

    [[nodiscard]] double exact(const Matrix& g) const {
        return linalg::symmetric_spectral_norm(s - matmul(g, g.transpose()));
    }
};

inline Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(x.rows(), idx.size());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = x(i, idx[j]);
    return out;
}

// Complete an r×h orthonormal Q to an r×(h+c) frame using coordinate axes in order.
inline Matrix frame(const Matrix& q, std::size_t c) {
    const std::size_t r = q.rows(), h = q.cols();
    std::vector<Vector> cols;
    for (std::size_t j = 0; j < h; ++j) cols.push_back(q.col(j));
    for (std::size_t e = 0; e < r && cols.size() < h + c; ++e) {
        Vector v(r, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& w : cols) axpy(-dot(w, v), w, v);
        const double nv = norm2(v);
        if (nv < 1e-8) continue;
        scale(v, 1.0 / nv);
        cols.push_back(std::move(v));
    }
    return Matrix::from_columns(cols);
}

inline void rotate_columns(Matrix& x, std::size_t a, std::size_t b, double c, double s) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double xa = x(i, a), xb = x(i, b);
        x(i, a) = c * xa + s * xb;
        x(i, b) = -s * xa + c * xb;
    }
}

// Givens-rotation descent between the first h frame columns and the rest.
inline Matrix refine(const CoordinateProblem& p, const Matrix& q, const OptimumSearchOptions& opt) {
    const std::size_t h = q.cols(), r = q.rows();
    if (h == r) return q;
    Matrix f = frame(q, std::min(r - h, h + opt.complement_extra));
    Matrix mf = matmul(p.m, f);
    const std::size_t w = f.cols();
    double cur = p.exact(mf.leading_cols(h));
    double step = opt.initial_step;
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        const double start = cur;
        for (std::size_t a = 0; a < h; ++a)
            for (std::size_t b = h; b < w; ++b)
                for (double sign : {1.0, -1.0}) {
                    const double c = std::cos(sign * step), s = std::sin(sign * step);
                    rotate_columns(mf, a, b, c, s);
                    const double v = p.exact(mf.leading_cols(h));
                    if (v < cur) {
                        cur = v;
                        rotate_columns(f, a, b, c, s);
                        break;
                    }
                    rotate_columns(mf, a, b, c, -s);
                }
        if (start - cur < opt.min_improvement) {
            if (step <= opt.min_step) break;
            step /= 2.0;
        }
    }
    return f.leading_cols(h);
}

}  // namespace detail

/// Approximate argmin of ‖E(X)‖₂ over subspaces X ⊆ range(A) with 1 ≤ dim X ≤ h_max.
/// Candidates: subsets of A's left singular vectors plus an optional hint basis, each
/// dimension's best then refined by Givens rotations. Ties go to the smallest dimension.
inline OptimumSubspaceResult optimum_subspace(const Matrix& s, const Matrix& a, std::size_t h_max,
                                              const std::optional<Matrix>& hint = std::nullopt,
                                              const OptimumSearchOptions& opt = {}) {
    if (s.rows() != a.cols() || s.cols() != a.cols()) throw DimensionMismatch("optimum_subspace: S must be n×n");
    const auto sv = linalg::svd(a);
    const std::size_t r = sv.rank();
    if (h_max == 0 || h_max > r) throw ParameterError("optimum_subspace: h_max must lie in [1, rank(A)]");

    detail::CoordinateProblem p{s, Matrix(a.cols(), r), sv.left.leading_cols(r)};
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < r; ++j) p.m(i, j) = sv.right(i, j) * sv.values[j];

    OptimumSubspaceResult best;
    best.eps_opt = std::numeric_limits<double>::infinity();
    const double tie = 1e-10 * std::max(1.0, linalg::symmetric_spectral_norm(s));

    for (std::size_t h = 1; h <= h_max; ++h) {
        const bool all = detail::binomial(r, h) <= static_cast<double>(opt.enumerate_limit);
        const std::size_t pool = all ? r : std::min(r, h + opt.pool_extra);
        Matrix q_best;
        double v_best = std::numeric_limits<double>::infinity();
        detail::for_each_subset(pool, h, [&](const std::vector<std::size_t>& idx) {
            const double v = p.exact(detail::select_columns(p.m, idx));
            if (v < v_best) {
                v_best = v;
                q_best = Matrix(r, h);
                for (std::size_t j = 0; j < h; ++j) q_best(idx[j], j) = 1.0;
            }
        });
        if (hint && hint->cols() >= h && hint->rows() == a.rows()) {
            const Matrix qh = linalg::orthonormalize(matmul_tn(p.u, hint->leading_cols(h)));
            if (qh.cols() == h) {
                const double v = p.exact(matmul(p.m, qh));
                if (v < v_best) v_best = v, q_best = qh;
            }
        }
        const Matrix q_ref = detail::refine(p, q_best, opt);
        const double v_ref = p.exact(matmul(p.m, q_ref));
        if (v_ref < v_best) v_best = v_ref, q_best = q_ref;

        if (v_best < best.eps_opt - tie) {
            best.eps_opt = v_best;
            best.h = h;
            best.basis = linalg::orthonormalize(matmul(p.u, q_best));
        }
    }
    best.eps_opt = deviation_error(s, a, best.basis);
    return best;
}

// ---------------------------------------------------------------------------
// Synthetic instances with known structure

struct Instance {
    corpus::TopicModel topics;
    Matrix a;            ///< m×n, unit columns
    Matrix s;            ///< n×n true similarities
    Matrix topic_vectors;  ///< m×k orthonormal
    OptimumSubspaceResult opt;
    double noise = 0.0;
    std::uint64_t seed = 0;
};

/// Document d = Σ_t ρ(t,d) u_t for random orthonormal u_t, plus a random vector of
/// norm `noise`, then renormalized. With noise = 0 the optimum is range(A) exactly.
inline Instance construct_ideal_instance(const corpus::TopicModel& tm, std::size_t m, double noise,
                                         std::uint64_t seed, std::optional<std::size_t> h_max = std::nullopt) {
    tm.validate();
    const std::size_t k = tm.num_topics(), n = tm.num_docs();
    if (m < k) throw ParameterError("construct_ideal_instance: need m >= number of topics");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ParameterError("construct_ideal_instance: noise must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix g(m, k);
    for (double& x : g.data()) x = gauss(rng);
    Instance out;
    out.topics = tm;
    out.noise = noise;
    out.seed = seed;
    out.topic_vectors = linalg::orthonormalize(g);
    if (out.topic_vectors.cols() != k) throw PreconditionError("construct_ideal_instance: degenerate topic draw");

    out.a = matmul(out.topic_vectors, tm.relevance);
    if (noise > 0.0) {
        for (std::size_t d = 0; d < n; ++d) {
            Vector e(m);
            for (double& x : e) x = gauss(rng);
            scale(e, noise / norm2(e));
            Vector c = out.a.col(d);
            axpy(1.0, e, c);
            scale(c, 1.0 / norm2(c));
            out.a.set_col(d, c);
        }
    }
    out.s = corpus::similarity_matrix(tm).matrix;

    if (noise == 0.0) {
        const auto sv = linalg::svd(out.a);
        out.opt.basis = sv.left.leading_cols(sv.rank());
        out.opt.h = sv.rank();
        out.opt.eps_opt = 0.0;
        out.opt.is_exact = true;
    } else {
        const std::size_t rank = linalg::svd(out.a).rank();
        out.opt = optimum_subspace(out.s, out.a, std::min(h_max.value_or(k), rank), out.topic_vectors);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification reports

struct TheoremReport {
    std::string check;
    std::map<std::string, double> quantities;
    bool condition = true;   ///< hypothesis satisfied
    bool comparable = true;  ///< measured value finite
    bool holds = true;

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["check"] = check;
        for (const auto& [k, v] : quantities) j[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
        j["condition"] = condition;
        j["comparable"] = comparable;
        j["holds"] = holds;
        return j;
    }
};

inline void write_jsonl(std::ostream& os, const std::vector<TheoremReport>& reports) {
    for (const auto& r : reports) os << r.to_json().dump() << '\n';
}

/// |σ̂_i² − Δ_i²| ≤ ε_opt + μ for i ≤ k, σ̂ the singular values of the projection onto the optimum.
inline TheoremReport verify_theorem1(const Instance& in, double slack = 1e-8) {
    const auto st = topic_stats(in.topics);
    const Vector sh = in.opt.basis.cols() ? linalg::singular_values(matmul_tn(in.opt.basis, in.a)) : Vector{};
    TheoremReport rep;
    rep.check = "theorem1";
    rep.quantities["eps_opt"] = in.opt.eps_opt;
    rep.quantities["mingling"] = st.mingling;
    rep.quantities["h"] = static_cast<double>(in.opt.h);
    rep.quantities["is_exact"] = in.opt.is_exact;
    double worst = 0.0;
    for (std::size_t i = 0; i < st.dominances.size(); ++i) {
        const double s2 = i < sh.size() ? sh[i] * sh[i] : 0.0;
        const double d2 = st.dominances[i] * st.dominances[i];
        rep.quantities["sigma_hat_sq_" + std::to_string(i + 1)] = s2;
        rep.quantities["dominance_sq_" + std::to_string(i + 1)] = d2;
        worst = std::max(worst, std::abs(s2 - d2));
    }
    rep.quantities["measured"] = worst;
    rep.quantities["bound"] = in.opt.eps_opt + st.mingling;
    rep.holds = worst <= in.opt.eps_opt + st.mingling + slack;
    return rep;
}

/// Tangent bound between the h-dimensional LSI subspace and the optimum, plus the
/// intermediate claims ε̃₀ ∈ ε₀ ± ε_opt and σ_{h+1}(A) ≤ √ε̃₀.
inline TheoremReport verify_theorem2(const Instance& in, double slack = 1e-6) {
    TheoremReport rep;
    rep.check = "theorem2";
    const std::size_t h = in.opt.h;
    const Matrix& b = in.opt.basis;
    const Matrix dbar = in.a - linalg::project(b, in.a);
    const double eps_tilde = std::pow(linalg::singular_values(dbar).front(), 2);
    const double eps0 = linalg::symmetric_spectral_norm(in.s - matmul_tn(in.a, in.a));
    const auto sa = linalg::svd(in.a);
    const Vector sh = linalg::singular_values(matmul_tn(b, in.a));
    const double dmax = sh.front(), dmin = sh[h - 1];
    const double sigma_next = sa.sigma(h);

    rep.quantities["h"] = static_cast<double>(h);
    rep.quantities["eps_opt"] = in.opt.eps_opt;
    rep.quantities["is_exact"] = in.opt.is_exact;
    rep.quantities["eps0"] = eps0;
    rep.quantities["eps0_tilde"] = eps_tilde;
    rep.quantities["delta_hat_max"] = dmax;
    rep.quantities["delta_hat_min"] = dmin;
    rep.quantities["sigma_h_plus_1"] = sigma_next;

    const bool claim_eps = std::abs(eps_tilde - eps0) <= in.opt.eps_opt + slack;
    const bool claim_sigma = sigma_next <= std::sqrt(eps_tilde) + slack;
    rep.quantities["claim_eps_tilde"] = claim_eps;
    rep.quantities["claim_sigma_next"] = claim_sigma;
    rep.holds = claim_eps && claim_sigma;

    rep.condition = dmin > std::sqrt(eps_tilde);
    if (!rep.condition) return rep;
    const double x = std::sqrt(eps_tilde) / dmin;
    const double bound = (dmax / dmin) * x / (1.0 - x * x);
    const double tan = linalg::canonical_angles(sa.left.leading_cols(h), b).tan_norm;
    rep.quantities["bound"] = bound;
    rep.quantities["measured"] = tan;
    rep.comparable = std::isfinite(tan);
    rep.holds = rep.holds && rep.comparable && tan <= bound + slack;
    return rep;
}

/// (sim − ε)/(1+ε) ≤ cos ≤ (sim + ε)/(1−ε) for every pair, ε = max |E_ij| at `basis`.
inline TheoremReport verify_cosine_bound(const Instance& in, const Matrix& basis, double slack = 1e-9) {
    TheoremReport rep;
    rep.check = "cosine_bound";
    const Matrix e = deviation_matrix(in.s, in.a, basis);
    const double eps = max_abs(e);
    rep.quantities["eps"] = eps;
    if (eps >= 1.0) {
        rep.condition = false;
        return rep;
    }
    const Matrix g = basis.cols() ? matmul_tn(basis, in.a) : Matrix(0, in.a.cols());
    const auto norms = column_norms(g);
    std::size_t violations = 0, below_eps = 0, corrected = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < in.a.cols(); ++i)
        for (std::size_t j = i + 1; j < in.a.cols(); ++j) {
            if (norms[i] == 0.0 || norms[j] == 0.0) {
                rep.comparable = false;
                continue;
            }
            double ip = 0.0;
            for (std::size_t r = 0; r < g.rows(); ++r) ip += g(r, i) * g(r, j);
            const double cs = ip / (norms[i] * norms[j]);
            const double sim = in.s(i, j);
            const double lo = (sim - eps) / (1.0 + eps), hi = (sim + eps) / (1.0 - eps);
            const double over = std::max(lo - cs, cs - hi);
            worst = std::max(worst, over);
            if (over > slack) {
                ++violations;
                if (sim < eps) ++below_eps;
            }
            // A negative numerator pairs with the smallest denominator 1 − ε.
            const double lo_fixed = sim >= eps ? lo : (sim - eps) / (1.0 - eps);
            if (std::max(lo_fixed - cs, cs - hi) > slack) ++corrected;
        }
    rep.quantities["violations"] = static_cast<double>(violations);
    rep.quantities["violations_sim_below_eps"] = static_cast<double>(below_eps);
    rep.quantities["violations_corrected_lower"] = static_cast<double>(corrected);
    rep.quantities["worst_excess"] = worst;
    rep.holds = violations == 0;
    return rep;
}

struct PerturbationSummary {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
};

/// |σ_i(X1) − σ_i(X2)| ≤ ‖X1 − X2‖₂ ≤ ‖X1 − X2‖_F on random pairs up to 20×15.
inline PerturbationSummary verify_sv_perturbation(std::size_t trials, std::uint64_t seed, double slack = 1e-10) {
    if (trials == 0) throw ParameterError("verify_sv_perturbation: trials must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> cols(1, 15);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), mag(-6.0, 1.0);
    PerturbationSummary out;
    out.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t sdim = cols(rng);
        const std::size_t rdim = std::uniform_int_distribution<std::size_t>(sdim, 20)(rng);
        Matrix x1(rdim, sdim), e(rdim, sdim);
        for (double& v : x1.data()) v = unit(rng);
        const double size = std::pow(10.0, mag(rng));
        if (t % 4 == 1) {  // rank-one perturbation
            Vector u(rdim), v(sdim);
            for (double& z : u) z = unit(rng);
            for (double& z : v) z = unit(rng);
            for (std::size_t i = 0; i < rdim; ++i)
                for (std::size_t j = 0; j < sdim; ++j) e(i, j) = size * u[i] * v[j];
        } else {
            for (double& z : e.data()) z = size * unit(rng);
        }
        const Matrix x2 = x1 + e;
        const Vector s1 = linalg::singular_values(x1), s2 = linalg::singular_values(x2);
        const double e2 = linalg::singular_values(e).front(), ef = linalg::frobenius_norm(e);
        double excess = e2 - ef;
        for (std::size_t i = 0; i < s1.size(); ++i) excess = std::max(excess, std::abs(s1[i] - s2[i]) - e2);
        out.worst_excess = std::max(out.worst_excess, excess);
        if (excess > slack) ++out.violations;
    }
    return out;
}

}  // namespace irr::theory
