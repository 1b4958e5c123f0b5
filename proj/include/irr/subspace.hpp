#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "irr/corpus.hpp"
#include "irr/linalg.hpp"

namespace irr::subspace {

enum class Method { VSM, LSI, IRR };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::VSM: return "vsm";
        case Method::LSI: return "lsi";
        case Method::IRR: return "irr";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "vsm") return Method::VSM;
    if (s == "lsi") return Method::LSI;
    if (s == "irr") return Method::IRR;
    throw ParameterError("unknown method '" + s + "'");
}

struct SubspaceBasis {
    Matrix basis;  ///< m×ℓ, orthonormal columns
    Method method = Method::LSI;
    double q = 0.0;
    /// ‖R‖_F²/n before each iteration and after the last (ℓ+1 entries). Empty for VSM.
    std::vector<double> residual_ratios;
    bool truncated = false;  ///< residuals vanished before the requested ℓ
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] std::size_t ell() const noexcept { return basis.cols(); }
};

struct AutoScale {};
struct ResidualRatio {
    double theta;
};

struct IrrConfig {
    std::variant<double, AutoScale> q = 0.0;
    std::variant<std::size_t, ResidualRatio> ell = std::size_t{1};
    double alpha = 3.5;
    double beta = 0.0;

    void validate() const {
        if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ParameterError("IrrConfig: alpha/beta not finite");
        if (const double* q0 = std::get_if<double>(&q); q0 && !(std::isfinite(*q0) && *q0 >= 0.0))
            throw ParameterError("IrrConfig: q must be finite and >= 0");
        if (const auto* l = std::get_if<std::size_t>(&ell); l && *l == 0)
            throw ParameterError("IrrConfig: ell must be >= 1");
        if (const auto* t = std::get_if<ResidualRatio>(&ell); t && !(t->theta > 0.0 && t->theta < 1.0))
            throw ParameterError("IrrConfig: theta must lie in (0,1)");
    }
};

/// ‖r‖^q · r.
inline Vector rescale(std::span<const double> r, double q) {
    if (!(q >= 0.0) || !std::isfinite(q)) throw ParameterError("rescale: q must be finite and >= 0");
    const double n = norm2(r);
    Vector out(r.begin(), r.end());
    if (n == 0.0 || q == 0.0) return out;
    scale(out, std::pow(n, q));
    return out;
}

/// f(A) = (‖AᵀA‖_F / n)², then q = max(0, αf + β).
inline double auto_scale(const Matrix& a, double alpha = 3.5, double beta = 0.0) {
    if (a.empty()) throw InvalidInput("auto_scale: empty matrix");
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ParameterError("auto_scale: alpha/beta not finite");
    const double f = std::pow(linalg::frobenius_norm(matmul_tn(a, a)) / static_cast<double>(a.cols()), 2);
    return std::max(0.0, alpha * f + beta);
}
inline double auto_scale(const corpus::TermDocumentMatrix& a, double alpha = 3.5, double beta = 0.0) {
    return auto_scale(a.matrix, alpha, beta);
}

/// Identity basis; represent() passes documents through unchanged.
inline SubspaceBasis vsm(const Matrix& a) {
    SubspaceBasis s;
    s.basis = Matrix::identity(a.rows());
    s.method = Method::VSM;
    return s;
}

inline SubspaceBasis lsi(const Matrix& a, std::size_t ell) {
    const auto s = linalg::svd(a);
    SubspaceBasis out;
    out.basis = linalg::truncate_svd(s, ell);
    out.method = Method::LSI;
    const double n = static_cast<double>(a.cols());
    double tail = 0.0;
    for (double v : s.values) tail += v * v;
    out.residual_ratios.push_back(tail / n);
    for (std::size_t j = 0; j < ell; ++j) {
        tail = std::max(0.0, tail - s.values[j] * s.values[j]);
        out.residual_ratios.push_back(tail / n);
    }
    return out;
}
inline SubspaceBasis lsi(const corpus::TermDocumentMatrix& a, std::size_t ell) { return lsi(a.matrix, ell); }

/// State exposed to an observer after each IRR iteration.
struct IrrStep {
    std::size_t j;                        ///< 0-based iteration index
    const std::vector<Vector>& rescaled;  ///< R̂ columns, normalized by their largest norm
    const Vector& b;
    const std::vector<Vector>& residuals;  ///< after subtracting the projection onto b
};
using IrrObserver = std::function<void(const IrrStep&)>;

namespace detail {

inline constexpr double kZeroResidual = 1e-10;

inline double residual_ratio(const std::vector<Vector>& r) {
    double s = 0.0;
    for (const auto& c : r) s += dot(c, c);
    return s / static_cast<double>(r.size());
}

// First left singular vector of the matrix with columns `cols`. The top eigenvalue is at
// least the largest squared column norm; a power iterate below that falls back to the SVD.
inline Vector top_left_singular(const std::vector<Vector>& cols, std::size_t m) {
    const std::size_t n = cols.size();
    double floor = 0.0;
    for (const auto& c : cols) floor = std::max(floor, dot(c, c));
    floor *= 1.0 - 1e-9;
    const auto apply_rrt = [&](const Vector& x) {
        Vector y(m, 0.0);
        for (const auto& c : cols) axpy(dot(c, x), c, y);
        return y;
    };
    Vector u;
    if (n < m) {
        Matrix g(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = i; k < n; ++k) g(i, k) = g(k, i) = dot(cols[i], cols[k]);
        auto pr = linalg::power_iteration_psd([&](const Vector& x) { return matvec(g, x); }, n);
        if (pr.converged && pr.eigenvalue >= floor) {
            u.assign(m, 0.0);
            for (std::size_t i = 0; i < n; ++i) axpy(pr.vector[i], cols[i], u);
        }
    } else {
        auto pr = linalg::power_iteration_psd(apply_rrt, m);
        if (pr.converged && pr.eigenvalue >= floor) u = std::move(pr.vector);
    }
    if (u.empty()) u = linalg::svd(Matrix::from_columns(cols)).left.col(0);
    scale(u, 1.0 / norm2(u));
    return u;
}

}  // namespace detail

inline SubspaceBasis irr(const Matrix& a, const IrrConfig& config, const IrrObserver& observer = {}) {
    config.validate();
    if (a.empty()) throw InvalidInput("irr: empty matrix");
    if (!a.all_finite()) throw InvalidInput("irr: non-finite entry");

    SubspaceBasis out;
    out.method = Method::IRR;
    out.alpha = config.alpha;
    out.beta = config.beta;
    out.q = std::holds_alternative<AutoScale>(config.q) ? auto_scale(a, config.alpha, config.beta)
                                                         : std::get<double>(config.q);

    const std::size_t m = a.rows(), n = a.cols();
    std::vector<Vector> res(n);
    double max_norm = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        res[d] = a.col(d);
        max_norm = std::max(max_norm, norm2(res[d]));
    }
    const double zero_tol = detail::kZeroResidual * max_norm;

    const auto* fixed = std::get_if<std::size_t>(&config.ell);
    const std::size_t limit = fixed ? *fixed : std::min(m, n);
    const double theta = fixed ? 0.0 : std::get<ResidualRatio>(config.ell).theta;

    std::vector<Vector> basis;
    out.residual_ratios.push_back(detail::residual_ratio(res));
    std::vector<Vector> hat(n);
    for (std::size_t j = 0; j < limit; ++j) {
        if (!fixed && j > 0 && out.residual_ratios.back() <= theta) break;

        double hat_max = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
            const double rn = norm2(res[d]);
            hat[d] = rn <= zero_tol ? Vector(m, 0.0) : rescale(res[d], out.q);
            hat_max = std::max(hat_max, norm2(hat[d]));
        }
        if (hat_max == 0.0) {
            out.truncated = fixed != nullptr;
            break;
        }
        for (auto& h : hat) scale(h, 1.0 / hat_max);

        Vector b = detail::top_left_singular(hat, m);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& prev : basis) axpy(-dot(prev, b), prev, b);
        scale(b, 1.0 / norm2(b));
        linalg::canonicalize_sign(b);

        for (auto& r : res) axpy(-dot(b, r), b, r);
        basis.push_back(b);
        out.residual_ratios.push_back(detail::residual_ratio(res));
        if (observer) observer(IrrStep{j, hat, basis.back(), res});
    }
    out.basis = Matrix::from_columns(basis);
    if (basis.empty()) out.basis = Matrix(m, 0);
    return out;
}
inline SubspaceBasis irr(const corpus::TermDocumentMatrix& a, const IrrConfig& config,
                         const IrrObserver& observer = {}) {
    return irr(a.matrix, config, observer);
}

/// Smallest ℓ ≥ 1 whose residual ratio after ℓ IRR iterations is ≤ theta, capped at rank(A).
inline std::size_t dimensionality_by_residual_ratio(const Matrix& a, double q, double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ParameterError("theta must be positive");
    if (theta >= 1.0) return 1;
    IrrConfig c;
    c.q = q;
    c.ell = ResidualRatio{theta};
    return std::max<std::size_t>(1, irr(a, c).ell());
}
inline std::size_t dimensionality_by_residual_ratio(const corpus::TermDocumentMatrix& a, double q, double theta) {
    return dimensionality_by_residual_ratio(a.matrix, q, theta);
}

/// BBᵀA; the VSM basis returns A itself.
inline Matrix represent(const Matrix& a, const SubspaceBasis& b) {
    if (b.basis.rows() != a.rows()) throw DimensionMismatch("represent: basis and documents differ in term count");
    if (b.method == Method::VSM) return a;
    return linalg::project(b.basis, a);
}
inline Matrix represent(const corpus::TermDocumentMatrix& a, const SubspaceBasis& b) {
    return represent(a.matrix, b);
}

// ---------------------------------------------------------------------------
// Persistence: binary matrix at `path`, metadata at `path + ".json"`.

inline void save_basis(const std::string& path, const SubspaceBasis& b) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    write_binary(os, b.basis);
    nlohmann::json j;
    j["method"] = to_string(b.method);
    j["q"] = b.q;
    j["ell"] = b.ell();
    j["residual_ratios"] = b.residual_ratios;
    j["truncated"] = b.truncated;
    j["alpha"] = std::isfinite(b.alpha) ? nlohmann::json(b.alpha) : nlohmann::json();
    j["beta"] = std::isfinite(b.beta) ? nlohmann::json(b.beta) : nlohmann::json();
    std::ofstream js(path + ".json");
    if (!js) throw DataError("cannot write " + path + ".json");
    js << j.dump(2) << '\n';
}

inline SubspaceBasis load_basis(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read " + path);
    SubspaceBasis b;
    b.basis = read_binary(is);
    std::ifstream js(path + ".json");
    if (!js) throw DataError("missing sidecar " + path + ".json");
    try {
        const auto j = nlohmann::json::parse(js);
        b.method = method_from_string(j.at("method").get<std::string>());
        b.q = j.at("q").get<double>();
        b.residual_ratios = j.at("residual_ratios").get<std::vector<double>>();
        b.truncated = j.value("truncated", false);
        if (j.contains("alpha") && !j["alpha"].is_null()) b.alpha = j["alpha"].get<double>();
        if (j.contains("beta") && !j["beta"].is_null()) b.beta = j["beta"].get<double>();
        if (j.at("ell").get<std::size_t>() != b.ell()) throw DataError("sidecar ell disagrees with basis");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad basis sidecar: ") + e.what());
    }
    if (b.method != Method::VSM && linalg::orthonormality_error(b.basis) > 1e-8)
        throw InvalidBasis("loaded basis is not orthonormal");
    return b;
}

}  // namespace irr::subspace
