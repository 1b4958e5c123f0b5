#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "irr/subspace.hpp"
#include "oracles.hpp"

namespace s = irr::subspace;
using irr::Matrix;
using irr::Vector;

namespace {

Matrix random_unit_columns(std::size_t m, std::size_t n, std::mt19937_64& rng) {
    Matrix a = oracle::random_matrix(m, n, rng);
    for (std::size_t j = 0; j < n; ++j) {
        Vector c = a.col(j);
        irr::scale(c, 1.0 / irr::norm2(c));
        a.set_col(j, c);
    }
    return a;
}

s::IrrConfig fixed(double q, std::size_t ell) {
    s::IrrConfig c;
    c.q = q;
    c.ell = ell;
    return c;
}

// Oracle projector onto the top-ell eigenvectors of AAᵀ.
Matrix oracle_lsi_projection(const Matrix& a, std::size_t ell) {
    const auto e = oracle::symmetric_eigen(irr::matmul(a, a.transpose()));
    const Matrix u = e.vectors.leading_cols(ell);
    return irr::matmul(u, irr::matmul_tn(u, a));
}

// Term-indicator directions of each synthetic topic's private vocabulary.
Matrix ideal_topic_basis(const irr::corpus::TermDocumentMatrix& tdm, std::size_t topics) {
    Matrix b(tdm.num_terms(), topics);
    for (std::size_t t = 0; t < topics; ++t) {
        const std::string prefix = "topic" + std::to_string(t + 1) + "term";
        double cnt = 0;
        for (std::size_t i = 0; i < tdm.num_terms(); ++i)
            if (tdm.terms[i].starts_with(prefix)) b(i, t) = 1.0, ++cnt;
        for (std::size_t i = 0; i < tdm.num_terms(); ++i) b(i, t) /= std::sqrt(cnt);
    }
    return b;
}

}  // namespace

TEST(Rescale, Examples) {
    EXPECT_EQ(s::rescale(std::vector<double>{3, 4}, 0.0), (Vector{3, 4}));
    EXPECT_EQ(s::rescale(std::vector<double>{3, 4}, 1.0), (Vector{15, 20}));
    EXPECT_EQ(s::rescale(std::vector<double>{0.6, 0.8}, 7.0), (Vector{0.6, 0.8}));
    EXPECT_EQ(s::rescale(std::vector<double>{0, 0}, 3.0), (Vector{0, 0}));
    EXPECT_THROW(s::rescale(std::vector<double>{1}, -1.0), irr::ParameterError);
}

TEST(Lsi, OrthonormalColumnsFullRankIsIdentityOnA) {
    Matrix a{{1, 0}, {0, 1}, {0, 0}};
    auto b = s::lsi(a, 2);
    EXPECT_LT(oracle::max_abs_diff(s::represent(a, b), a), 1e-14);
    EXPECT_THROW(s::lsi(a, 3), irr::ParameterError);
    EXPECT_THROW(s::lsi(a, 0), irr::ParameterError);
}

TEST(Lsi, RankOneGivesCollinearImages) {
    Matrix a{{1, 2, -3}, {2, 4, -6}};
    auto p = s::represent(a, s::lsi(a, 1));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double c = irr::dot(p.col(i), p.col(j)) / (irr::norm2(p.col(i)) * irr::norm2(p.col(j)));
            EXPECT_NEAR(std::abs(c), 1.0, 1e-12);
        }
}

TEST(Lsi, MatchesEigenOracle) {
    std::mt19937_64 rng(20);
    Matrix a = oracle::random_matrix(20, 10, rng);
    auto b = s::lsi(a, 3);
    EXPECT_LT(irr::linalg::orthonormality_error(b.basis), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(s::represent(a, b), oracle_lsi_projection(a, 3)), 1e-10);
    auto ref = irr::linalg::truncate_svd(irr::linalg::svd(a), 3);
    EXPECT_EQ(b.basis, ref);
    ASSERT_EQ(b.residual_ratios.size(), 4u);
    EXPECT_NEAR(b.residual_ratios[0], std::pow(oracle::fro(a), 2) / 10.0, 1e-12);
}

TEST(Irr, ZeroQMatchesLsiOnRandomMatrices) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 2 + rng() % 30, n = 2 + rng() % 20;
        Matrix a = oracle::random_matrix(m, n, rng);
        const std::size_t r = std::min(m, n);
        auto full = s::irr(a, fixed(0.0, r));
        ASSERT_EQ(full.ell(), r);
        for (std::size_t ell = 1; ell <= r; ++ell) {
            const Matrix p = irr::linalg::project(full.basis.leading_cols(ell), a);
            EXPECT_LT(oracle::fro(p - oracle_lsi_projection(a, ell)), 1e-8) << m << "x" << n << " ell " << ell;
        }
    }
}

TEST(Irr, SingleNonzeroColumn) {
    Matrix a{{0, 3, 0}, {0, 4, 0}};
    std::vector<std::vector<Vector>> residuals;
    auto b = s::irr(a, fixed(2.0, 2), [&](const s::IrrStep& st) { residuals.push_back(st.residuals); });
    EXPECT_TRUE(b.truncated);
    ASSERT_EQ(b.ell(), 1u);
    EXPECT_NEAR(b.basis(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(b.basis(1, 0), 0.8, 1e-15);
    for (const auto& r : residuals.at(0)) EXPECT_LT(irr::norm2(r), 1e-15);
    EXPECT_EQ(b.residual_ratios.size(), 2u);
}

TEST(Irr, OrthonormalityMonotoneDecayAndArgmax) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> qdist(0.0, 8.0);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 6; ++trial) {
        Matrix a = random_unit_columns(25, 15, rng);
        const double q = qdist(rng);
        int steps = 0;
        auto b = s::irr(a, fixed(q, 8), [&](const s::IrrStep& st) {
            ++steps;
            for (const auto& r : st.residuals) EXPECT_LT(std::abs(irr::dot(r, st.b)), 1e-9);
            const auto g = [&](std::span<const double> x) {
                double acc = 0.0;
                for (const auto& h : st.rescaled) acc += std::pow(irr::dot(x, h), 2);
                return acc;
            };
            const double best = g(st.b);
            for (int k = 0; k < 1000; ++k) {
                Vector x(25);
                for (double& v : x) v = gauss(rng);
                irr::scale(x, 1.0 / irr::norm2(x));
                EXPECT_GE(best, g(x) - 1e-12);
            }
        });
        EXPECT_EQ(steps, 8);
        EXPECT_LT(irr::linalg::orthonormality_error(b.basis), 1e-8);
        for (std::size_t j = 1; j < b.residual_ratios.size(); ++j)
            EXPECT_LE(b.residual_ratios[j], b.residual_ratios[j - 1] + 1e-15);
        EXPECT_NEAR(b.residual_ratios[0], 1.0, 1e-12);
    }
}

TEST(Irr, SignCanonicalized) {
    std::mt19937_64 rng(9);
    auto b = s::irr(oracle::random_matrix(12, 9, rng), fixed(1.5, 4));
    for (std::size_t j = 0; j < b.ell(); ++j) {
        const Vector c = b.basis.col(j);
        auto it = std::max_element(c.begin(), c.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
        EXPECT_GT(*it, 0.0);
    }
}

TEST(Irr, RescalingRecoversMinorityTopic) {
    irr::corpus::SynthSpec spec{{46, 4}, 40, 100, 60, 0.2, 1};
    auto col = irr::corpus::synthesize_collection(spec);
    auto tdm = irr::corpus::build_matrix(col.docs, {});
    const Matrix ideal = ideal_topic_basis(tdm, 2);
    const double a0 = irr::linalg::canonical_angles(s::irr(tdm, fixed(0.0, 2)).basis, ideal).angles.front();
    const double a4 = irr::linalg::canonical_angles(s::irr(tdm, fixed(4.0, 2)).basis, ideal).angles.front();
    EXPECT_LT(a4, a0);
}

TEST(Irr, InvalidConfigs) {
    Matrix a{{1, 0}, {0, 1}};
    EXPECT_THROW(s::irr(a, fixed(-1.0, 1)), irr::ParameterError);
    EXPECT_THROW(s::irr(a, fixed(1.0, 0)), irr::ParameterError);
    s::IrrConfig c;
    c.ell = s::ResidualRatio{1.5};
    EXPECT_THROW(s::irr(a, c), irr::ParameterError);
    c.ell = s::ResidualRatio{0.5};
    c.alpha = std::nan("");
    EXPECT_THROW(s::irr(a, c), irr::ParameterError);
    EXPECT_THROW(s::irr(Matrix{}, fixed(0.0, 1)), irr::InvalidInput);
}

TEST(AutoScale, Examples) {
    Matrix eye4(6, 4);
    for (std::size_t i = 0; i < 4; ++i) eye4(i, i) = 1.0;
    EXPECT_NEAR(s::auto_scale(eye4, 3.5, 0.0), 0.875, 1e-15);
    Matrix same(3, 5, 1.0 / std::sqrt(3.0));
    EXPECT_NEAR(s::auto_scale(same, 3.5, 0.0), 3.5, 1e-12);
    EXPECT_EQ(s::auto_scale(same, 1.0, -10.0), 0.0);
}

TEST(AutoScale, InvariantUnderColumnPermutation) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_unit_columns(10, 8, rng);
        std::vector<std::size_t> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix p(10, 8);
        for (std::size_t j = 0; j < 8; ++j) p.set_col(j, a.col(perm[j]));
        EXPECT_NEAR(s::auto_scale(a), s::auto_scale(p), 1e-12);
    }
}

TEST(AutoScale, SkewedCollectionsGetLargerQ) {
    double uniform = 0.0, skewed = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto u = irr::corpus::synthesize_collection({{25, 25}, 40, 100, 60, 0.3, seed});
        auto k = irr::corpus::synthesize_collection({{46, 4}, 40, 100, 60, 0.3, seed});
        uniform += s::auto_scale(irr::corpus::build_matrix(u.docs, {}));
        skewed += s::auto_scale(irr::corpus::build_matrix(k.docs, {}));
    }
    EXPECT_GT(skewed, uniform);
}

TEST(Dimensionality, Examples) {
    std::mt19937_64 rng(2);
    Matrix a = random_unit_columns(8, 5, rng);
    EXPECT_EQ(s::dimensionality_by_residual_ratio(a, 2.0, 1.0), 1u);
    Matrix rank1{{1, 2, 3}, {2, 4, 6}};
    EXPECT_EQ(s::dimensionality_by_residual_ratio(rank1, 0.0, 1e-6), 1u);
    EXPECT_EQ(s::dimensionality_by_residual_ratio(rank1, 3.0, 0.5), 1u);
    EXPECT_EQ(s::dimensionality_by_residual_ratio(a, 1.0, 1e-30), 5u);
    EXPECT_THROW(s::dimensionality_by_residual_ratio(a, 1.0, 0.0), irr::ParameterError);

    auto col = irr::corpus::synthesize_collection({{25, 25}, 3, 1, 400, 0.0, 4});
    auto tdm = irr::corpus::build_matrix(col.docs, {});
    EXPECT_EQ(s::dimensionality_by_residual_ratio(tdm, 0.0, 0.05), 2u);
    EXPECT_EQ(s::dimensionality_by_residual_ratio(tdm, 3.0, 0.05), 2u);
}

// After the first step the two residuals are antiparallel with equal norms, so the
// Gram matrix has top eigenvector (1, -1).
TEST(Irr, AntiparallelResidualsMatchLsi) {
    const double c = std::sqrt(0.5);
    Matrix a{{c, c}, {c, 0.0}, {0.0, c}};
    s::IrrConfig cfg;
    cfg.q = 0.0;
    cfg.ell = std::size_t{2};
    const Matrix pi = s::represent(a, s::irr(a, cfg));
    const Matrix pl = s::represent(a, s::lsi(a, 2));
    EXPECT_LT(irr::linalg::frobenius_norm(pi - pl), 1e-10);
    EXPECT_NEAR(irr::linalg::frobenius_norm(pi), std::sqrt(2.0), 1e-10);
}

TEST(Represent, VsmPassThroughAndMismatch) {
    Matrix a{{1, 0}, {0, 2}, {3, 0}};
    EXPECT_EQ(s::represent(a, s::vsm(a)), a);
    EXPECT_THROW(s::represent(Matrix{{1, 2}}, s::lsi(a, 1)), irr::DimensionMismatch);
}

TEST(Persistence, RoundTripWithSidecar) {
    std::mt19937_64 rng(4);
    s::IrrConfig c;
    c.q = s::AutoScale{};
    c.ell = std::size_t{3};
    auto b = s::irr(random_unit_columns(9, 7, rng), c);
    const auto path = (std::filesystem::temp_directory_path() / "irr_basis.ssm").string();
    s::save_basis(path, b);
    auto back = s::load_basis(path);
    EXPECT_EQ(back.basis, b.basis);
    EXPECT_EQ(back.method, s::Method::IRR);
    EXPECT_EQ(back.q, b.q);
    EXPECT_EQ(back.residual_ratios, b.residual_ratios);
    EXPECT_EQ(back.alpha, 3.5);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}
