#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "irr/evalmetrics.hpp"
#include "irr/subspace.hpp"
#include "oracles.hpp"

namespace e = irr::eval;
namespace c = irr::corpus;
using irr::Matrix;
using irr::Vector;

namespace {

// Brute-force R(C): a cell counts when no other cell of its row or column reaches its value.
double brute_contingency(const Matrix& m) {
    double total = 0.0, hit = 0.0;
    for (double v : m.data()) total += v;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            int rivals = 0;
            for (std::size_t a = 0; a < m.rows(); ++a)
                for (std::size_t b = 0; b < m.cols(); ++b)
                    if ((a == i) != (b == j) && m(a, b) >= m(i, j)) ++rivals;
            if (rivals == 0 && m(i, j) > 0) hit += m(i, j);
        }
    return hit / total;
}

c::TopicModel labels_model(const std::vector<std::size_t>& labels, std::size_t k) {
    Matrix r(k, labels.size());
    for (std::size_t d = 0; d < labels.size(); ++d) r(labels[d], d) = 1.0;
    std::vector<std::string> ids;
    for (std::size_t t = 0; t < k; ++t) ids.push_back("t" + std::to_string(t + 1));
    return {r, ids};
}

e::RankedPairs ranking_from_flags(const std::vector<bool>& intra_flags, c::PairSet& intra) {
    e::RankedPairs r;
    for (std::size_t p = 0; p < intra_flags.size(); ++p) {
        r.push_back({p, p + 1000, 1.0 - static_cast<double>(p) * 1e-3});
        if (intra_flags[p]) intra.insert({p, p + 1000});
    }
    return r;
}

}  // namespace

TEST(Contingency, FiveByFourTableScoresFiftySixPercent) {
    e::ContingencyTable t{Matrix{{5, 10, 20, 0}, {5, 10, 5, 0}, {0, 0, 0, 21}, {15, 5, 0, 0}, {0, 0, 0, 4}}};
    EXPECT_EQ(t.total(), 100.0);
    EXPECT_DOUBLE_EQ(e::contingency_score(t), 0.56);
    EXPECT_DOUBLE_EQ(brute_contingency(t.counts), 0.56);
}

TEST(Contingency, DiagonalAndTies) {
    EXPECT_EQ(e::contingency_score({Matrix{{3, 0}, {0, 7}}}), 1.0);
    Matrix tied{{20, 1}, {20, 30}};  // the 20s tie within their column
    EXPECT_DOUBLE_EQ(e::contingency_score({tied}), 30.0 / 71.0);
    EXPECT_DOUBLE_EQ(brute_contingency(tied), 30.0 / 71.0);
    EXPECT_THROW(e::contingency_score({Matrix{{1.5}}}), irr::InvalidInput);
}

TEST(Contingency, RandomTablesMatchBruteForceAndNeverShareRowsOrColumns) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t r = 1 + rng() % 6, k = 1 + rng() % 6;
        Matrix m(r, k);
        for (double& v : m.data()) v = static_cast<double>(rng() % 6);
        m(0, 0) += 1;
        EXPECT_DOUBLE_EQ(e::contingency_score({m}), brute_contingency(m));
    }
}

TEST(RankPairs, SmallCases) {
    auto two = e::rank_pairs(Matrix{{1, 0}, {0, 1}});
    ASSERT_EQ(two.size(), 1u);
    EXPECT_EQ(two[0].cosine, 0.0);

    auto same = e::rank_pairs(Matrix(3, 4, 0.5));
    ASSERT_EQ(same.size(), 6u);
    const std::vector<std::pair<std::size_t, std::size_t>> order{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (std::size_t p = 0; p < 6; ++p) {
        EXPECT_NEAR(same[p].cosine, 1.0, 1e-15);
        EXPECT_EQ(std::pair(same[p].i, same[p].j), order[p]);
    }
    EXPECT_THROW(e::rank_pairs(Matrix(2, 1, 1.0)), irr::ParameterError);
}

TEST(RankPairs, AxisAlignedPlusDiagonal) {
    const double r = 1.0 / std::sqrt(3.0);
    Matrix a{{1, 0, 0, r}, {0, 1, 0, r}, {0, 0, 1, r}};
    auto p = e::rank_pairs(a);
    const std::vector<std::pair<std::size_t, std::size_t>> order{{0, 3}, {1, 3}, {2, 3}, {0, 1}, {0, 2}, {1, 2}};
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(std::pair(p[k].i, p[k].j), order[k]);
    EXPECT_NEAR(p[0].cosine, r, 1e-15);
    EXPECT_EQ(p[5].cosine, 0.0);
}

TEST(RankPairs, ZeroColumnHasZeroCosine) {
    auto p = e::rank_pairs(Matrix{{0, 1, -1}, {0, 0, 0}});
    for (const auto& x : p)
        if (x.i == 0 || x.j == 0) {
            EXPECT_EQ(x.cosine, 0.0);
        }
    EXPECT_EQ(p.back().cosine, -1.0);
}

TEST(Precision, HandExamples) {
    c::PairSet intra;
    auto r = ranking_from_flags({true, false, true}, intra);
    EXPECT_DOUBLE_EQ(e::pairwise_average_precision(r, intra), 5.0 / 6.0);

    c::PairSet all;
    auto r2 = ranking_from_flags({true, true, true}, all);
    EXPECT_EQ(e::pairwise_average_precision(r2, all), 1.0);
    EXPECT_THROW(e::kappa_average_precision(r2, all), irr::UndefinedMetric);
    EXPECT_THROW(e::pairwise_average_precision(r2, {}), irr::UndefinedMetric);

    c::PairSet top;
    auto r3 = ranking_from_flags({true, true, false, false}, top);
    EXPECT_EQ(e::pairwise_average_precision(r3, top), 1.0);
    EXPECT_EQ(e::kappa_average_precision(r3, top), 1.0);
}

TEST(Kappa, FourDocumentExample) {
    // topics {1,1,2,2}; rank intra(0,1), cross, intra(2,3), then the rest
    const auto tm = labels_model({0, 0, 1, 1}, 2);
    const auto intra = c::intra_topic_pairs(tm);
    e::RankedPairs r{{0, 1, 0.9}, {0, 2, 0.8}, {2, 3, 0.7}, {0, 3, 0.3}, {1, 2, 0.2}, {1, 3, 0.1}};
    EXPECT_DOUBLE_EQ(e::pairwise_average_precision(r, intra), 5.0 / 6.0);
    EXPECT_NEAR(e::kappa_average_precision(r, intra), 0.75, 1e-15);
}

TEST(Kappa, ChanceLevelPrecisionGivesZero) {
    // Intra pairs at ranks 3 and 6 of 6: prec = 1/3 = chance at both.
    c::PairSet intra;
    auto r = ranking_from_flags({false, false, true, false, false, true}, intra);
    EXPECT_NEAR(e::kappa_average_precision(r, intra), 0.0, 1e-15);
}

TEST(Kappa, AffineInPairwisePrecisionOnRandomRankings) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = 2 + rng() % 40;
        std::vector<bool> flags(len);
        std::size_t cnt = 0;
        for (std::size_t p = 0; p < len; ++p) cnt += (flags[p] = rng() % 3 == 0);
        if (cnt == 0) flags[rng() % len] = true, ++cnt;
        if (cnt == len) flags[0] = false, --cnt;
        c::PairSet intra;
        auto r = ranking_from_flags(flags, intra);
        const double chance = static_cast<double>(cnt) / static_cast<double>(len);
        const double pap = e::pairwise_average_precision(r, intra);
        EXPECT_NEAR(e::kappa_average_precision(r, intra), (pap - chance) / (1.0 - chance), 1e-12);
    }
}

TEST(Kappa, InvariantUnderDocumentPermutationWithIds) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 12;
        std::vector<std::size_t> labels(n);
        for (auto& l : labels) l = rng() % 3;
        labels[0] = 0, labels[1] = 1;
        Matrix a = oracle::random_matrix(6, n, rng, 0.0, 1.0);
        a.set_col(5, a.col(4));  // duplicates exercise the tie rule
        a.set_col(9, a.col(4));
        std::vector<std::string> ids;
        for (std::size_t d = 0; d < n; ++d) ids.push_back("doc" + std::to_string(100 + d));
        const double k0 = e::kappa(a, labels_model(labels, 3), &ids);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix pa(6, n);
        std::vector<std::size_t> pl(n);
        std::vector<std::string> pids(n);
        for (std::size_t d = 0; d < n; ++d) pa.set_col(d, a.col(perm[d])), pl[d] = labels[perm[d]], pids[d] = ids[perm[d]];
        EXPECT_EQ(e::kappa(pa, labels_model(pl, 3), &pids), k0);
    }
}

TEST(Kappa, InvariantUnderIsometry) {
    std::mt19937_64 rng(44);
    auto col = c::synthesize_collection({{10, 6, 4}, 8, 10, 30, 0.3, 5});
    auto tdm = c::build_matrix(col.docs, {});
    const Matrix q = irr::linalg::orthonormalize(oracle::random_matrix(tdm.num_terms(), tdm.num_terms(), rng));
    ASSERT_EQ(q.cols(), tdm.num_terms());
    EXPECT_NEAR(e::kappa(tdm.matrix, col.topics), e::kappa(irr::matmul(q, tdm.matrix), col.topics), 1e-9);
}

TEST(Cluster, OrthogonalGroupsRecoveredByAllAlgorithms) {
    Matrix a{{1, 0.9, 0.8, 0, 0}, {0.1, 0.2, 0.3, 0, 0}, {0, 0, 0, 1, 0.5}, {0, 0, 0, 0.2, 1}};
    for (auto name : e::kAlgorithms) {
        auto asg = e::cluster(a, 2, name);
        EXPECT_EQ(asg, (e::Assignment{0, 0, 0, 1, 1})) << name;
    }
    const auto tm = labels_model({0, 0, 0, 1, 1}, 2);
    auto fc = e::floor_ceiling(a, tm, 2);
    EXPECT_EQ(fc.floor, 1.0);
    EXPECT_EQ(fc.ceiling, 1.0);
    EXPECT_EQ(fc.scores.size(), 6u);
}

TEST(Cluster, SingletonsWhenKEqualsN) {
    std::mt19937_64 rng(1);
    Matrix a = oracle::random_matrix(4, 6, rng);
    for (auto name : {"single-link", "complete-link", "group-average"}) {
        auto asg = e::cluster(a, 6, name);
        EXPECT_EQ(std::set<std::size_t>(asg.begin(), asg.end()).size(), 6u);
    }
    EXPECT_THROW(e::cluster(a, 7, "single-link"), irr::ParameterError);
    EXPECT_THROW(e::cluster(a, 2, "ward"), irr::ParameterError);
}

TEST(Cluster, KnownLinkageMerges) {
    // Points on a circle at angles 0, 10, 25, 45 degrees: single-link chains, complete-link splits.
    Matrix a(2, 4);
    const double deg[] = {0, 10, 25, 45};
    for (std::size_t d = 0; d < 4; ++d) a(0, d) = std::cos(deg[d] * M_PI / 180), a(1, d) = std::sin(deg[d] * M_PI / 180);
    EXPECT_EQ(e::cluster(a, 2, "single-link"), (e::Assignment{0, 0, 0, 1}));
    EXPECT_EQ(e::cluster(a, 2, "complete-link"), (e::Assignment{0, 0, 1, 1}));
}

TEST(Cluster, IdenticalColumnsScoreBoundedByLargestTopic) {
    Matrix a(3, 10, 1.0);
    const auto tm = labels_model({0, 0, 0, 0, 0, 0, 1, 1, 1, 1}, 2);
    auto fc = e::floor_ceiling(a, tm, 2);
    for (const auto& [name, s] : fc.scores) EXPECT_LE(s, 0.6 + 1e-15) << name;
}

TEST(Cluster, Deterministic) {
    std::mt19937_64 rng(6);
    Matrix a = oracle::random_matrix(5, 20, rng, 0.0, 1.0);
    for (auto name : e::kAlgorithms) EXPECT_EQ(e::cluster(a, 3, name), e::cluster(a, 3, name));
}

TEST(FloorCeiling, RequiresSingleTopicDocuments) {
    const double r = 1.0 / std::sqrt(2.0);
    c::TopicModel tm{Matrix{{1, r}, {0, r}}, {"a", "b"}};
    EXPECT_THROW(e::floor_ceiling(Matrix{{1, 0}, {0, 1}}, tm, 2), irr::PreconditionError);
}

TEST(FloorCeiling, IrrFloorAtLeastVsmOnSkewedSets) {
    int wins = 0, refine_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto col = c::synthesize_collection({{40, 10}, 40, 100, 60, 0.3, seed});
        auto tdm = c::build_matrix(col.docs, {});
        irr::subspace::IrrConfig cfg;
        cfg.q = irr::subspace::AutoScale{};
        cfg.ell = std::size_t{2};
        const auto rep = irr::subspace::represent(tdm, irr::subspace::irr(tdm, cfg));
        const auto vsm = e::floor_ceiling(tdm.matrix, col.topics, 2);
        const auto fc = e::floor_ceiling(rep, col.topics, 2);
        wins += fc.floor >= vsm.floor;
        refine_ok += vsm.scores.at("kmeans-average") >= vsm.scores.at("group-average");
    }
    EXPECT_GT(wins, 5);
    RecordProperty("kmeans_refinement_not_worse_seeds", refine_ok);
}
