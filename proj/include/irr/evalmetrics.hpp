#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "irr/corpus.hpp"
#include "irr/matrix.hpp"

namespace irr::eval {

// ---------------------------------------------------------------------------
// Pair ranking and kappa average precision

struct RankedPair {
    std::size_t i, j;  // i sorts before j (by id when ids are given)
    double cosine;
};
using RankedPairs = std::vector<RankedPair>;

/// All column pairs by nonincreasing cosine. Ties fall back to the pair of
/// document ids (smaller id first) when `ids` is given, else to the indices.
inline RankedPairs rank_pairs(const Matrix& rep, const std::vector<std::string>* ids = nullptr) {
    const std::size_t n = rep.cols();
    if (n < 2) throw ParameterError("rank_pairs: need at least two documents");
    if (ids && ids->size() != n) throw DimensionMismatch("rank_pairs: id count differs from document count");
    if (!rep.all_finite()) throw InvalidInput("rank_pairs: non-finite entry");

    const Matrix t = rep.transpose();  // rows are documents
    std::vector<double> norms(n);
    for (std::size_t d = 0; d < n; ++d) norms[d] = norm2(t.row(d));

    RankedPairs out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = norms[i] == 0.0 || norms[j] == 0.0 ? 0.0 : dot(t.row(i), t.row(j)) / (norms[i] * norms[j]);
            if (ids && (*ids)[j] < (*ids)[i]) out.push_back({j, i, c});
            else out.push_back({i, j, c});
        }
    std::stable_sort(out.begin(), out.end(), [&](const RankedPair& a, const RankedPair& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        if (ids) {
            if ((*ids)[a.i] != (*ids)[b.i]) return (*ids)[a.i] < (*ids)[b.i];
            return (*ids)[a.j] < (*ids)[b.j];
        }
        return std::pair(a.i, a.j) < std::pair(b.i, b.j);
    });
    return out;
}

namespace detail {

inline bool is_intra(const corpus::PairSet& intra, const RankedPair& p) {
    return intra.contains({std::min(p.i, p.j), std::max(p.i, p.j)});
}

inline void require_intra(const RankedPairs& ranked, const corpus::PairSet& intra) {
    if (intra.empty()) throw UndefinedMetric("no intra-topic pairs");
    if (intra.size() > ranked.size()) throw DimensionMismatch("more intra-topic pairs than ranked pairs");
}

}  // namespace detail

/// Mean over intra-topic pairs p_j of prec(p_j) = (#intra among the first j) / j.
inline double pairwise_average_precision(const RankedPairs& ranked, const corpus::PairSet& intra) {
    detail::require_intra(ranked, intra);
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r)
        if (detail::is_intra(intra, ranked[r])) sum += static_cast<double>(++hits) / static_cast<double>(r + 1);
    if (hits != intra.size()) throw DimensionMismatch("intra-topic pair missing from ranking");
    return sum / static_cast<double>(hits);
}

/// Mean over intra-topic pairs of (prec − chance)/(1 − chance), chance = |intra| / |pairs|.
inline double kappa_average_precision(const RankedPairs& ranked, const corpus::PairSet& intra) {
    detail::require_intra(ranked, intra);
    const double chance = static_cast<double>(intra.size()) / static_cast<double>(ranked.size());
    if (chance >= 1.0) throw UndefinedMetric("every pair is intra-topic; kappa undefined");
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r)
        if (detail::is_intra(intra, ranked[r])) {
            const double prec = static_cast<double>(++hits) / static_cast<double>(r + 1);
            sum += (prec - chance) / (1.0 - chance);
        }
    if (hits != intra.size()) throw DimensionMismatch("intra-topic pair missing from ranking");
    return sum / static_cast<double>(hits);
}

inline double kappa(const Matrix& rep, const corpus::TopicModel& tm, const std::vector<std::string>* ids = nullptr) {
    if (rep.cols() != tm.num_docs()) throw DimensionMismatch("kappa: representation and topic model differ in n");
    return kappa_average_precision(rank_pairs(rep, ids), corpus::intra_topic_pairs(tm));
}

// ---------------------------------------------------------------------------
// Clustering

inline constexpr std::array<std::string_view, 6> kAlgorithms = {
    "single-link", "complete-link", "group-average", "kmeans-single", "kmeans-complete", "kmeans-average"};

using Assignment = std::vector<std::size_t>;

namespace detail {

enum class Linkage { Single, Complete, Average };

// Renumber clusters in order of first appearance.
inline Assignment canonical_labels(const Assignment& a) {
    std::map<std::size_t, std::size_t> remap;
    Assignment out(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) {
        auto it = remap.try_emplace(a[d], remap.size()).first;
        out[d] = it->second;
    }
    return out;
}

inline Matrix unit_rows(const Matrix& rep) {
    Matrix t = rep.transpose();
    for (std::size_t d = 0; d < t.rows(); ++d) {
        const double n = norm2(t.row(d));
        if (n > 0.0) scale(t.row(d), 1.0 / n);
    }
    return t;
}

// Agglomerative clustering on 1 − cos with Lance-Williams updates; ties merge the
// lowest (i, j) cluster pair.
inline Assignment hierarchical(const Matrix& unit, std::size_t k, Linkage link) {
    const std::size_t n = unit.rows();
    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = 1.0 - dot(unit.row(i), unit.row(j));

    std::vector<std::size_t> size(n, 1);
    std::vector<bool> alive(n, true);
    Assignment owner(n);
    std::iota(owner.begin(), owner.end(), 0);

    for (std::size_t clusters = n; clusters > k; --clusters) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (alive[j] && dist(i, j) < best) best = dist(i, j), bi = i, bj = j;
        }
        for (std::size_t x = 0; x < n; ++x) {
            if (!alive[x] || x == bi || x == bj) continue;
            double d;
            switch (link) {
                case Linkage::Single: d = std::min(dist(x, bi), dist(x, bj)); break;
                case Linkage::Complete: d = std::max(dist(x, bi), dist(x, bj)); break;
                default:
                    d = (static_cast<double>(size[bi]) * dist(x, bi) + static_cast<double>(size[bj]) * dist(x, bj)) /
                        static_cast<double>(size[bi] + size[bj]);
            }
            dist(x, bi) = dist(bi, x) = d;
        }
        size[bi] += size[bj];
        alive[bj] = false;
        for (auto& o : owner)
            if (o == bj) o = bi;
    }
    return canonical_labels(owner);
}

inline std::vector<Vector> centroids(const Matrix& unit, const Assignment& a, std::size_t k) {
    std::vector<Vector> c(k, Vector(unit.cols(), 0.0));
    for (std::size_t d = 0; d < a.size(); ++d) axpy(1.0, unit.row(d), c[a[d]]);
    for (auto& v : c)
        if (const double n = norm2(v); n > 0.0) scale(v, 1.0 / n);
    return c;
}

// Spherical k-means started from a given partition.
inline Assignment spherical_kmeans(const Matrix& unit, Assignment a, std::size_t k, std::size_t max_iter = 100) {
    const std::size_t n = unit.rows();
    for (std::size_t it = 0; it < max_iter; ++it) {
        const auto c = centroids(unit, a, k);
        Assignment next(n);
        for (std::size_t d = 0; d < n; ++d) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < k; ++t)
                if (const double s = dot(unit.row(d), c[t]); s > best) best = s, next[d] = t;
        }
        std::vector<std::size_t> count(k, 0);
        for (auto t : next) ++count[t];
        for (std::size_t t = 0; t < k; ++t) {
            if (count[t] != 0) continue;
            std::size_t far = n;
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t d = 0; d < n; ++d) {
                if (count[next[d]] < 2) continue;
                if (const double s = dot(unit.row(d), c[next[d]]); s < worst) worst = s, far = d;
            }
            if (far == n) break;
            --count[next[far]];
            next[far] = t;
            ++count[t];
        }
        if (next == a) break;
        a = std::move(next);
    }
    return canonical_labels(a);
}

}  // namespace detail

inline Assignment cluster(const Matrix& rep, std::size_t k, std::string_view algorithm) {
    const std::size_t n = rep.cols();
    if (k == 0 || k > n) throw ParameterError("cluster: k must lie in [1, n]");
    if (!rep.all_finite()) throw InvalidInput("cluster: non-finite entry");
    const Matrix unit = detail::unit_rows(rep);
    using detail::Linkage;
    if (algorithm == "single-link") return detail::hierarchical(unit, k, Linkage::Single);
    if (algorithm == "complete-link") return detail::hierarchical(unit, k, Linkage::Complete);
    if (algorithm == "group-average") return detail::hierarchical(unit, k, Linkage::Average);
    if (algorithm == "kmeans-single")
        return detail::spherical_kmeans(unit, detail::hierarchical(unit, k, Linkage::Single), k);
    if (algorithm == "kmeans-complete")
        return detail::spherical_kmeans(unit, detail::hierarchical(unit, k, Linkage::Complete), k);
    if (algorithm == "kmeans-average")
        return detail::spherical_kmeans(unit, detail::hierarchical(unit, k, Linkage::Average), k);
    throw ParameterError("cluster: unknown algorithm '" + std::string(algorithm) + "'");
}

// ---------------------------------------------------------------------------
// Contingency score and floor/ceiling

/// clusters × topics document counts.
struct ContingencyTable {
    Matrix counts;

    void validate() const {
        for (double c : counts.data())
            if (c < 0.0 || c != std::floor(c)) throw InvalidInput("contingency table: counts must be nonnegative integers");
    }
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double c : counts.data()) s += c;
        return s;
    }
};

inline ContingencyTable contingency_table(const Assignment& a, std::size_t k, const std::vector<std::size_t>& labels,
                                          std::size_t topics) {
    if (a.size() != labels.size()) throw DimensionMismatch("contingency_table: length mismatch");
    ContingencyTable c{Matrix(k, topics)};
    for (std::size_t d = 0; d < a.size(); ++d) c.counts(a[d], labels[d]) += 1.0;
    return c;
}

/// Sum of cells that are the unique maximum of both their row and column, over n.
inline double contingency_score(const ContingencyTable& c) {
    c.validate();
    const Matrix& m = c.counts;
    const double n = c.total();
    if (n == 0.0) throw InvalidInput("contingency table is empty");
    double hit = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            bool unique = v > 0.0;
            for (std::size_t jj = 0; unique && jj < m.cols(); ++jj) unique = jj == j || m(i, jj) < v;
            for (std::size_t ii = 0; unique && ii < m.rows(); ++ii) unique = ii == i || m(ii, j) < v;
            if (unique) hit += v;
        }
    return hit / n;
}

struct ClusteringOutcome {
    std::map<std::string, double> scores;
    double floor = 0.0;
    double ceiling = 0.0;
};

inline ClusteringOutcome floor_ceiling(const Matrix& rep, const corpus::TopicModel& tm, std::size_t k) {
    if (rep.cols() != tm.num_docs()) throw DimensionMismatch("floor_ceiling: representation and topic model differ in n");
    const auto labels = tm.labels();
    ClusteringOutcome out;
    out.floor = std::numeric_limits<double>::infinity();
    out.ceiling = -std::numeric_limits<double>::infinity();
    for (auto name : kAlgorithms) {
        const double s = contingency_score(contingency_table(cluster(rep, k, name), k, labels, tm.num_topics()));
        out.scores.emplace(std::string(name), s);
        out.floor = std::min(out.floor, s);
        out.ceiling = std::max(out.ceiling, s);
    }
    return out;
}

}  // namespace irr::eval
