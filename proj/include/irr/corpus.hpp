#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "irr/matrix.hpp"
#include "irr/porter_stemmer.hpp"
#include "irr/stopwords.hpp"

namespace irr::corpus {

struct EmptyVocabulary : DataError {
    using DataError::DataError;
};

struct Document {
    std::string id;
    std::string text;
    std::vector<std::string> topic_labels;
};

/// m terms × n documents; each column has unit L2 norm or is all zero.
struct TermDocumentMatrix {
    Matrix matrix;
    std::vector<std::string> terms;
    std::vector<std::string> doc_ids;

    [[nodiscard]] std::size_t num_terms() const noexcept { return matrix.rows(); }
    [[nodiscard]] std::size_t num_docs() const noexcept { return matrix.cols(); }
};

/// k topics × n documents of relevance scores ρ(t, d); unit-norm columns.
struct TopicModel {
    Matrix relevance;
    std::vector<std::string> topic_ids;

    [[nodiscard]] std::size_t num_topics() const noexcept { return relevance.rows(); }
    [[nodiscard]] std::size_t num_docs() const noexcept { return relevance.cols(); }

    /// True when every document is relevant to exactly one topic.
    [[nodiscard]] bool single_topic() const {
        for (std::size_t d = 0; d < num_docs(); ++d) {
            std::size_t nz = 0;
            for (std::size_t t = 0; t < num_topics(); ++t) nz += relevance(t, d) > 0.0;
            if (nz != 1) return false;
        }
        return true;
    }

    /// Topic index per document; requires single_topic().
    [[nodiscard]] std::vector<std::size_t> labels() const {
        if (!single_topic()) throw PreconditionError("TopicModel::labels: multi-topic documents present");
        std::vector<std::size_t> out(num_docs());
        for (std::size_t d = 0; d < num_docs(); ++d)
            for (std::size_t t = 0; t < num_topics(); ++t)
                if (relevance(t, d) > 0.0) out[d] = t;
        return out;
    }

    void validate(double tol = 1e-9) const {
        if (topic_ids.size() != num_topics()) throw InvalidInput("TopicModel: topic id count mismatch");
        for (std::size_t d = 0; d < num_docs(); ++d) {
            double s = 0.0;
            for (std::size_t t = 0; t < num_topics(); ++t) {
                const double r = relevance(t, d);
                if (r < 0.0 || r > 1.0 + tol) throw InvalidInput("TopicModel: relevance outside [0,1]");
                s += r * r;
            }
            if (std::abs(s - 1.0) > tol) throw InvalidInput("TopicModel: relevance column without unit norm");
        }
    }

    /// Single-topic model from per-topic document counts (documents in topic-block order).
    static TopicModel from_counts(std::span<const std::size_t> counts) {
        std::size_t n = 0;
        for (auto c : counts) n += c;
        TopicModel tm{Matrix(counts.size(), n), {}};
        std::size_t d = 0;
        for (std::size_t t = 0; t < counts.size(); ++t) {
            tm.topic_ids.push_back("t" + std::to_string(t + 1));
            for (std::size_t i = 0; i < counts[t]; ++i) tm.relevance(t, d++) = 1.0;
        }
        return tm;
    }
};

struct SimilarityMatrix {
    Matrix matrix;  // n×n, symmetric, unit diagonal
};

struct SynthSpec {
    std::vector<std::size_t> distribution;  // documents per topic
    std::size_t vocab_per_topic = 40;
    std::size_t shared_vocab = 3;
    std::size_t doc_length = 40;
    double noise_rate = 0.3;
    std::uint64_t rng_seed = 1;

    [[nodiscard]] std::size_t num_docs() const {
        std::size_t n = 0;
        for (auto c : distribution) n += c;
        return n;
    }

    void validate() const {
        if (distribution.empty()) throw ParameterError("SynthSpec: empty distribution");
        for (auto c : distribution)
            if (c == 0) throw ParameterError("SynthSpec: topic document counts must be positive");
        if (vocab_per_topic == 0) throw ParameterError("SynthSpec: vocab_per_topic must be positive");
        if (doc_length == 0) throw ParameterError("SynthSpec: doc_length must be positive");
        if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ParameterError("SynthSpec: noise_rate must lie in [0,1)");
        if (noise_rate > 0.0 && shared_vocab == 0)
            throw ParameterError("SynthSpec: noise_rate > 0 requires a shared vocabulary");
    }
};

// ---------------------------------------------------------------------------
// Text processing

/// Lowercased maximal runs of ASCII alphanumerics.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::set<std::string> default_stopwords() {
    return {kDefaultStopwords.begin(), kDefaultStopwords.end()};
}

/// One token per line; blank lines and lines starting with '#' are ignored.
inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open stopword file: " + path.string());
    std::set<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        auto toks = tokenize(line);
        if (line.empty() || line[0] == '#' || toks.empty()) continue;
        out.insert(toks.front());
    }
    return out;
}

struct BuildOptions {
    bool stem = true;
    bool warn_on_empty = true;
};

/// Raw term frequencies with each document column scaled to unit L2 norm.
/// Tokens containing digits are kept verbatim (not stemmed).
inline TermDocumentMatrix build_matrix(const std::vector<Document>& docs, const std::set<std::string>& stopwords,
                                       const BuildOptions& opt = {}) {
    if (docs.empty()) throw ParameterError("build_matrix: empty document list");
    {
        std::set<std::string> seen;
        for (const auto& d : docs)
            if (!seen.insert(d.id).second) throw InvalidInput("build_matrix: duplicate document id " + d.id);
    }
    PorterStemmer stem;
    std::vector<std::map<std::string, double>> counts(docs.size());
    std::set<std::string> vocab;
    for (std::size_t j = 0; j < docs.size(); ++j) {
        for (auto& tok : tokenize(docs[j].text)) {
            if (stopwords.contains(tok)) continue;
            const bool has_digit = std::any_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
            std::string term = (opt.stem && !has_digit) ? stem(tok) : tok;
            counts[j][term] += 1.0;
            vocab.insert(std::move(term));
        }
    }
    if (vocab.empty()) throw EmptyVocabulary("build_matrix: every document is empty after filtering");

    TermDocumentMatrix out;
    out.terms.assign(vocab.begin(), vocab.end());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < out.terms.size(); ++i) index.emplace(out.terms[i], i);
    out.matrix = Matrix(out.terms.size(), docs.size());
    for (std::size_t j = 0; j < docs.size(); ++j) {
        out.doc_ids.push_back(docs[j].id);
        double sq = 0.0;
        for (const auto& [term, c] : counts[j]) sq += c * c;
        if (sq == 0.0) {
            if (opt.warn_on_empty)
                std::cerr << "warning: document '" << docs[j].id << "' is empty after filtering; kept as a zero column\n";
            continue;
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (const auto& [term, c] : counts[j]) out.matrix(index.at(term), j) = c * inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Topic structure

inline SimilarityMatrix similarity_matrix(const TopicModel& tm) {
    return {matmul_tn(tm.relevance, tm.relevance)};
}

using PairSet = std::set<std::pair<std::size_t, std::size_t>>;

/// Unordered pairs (i < j) of documents sharing at least one topic.
inline PairSet intra_topic_pairs(const TopicModel& tm) {
    PairSet out;
    const std::size_t n = tm.num_docs(), k = tm.num_topics();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t)
                if (tm.relevance(t, i) > 0.0 && tm.relevance(t, j) > 0.0) {
                    out.emplace(i, j);
                    break;
                }
    return out;
}

/// Builds ρ from (doc, topic, weight) judgments; each document's weights are scaled to unit L2 norm.
/// Topics are ordered lexicographically. Documents without judgments are an error.
inline TopicModel topic_model_from_judgments(const std::vector<std::string>& doc_ids,
                                             const std::vector<std::tuple<std::string, std::string, double>>& judgments) {
    std::set<std::string> topics;
    for (const auto& [d, t, w] : judgments) topics.insert(t);
    TopicModel tm;
    tm.topic_ids.assign(topics.begin(), topics.end());
    std::map<std::string, std::size_t> tix, dix;
    for (std::size_t t = 0; t < tm.topic_ids.size(); ++t) tix[tm.topic_ids[t]] = t;
    for (std::size_t d = 0; d < doc_ids.size(); ++d) dix[doc_ids[d]] = d;
    tm.relevance = Matrix(tm.topic_ids.size(), doc_ids.size());
    for (const auto& [d, t, w] : judgments) {
        auto it = dix.find(d);
        if (it == dix.end()) throw DataError("topic labels mention unknown document '" + d + "'");
        if (!(w > 0.0) || !std::isfinite(w)) throw DataError("topic labels: relevance must be positive for '" + d + "'");
        tm.relevance(tix[t], it->second) += w;
    }
    for (std::size_t d = 0; d < doc_ids.size(); ++d) {
        double s = 0.0;
        for (std::size_t t = 0; t < tm.num_topics(); ++t) s += tm.relevance(t, d) * tm.relevance(t, d);
        if (s == 0.0) throw DataError("topic labels: document '" + doc_ids[d] + "' has no topic");
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t t = 0; t < tm.num_topics(); ++t) tm.relevance(t, d) *= inv;
    }
    return tm;
}

// ---------------------------------------------------------------------------
// Synthetic collections

struct SyntheticCollection {
    std::vector<Document> docs;
    TopicModel topics;
};

inline std::string synth_topic_term(std::size_t topic, std::size_t j) {
    return "topic" + std::to_string(topic + 1) + "term" + std::to_string(j + 1);
}
inline std::string synth_shared_term(std::size_t j) { return "shared" + std::to_string(j + 1); }

/// Single-topic documents: each token is drawn from the shared pool with probability
/// `noise_rate`, otherwise uniformly from the document's topic vocabulary.
inline SyntheticCollection synthesize_collection(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);
    std::bernoulli_distribution noisy(spec.noise_rate);
    std::uniform_int_distribution<std::size_t> primary(0, spec.vocab_per_topic - 1);
    std::uniform_int_distribution<std::size_t> shared(0, spec.shared_vocab ? spec.shared_vocab - 1 : 0);

    SyntheticCollection out;
    out.topics = TopicModel::from_counts(spec.distribution);
    const std::size_t n = spec.num_docs();
    const int width = static_cast<int>(std::to_string(n).size());
    std::size_t d = 0;
    for (std::size_t t = 0; t < spec.distribution.size(); ++t) {
        for (std::size_t i = 0; i < spec.distribution[t]; ++i, ++d) {
            std::ostringstream id;
            id << 'd';
            id.width(std::max(width, 3));
            id.fill('0');
            id << (d + 1);
            std::string text;
            for (std::size_t w = 0; w < spec.doc_length; ++w) {
                if (w) text.push_back(' ');
                text += noisy(rng) ? synth_shared_term(shared(rng)) : synth_topic_term(t, primary(rng));
            }
            out.docs.push_back({id.str(), std::move(text), {out.topics.topic_ids[t]}});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk corpus: directory of <doc_id>.txt plus optional topics.tsv

struct LoadedCorpus {
    std::vector<Document> docs;
    std::optional<TopicModel> topics;
};

/// Parses `doc_id TAB topic_id [TAB weight]` lines.
inline std::vector<std::tuple<std::string, std::string, double>> read_topic_labels(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open topic labels: " + path.string());
    std::vector<std::tuple<std::string, std::string, double>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) f.push_back(cell);
        if (f.size() < 2 || f.size() > 3 || f[0].empty() || f[1].empty())
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected doc_id<TAB>topic_id[<TAB>weight]");
        double w = 1.0;
        if (f.size() == 3 && !detail::parse_double(f[2], w))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad relevance weight");
        out.emplace_back(f[0], f[1], w);
    }
    return out;
}

inline LoadedCorpus load_corpus_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("corpus directory has no .txt files: " + dir.string());

    LoadedCorpus out;
    std::vector<std::string> ids;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        std::stringstream buf;
        buf << is.rdbuf();
        out.docs.push_back({f.stem().string(), buf.str(), {}});
        ids.push_back(f.stem().string());
    }
    const auto labels = dir / "topics.tsv";
    if (fs::exists(labels)) {
        auto judgments = read_topic_labels(labels);
        out.topics = topic_model_from_judgments(ids, judgments);
        std::map<std::string, std::size_t> dix;
        for (std::size_t d = 0; d < ids.size(); ++d) dix[ids[d]] = d;
        for (const auto& [d, t, w] : judgments) out.docs[dix[d]].topic_labels.push_back(t);
    }
    return out;
}

inline void write_corpus_dir(const std::filesystem::path& dir, const std::vector<Document>& docs) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream labels(dir / "topics.tsv", std::ios::binary);
    if (!labels) throw DataError("cannot write " + (dir / "topics.tsv").string());
    for (const auto& d : docs) {
        std::ofstream os(dir / (d.id + ".txt"), std::ios::binary);
        if (!os) throw DataError("cannot write document " + d.id);
        os << d.text << '\n';
        for (const auto& t : d.topic_labels) labels << d.id << '\t' << t << '\n';
    }
}

}  // namespace irr::corpus
