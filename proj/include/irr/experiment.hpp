#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "irr/corpus.hpp"
#include "irr/evalmetrics.hpp"
#include "irr/subspace.hpp"
#include "irr/theory.hpp"

namespace irr::experiment {

/// Bad flag or config value; maps to the usage exit code.
struct ConfigError : ParameterError {
    using ParameterError::ParameterError;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    if (!irr::detail::parse_double(v, x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ConfigError(key + ": integer out of range '" + v + "'");
    }
}

inline std::string fmt(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration

enum class Metric { Kappa, Cluster };

struct MethodSpec {
    subspace::Method method = subspace::Method::VSM;
    std::variant<double, subspace::AutoScale> q = subspace::AutoScale{};
    std::string label;
};

/// "vsm", "lsi", "irr" (q from the q setting), "irr:auto", "irr:<q>".
inline MethodSpec parse_method(const std::string& token, const std::string& default_q) {
    MethodSpec m;
    const auto colon = token.find(':');
    const std::string head = token.substr(0, colon);
    try {
        m.method = subspace::method_from_string(head);
    } catch (const ParameterError&) {
        throw ConfigError("methods: unknown method '" + token + "'");
    }
    if (m.method != subspace::Method::IRR) {
        if (colon != std::string::npos) throw ConfigError("methods: only irr takes a q suffix ('" + token + "')");
        m.label = head;
        return m;
    }
    const std::string qs = colon == std::string::npos ? default_q : token.substr(colon + 1);
    if (qs == "auto") {
        m.q = subspace::AutoScale{};
        m.label = "irr:auto";
    } else {
        const double q = detail::to_double("q", qs);
        if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("q: must be finite and >= 0");
        m.q = q;
        m.label = "irr:" + detail::fmt(q);
    }
    return m;
}

inline const std::vector<std::vector<std::size_t>>& two_topic_types() {
    static const std::vector<std::vector<std::size_t>> t = {{25, 25}, {30, 20}, {35, 15}, {40, 10},
                                                            {43, 7},  {45, 5},  {46, 4}};
    return t;
}

inline const std::vector<std::vector<std::size_t>>& five_topic_types() {
    static const std::vector<std::vector<std::size_t>> t = {
        {10, 10, 10, 10, 10}, {18, 8, 8, 8, 8}, {26, 6, 6, 6, 6}, {30, 5, 5, 5, 5}};
    return t;
}

/// "25,25" or several sets separated by ';'. "sweep" expands to the seven two-topic types.
inline std::vector<std::vector<std::size_t>> parse_distributions(const std::string& v) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& part : detail::split(v, ';')) {
        if (part.empty()) continue;
        if (part == "sweep") {
            for (const auto& d : two_topic_types()) out.push_back(d);
            continue;
        }
        std::vector<std::size_t> d;
        for (const auto& c : detail::split(part, ',')) {
            const auto x = detail::to_uint("dist", c);
            if (x == 0) throw ConfigError("dist: topic document counts must be positive");
            d.push_back(x);
        }
        out.push_back(std::move(d));
    }
    if (out.empty()) throw ConfigError("dist: no distribution given");
    return out;
}

/// "3", "1,2,5", "1-10" and combinations.
inline std::vector<std::uint64_t> parse_seeds(const std::string& v) {
    std::vector<std::uint64_t> out;
    for (const auto& part : detail::split(v, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(detail::to_uint("seeds", part));
            continue;
        }
        const auto lo = detail::to_uint("seeds", detail::trim(part.substr(0, dash)));
        const auto hi = detail::to_uint("seeds", detail::trim(part.substr(dash + 1)));
        if (hi < lo) throw ConfigError("seeds: empty range '" + part + "'");
        if (hi - lo >= 100000) throw ConfigError("seeds: range too large '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (out.empty()) throw ConfigError("seeds: none given");
    return out;
}

struct ExperimentConfig {
    std::vector<std::vector<std::size_t>> dists;
    std::optional<std::filesystem::path> corpus_dir;
    std::optional<std::filesystem::path> matrix_file;
    std::optional<std::filesystem::path> labels_file;
    std::optional<std::filesystem::path> stopwords_file;
    corpus::SynthSpec synth;  // distribution and rng_seed are filled per dataset

    std::vector<std::string> method_tokens = {"vsm", "lsi", "irr"};
    std::string q = "auto";
    double alpha = 3.5;
    double beta = 0.0;
    std::variant<std::monostate, std::size_t, subspace::ResidualRatio> ell;
    std::optional<std::size_t> topics;
    std::optional<std::size_t> clusters;
    std::set<Metric> metrics = {Metric::Kappa};
    std::vector<std::uint64_t> seeds = {1};
    std::string out;
    std::size_t jobs = 0;  // 0: hardware concurrency

    [[nodiscard]] std::vector<MethodSpec> methods() const {
        std::vector<MethodSpec> out_m;
        std::set<std::string> seen;
        for (const auto& t : method_tokens) {
            auto m = parse_method(t, q);
            if (!seen.insert(m.label).second) throw ConfigError("methods: duplicate method '" + m.label + "'");
            out_m.push_back(std::move(m));
        }
        return out_m;
    }

    void validate() const {
        const int sources = !dists.empty() + corpus_dir.has_value() + matrix_file.has_value();
        if (sources == 0) throw ConfigError("no input: give one of dist, corpus, matrix");
        if (sources > 1) throw ConfigError("conflicting inputs: give only one of dist, corpus, matrix");
        if (matrix_file && !labels_file) throw ConfigError("matrix input requires labels");
        if (method_tokens.empty()) throw ConfigError("methods: at least one method required");
        if (metrics.empty()) throw ConfigError("metrics: at least one metric required");
        if (seeds.empty()) throw ConfigError("seeds: none given");
        if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("alpha/beta must be finite");
        (void)methods();
        if (!dists.empty()) {
            corpus::SynthSpec s = synth;
            s.distribution = dists.front();
            try {
                s.validate();
            } catch (const ParameterError& e) {
                throw ConfigError(e.what());
            }
        }
    }
};

inline std::string normalize_key(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    while (!k.empty() && k.front() == '-') k.erase(k.begin());
    return k;
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> k = {
        "dist",  "corpus", "matrix", "labels", "stopwords", "methods", "q",   "alpha",     "beta",
        "ell",   "topics", "clusters", "metrics", "seeds", "seed",  "out", "jobs", "vocab-per-topic",
        "shared-vocab", "doc-length", "noise"};
    return k;
}

inline void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& v) {
    const std::string key = normalize_key(raw_key);
    if (key == "dist") {
        c.dists = parse_distributions(v);
    } else if (key == "corpus") {
        c.corpus_dir = v;
    } else if (key == "matrix") {
        c.matrix_file = v;
    } else if (key == "labels") {
        c.labels_file = v;
    } else if (key == "stopwords") {
        c.stopwords_file = v;
    } else if (key == "methods") {
        c.method_tokens.clear();
        for (const auto& t : detail::split(v, ','))
            if (!t.empty()) c.method_tokens.push_back(t);
        (void)c.methods();
    } else if (key == "q") {
        if (v != "auto") {
            const double q = detail::to_double("q", v);
            if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("q: must be finite and >= 0");
        }
        c.q = v;
    } else if (key == "alpha") {
        c.alpha = detail::to_double("alpha", v);
    } else if (key == "beta") {
        c.beta = detail::to_double("beta", v);
    } else if (key == "ell") {
        if (v.rfind("ratio:", 0) == 0) {
            const double t = detail::to_double("ell", v.substr(6));
            if (!(t > 0.0 && t < 1.0)) throw ConfigError("ell: ratio threshold must lie in (0,1)");
            c.ell = subspace::ResidualRatio{t};
        } else {
            const auto l = detail::to_uint("ell", v);
            if (l == 0) throw ConfigError("ell: must be >= 1");
            c.ell = static_cast<std::size_t>(l);
        }
    } else if (key == "topics") {
        const auto k = detail::to_uint("topics", v);
        if (k == 0) throw ConfigError("topics: must be >= 1");
        c.topics = k;
    } else if (key == "clusters") {
        const auto k = detail::to_uint("clusters", v);
        if (k == 0) throw ConfigError("clusters: must be >= 1");
        c.clusters = k;
    } else if (key == "metrics") {
        c.metrics.clear();
        for (const auto& t : detail::split(v, ',')) {
            if (t == "kappa") c.metrics.insert(Metric::Kappa);
            else if (t == "cluster") c.metrics.insert(Metric::Cluster);
            else throw ConfigError("metrics: unknown metric '" + t + "' (kappa, cluster)");
        }
    } else if (key == "seeds" || key == "seed") {
        c.seeds = parse_seeds(v);
    } else if (key == "out") {
        c.out = v;
    } else if (key == "jobs") {
        c.jobs = detail::to_uint("jobs", v);
    } else if (key == "vocab-per-topic") {
        c.synth.vocab_per_topic = detail::to_uint(key, v);
    } else if (key == "shared-vocab") {
        c.synth.shared_vocab = detail::to_uint(key, v);
    } else if (key == "doc-length") {
        c.synth.doc_length = detail::to_uint(key, v);
    } else if (key == "noise") {
        c.synth.noise_rate = detail::to_double("noise", v);
        if (!(c.synth.noise_rate >= 0.0 && c.synth.noise_rate < 1.0)) throw ConfigError("noise: must lie in [0,1)");
    } else {
        throw ConfigError("unknown key '" + raw_key + "'");
    }
}

/// key = value lines; '#' starts a comment; values may be double-quoted.
inline std::vector<std::tuple<std::string, std::string, std::size_t>> read_config_file(
    const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::vector<std::tuple<std::string, std::string, std::size_t>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string body = line;
        bool quoted = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '"') quoted = !quoted;
            if (body[i] == '#' && !quoted) {
                body.resize(i);
                break;
            }
        }
        body = detail::trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(body.substr(0, eq)), val = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": missing key");
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        out.emplace_back(std::move(key), std::move(val), lineno);
    }
    return out;
}

/// Applies a config file; errors carry file:line.
inline void apply_config_file(ExperimentConfig& c, const std::filesystem::path& path,
                              const std::set<std::string>& allowed) {
    for (const auto& [key, val, line] : read_config_file(path)) {
        const std::string where = path.string() + ":" + std::to_string(line) + ": ";
        if (!allowed.contains(normalize_key(key))) throw ConfigError(where + "unknown key '" + key + "'");
        try {
            apply_setting(c, key, val);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
    std::string id;
    corpus::TermDocumentMatrix tdm;
    corpus::TopicModel topics;
};

inline std::string dist_label(const std::vector<std::size_t>& d) {
    std::string s;
    for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "-" : "") + std::to_string(d[i]);
    return s;
}

inline std::set<std::string> stopwords_for(const ExperimentConfig& c) {
    return c.stopwords_file ? corpus::load_stopwords(*c.stopwords_file) : corpus::default_stopwords();
}

inline Dataset synth_dataset(const ExperimentConfig& c, const std::vector<std::size_t>& dist, std::uint64_t seed,
                             const std::set<std::string>& stop) {
    corpus::SynthSpec s = c.synth;
    s.distribution = dist;
    s.rng_seed = seed;
    auto col = corpus::synthesize_collection(s);
    corpus::BuildOptions bo;
    bo.warn_on_empty = false;
    return {"synth:" + dist_label(dist), corpus::build_matrix(col.docs, stop, bo), std::move(col.topics)};
}

/// CSV with a header row `term,<doc ids>` and one row per term. Columns are scaled to unit length.
inline corpus::TermDocumentMatrix read_matrix_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open matrix file: " + path.string());
    corpus::TermDocumentMatrix t;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> data;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split(line, ',');
        if (t.doc_ids.empty()) {
            if (cells.size() < 2) throw DataError(path.string() + ":1: header needs at least one document id");
            t.doc_ids.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != t.doc_ids.size() + 1)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.doc_ids.size() + 1) + " cells");
        t.terms.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double x = 0.0;
            if (!irr::detail::parse_double(cells[j], x) || !std::isfinite(x) || x < 0.0)
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad entry '" + cells[j] + "'");
            data.push_back(x);
        }
    }
    if (t.terms.empty()) throw DataError("matrix file has no term rows: " + path.string());
    t.matrix = Matrix(t.terms.size(), t.doc_ids.size(), std::move(data));
    for (std::size_t j = 0; j < t.matrix.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.matrix.rows(); ++i) s += t.matrix(i, j) * t.matrix(i, j);
        if (s == 0.0) continue;
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t i = 0; i < t.matrix.rows(); ++i) t.matrix(i, j) *= inv;
    }
    return t;
}

inline Dataset load_fixed_dataset(const ExperimentConfig& c) {
    if (c.corpus_dir) {
        auto lc = corpus::load_corpus_dir(*c.corpus_dir);
        if (!lc.topics) throw DataError("corpus has no topics.tsv: " + c.corpus_dir->string());
        Dataset d;
        d.id = c.corpus_dir->filename().string();
        if (d.id.empty()) d.id = c.corpus_dir->parent_path().filename().string();
        d.tdm = corpus::build_matrix(lc.docs, stopwords_for(c));
        d.topics = std::move(*lc.topics);
        return d;
    }
    Dataset d;
    d.id = c.matrix_file->filename().string();
    d.tdm = read_matrix_file(*c.matrix_file);
    d.topics = corpus::topic_model_from_judgments(d.tdm.doc_ids, corpus::read_topic_labels(*c.labels_file));
    return d;
}

// ---------------------------------------------------------------------------
// Runs

inline const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> h = [] {
        std::vector<std::string> v = {"run_id", "dataset", "seed", "method", "q_mode", "q", "ell_mode", "ell", "kappa"};
        for (auto a : eval::kAlgorithms) v.emplace_back(a);
        for (const char* s : {"floor", "ceiling", "clusters", "dominance_ratio", "f_true", "f_estimate", "n", "k",
                              "elapsed_ms"})
            v.emplace_back(s);
        return v;
    }();
    return h;
}

/// Columns excluded from determinism comparisons.
inline const std::set<std::string>& timing_columns() {
    static const std::set<std::string> t = {"elapsed_ms"};
    return t;
}

struct RunRow {
    std::string run_id;
    std::string dataset;
    std::uint64_t seed = 0;
    std::string method;
    std::string q_mode;  // none | fixed | auto
    double q = std::numeric_limits<double>::quiet_NaN();
    std::string ell_mode;  // none | fixed | ratio:<θ>
    std::size_t ell = 0;
    std::optional<double> kappa;
    std::optional<eval::ClusteringOutcome> clustering;
    std::size_t clusters = 0;
    double dominance_ratio = 0.0;
    double f_true = 0.0;
    double f_estimate = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    double elapsed_ms = 0.0;

    [[nodiscard]] std::vector<std::string> cells() const {
        std::vector<std::string> v = {run_id,
                                      dataset,
                                      std::to_string(seed),
                                      method,
                                      q_mode,
                                      std::isnan(q) ? "" : detail::fmt(q),
                                      ell_mode,
                                      ell ? std::to_string(ell) : "",
                                      kappa ? detail::fmt(*kappa) : ""};
        for (auto a : eval::kAlgorithms)
            v.push_back(clustering ? detail::fmt(clustering->scores.at(std::string(a))) : "");
        v.push_back(clustering ? detail::fmt(clustering->floor) : "");
        v.push_back(clustering ? detail::fmt(clustering->ceiling) : "");
        v.push_back(clustering ? std::to_string(clusters) : "");
        for (double x : {dominance_ratio, f_true, f_estimate}) v.push_back(detail::fmt(x));
        v.push_back(std::to_string(n));
        v.push_back(std::to_string(k));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", elapsed_ms);
        v.emplace_back(buf);
        return v;
    }
};

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

inline void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
    os << '\n';
}

inline void write_rows(std::ostream& os, const std::vector<RunRow>& rows) {
    write_csv_line(os, csv_header());
    for (const auto& r : rows) write_csv_line(os, r.cells());
}

/// One method on one dataset. `k` is the known topic count used for ℓ and cluster defaults.
inline RunRow run_method(const ExperimentConfig& c, const Dataset& ds, const MethodSpec& m, std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRow row;
    row.dataset = ds.id;
    row.method = m.label;
    row.n = ds.tdm.num_docs();
    row.k = k;
    const auto st = theory::topic_stats(ds.topics);
    row.dominance_ratio = st.nonuniformity_true;
    row.f_true = st.f_estimate;
    row.f_estimate = subspace::auto_scale(ds.tdm.matrix, 1.0, 0.0);

    subspace::SubspaceBasis basis;
    if (m.method == subspace::Method::VSM) {
        basis = subspace::vsm(ds.tdm.matrix);
        row.q_mode = "none";
        row.ell_mode = "none";
    } else {
        const auto* ratio = std::get_if<subspace::ResidualRatio>(&c.ell);
        const std::size_t fixed = std::holds_alternative<std::size_t>(c.ell) ? std::get<std::size_t>(c.ell) : k;
        row.ell_mode = ratio ? "ratio:" + detail::fmt(ratio->theta) : "fixed";
        if (m.method == subspace::Method::LSI) {
            const std::size_t ell =
                ratio ? subspace::dimensionality_by_residual_ratio(ds.tdm.matrix, 0.0, ratio->theta) : fixed;
            basis = subspace::lsi(ds.tdm.matrix, ell);
            row.q_mode = "fixed";
        } else {
            subspace::IrrConfig ic;
            ic.q = m.q;
            ic.alpha = c.alpha;
            ic.beta = c.beta;
            if (ratio) ic.ell = *ratio;
            else ic.ell = fixed;
            basis = subspace::irr(ds.tdm.matrix, ic);
            row.q_mode = std::holds_alternative<subspace::AutoScale>(m.q) ? "auto" : "fixed";
        }
        row.q = basis.q;
        row.ell = basis.ell();
    }
    const Matrix rep = subspace::represent(ds.tdm.matrix, basis);
    if (c.metrics.contains(Metric::Kappa)) row.kappa = eval::kappa(rep, ds.topics, &ds.tdm.doc_ids);
    if (c.metrics.contains(Metric::Cluster)) {
        row.clusters = c.clusters ? *c.clusters : (k ? k : row.ell);
        if (row.clusters > row.n) throw ConfigError("clusters: more clusters than documents");
        row.clustering = eval::floor_ceiling(rep, ds.topics, row.clusters);
    }
    row.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

inline std::size_t known_topics(const ExperimentConfig& c, const Dataset& ds) {
    return c.topics ? *c.topics : ds.topics.num_topics();
}

/// Every dataset × seed × method; cells run on a pool, rows sorted by run_id.
inline std::vector<RunRow> run_experiment(const ExperimentConfig& c) {
    c.validate();
    const auto methods = c.methods();
    const auto stop = stopwords_for(c);
    std::optional<Dataset> fixed;
    if (c.dists.empty()) fixed = load_fixed_dataset(c);
    const std::size_t n_sets = c.dists.empty() ? 1 : c.dists.size();
    const std::size_t cells = n_sets * c.seeds.size();
    const std::size_t total = cells * methods.size();
    const int width = std::max<int>(4, static_cast<int>(std::to_string(total).size()));

    std::vector<std::vector<RunRow>> results(cells);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    const auto worker = [&] {
        for (std::size_t cell = next++; cell < cells; cell = next++) {
            try {
                const std::size_t set = cell / c.seeds.size();
                const std::uint64_t seed = c.seeds[cell % c.seeds.size()];
                const Dataset ds = fixed ? *fixed : synth_dataset(c, c.dists[set], seed, stop);
                const std::size_t k = known_topics(c, ds);
                for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                    RunRow row = run_method(c, ds, methods[mi], k);
                    row.seed = seed;
                    char id[32];
                    std::snprintf(id, sizeof id, "%0*zu", width, cell * methods.size() + mi);
                    row.run_id = id;
                    results[cell].push_back(std::move(row));
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = cells;
            }
        }
    };
    std::size_t jobs = c.jobs ? c.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, cells);
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < jobs; ++i) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<RunRow> rows;
    for (auto& r : results)
        for (auto& x : r) rows.push_back(std::move(x));
    std::sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) { return a.run_id < b.run_id; });
    return rows;
}

// ---------------------------------------------------------------------------
// Synthetic corpus on disk

/// Documents, topics.tsv and manifest.json for one distribution and seed.
inline void write_synth_corpus(const std::filesystem::path& dir, const corpus::SynthSpec& spec) {
    const auto col = corpus::synthesize_collection(spec);
    corpus::write_corpus_dir(dir, col.docs);
    const auto st = theory::topic_stats(col.topics);
    nlohmann::json j;
    j["distribution"] = spec.distribution;
    j["vocab_per_topic"] = spec.vocab_per_topic;
    j["shared_vocab"] = spec.shared_vocab;
    j["doc_length"] = spec.doc_length;
    j["noise_rate"] = spec.noise_rate;
    j["rng_seed"] = spec.rng_seed;
    j["num_docs"] = spec.num_docs();
    j["dominance_ratio"] = st.nonuniformity_true;
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    if (!os) throw DataError("cannot write " + (dir / "manifest.json").string());
    os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Plot data

inline std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline Table read_table(std::istream& is, const std::string& what = "csv") {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = parse_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(what + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " cells, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw DataError(what + ": empty file");
    return t;
}

struct PlotPoint {
    double x = 0.0;
    std::string series;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

/// Mean and sample standard deviation of `y` per (x, series); rows with an empty y are skipped.
inline std::vector<PlotPoint> plot_points(const Table& t, const std::string& x_col, const std::string& y_col,
                                          const std::string& series_col = "method") {
    const auto xi = t.column(x_col), yi = t.column(y_col), si = t.column(series_col);
    std::vector<std::string> series_order;
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const auto& r : t.rows) {
        if (r[yi].empty()) continue;
        double x = 0.0, y = 0.0;
        if (!irr::detail::parse_double(r[xi], x)) throw DataError("non-numeric " + x_col + " '" + r[xi] + "'");
        if (!irr::detail::parse_double(r[yi], y)) throw DataError("non-numeric " + y_col + " '" + r[yi] + "'");
        if (std::find(series_order.begin(), series_order.end(), r[si]) == series_order.end())
            series_order.push_back(r[si]);
        groups[{r[si], x}].push_back(y);
    }
    std::vector<PlotPoint> out;
    for (const auto& s : series_order)
        for (const auto& [key, ys] : groups) {
            if (key.first != s) continue;
            PlotPoint p{key.second, s, 0.0, 0.0, ys.size()};
            for (double y : ys) p.mean += y;
            p.mean /= static_cast<double>(ys.size());
            if (ys.size() > 1) {
                double ss = 0.0;
                for (double y : ys) ss += (y - p.mean) * (y - p.mean);
                p.sd = std::sqrt(ss / static_cast<double>(ys.size() - 1));
            }
            out.push_back(p);
        }
    return out;
}

inline void write_plot_points(std::ostream& os, const std::vector<PlotPoint>& pts) {
    write_csv_line(os, {"x", "series", "mean", "sd", "count"});
    for (const auto& p : pts)
        write_csv_line(os, {detail::fmt(p.x), p.series, detail::fmt(p.mean), detail::fmt(p.sd), std::to_string(p.count)});
}

// ---------------------------------------------------------------------------
// Theorem verification suite

struct InstanceSpec {
    std::vector<std::size_t> dist;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t m = 60;
};

/// Alternates two-topic and five-topic types; noise cycles through 0.05, 0.1, 0.2 unless fixed.
inline std::vector<InstanceSpec> verification_instances(std::size_t count, std::uint64_t seed,
                                                        std::optional<double> noise = std::nullopt) {
    static constexpr double kNoise[] = {0.05, 0.1, 0.2};
    std::vector<InstanceSpec> out;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& types = i % 2 == 0 ? two_topic_types() : five_topic_types();
        out.push_back({types[(i / 2) % types.size()], noise ? *noise : kNoise[i % 3], seed + i, 60});
    }
    return out;
}

struct VerifyOptions {
    std::size_t instances = 100;
    std::uint64_t seed = 1000;
    std::optional<double> noise;
    std::size_t sv_trials = 1000;
    bool inject_fault = false;  ///< test hook: reverses the tangent-bound comparison
};

struct VerifySummary {
    std::vector<theory::TheoremReport> reports;
    std::size_t instances = 0;
    std::size_t exact_failures = 0;
    std::size_t theorem1_failures = 0;
    std::size_t theorem2_conditioned = 0;
    std::size_t theorem2_failures = 0;
    std::size_t cosine_applicable = 0;
    std::size_t cosine_stated_violations = 0;  ///< instances breaking the stated lower bound
    std::size_t cosine_sound_violations = 0;
    theory::PerturbationSummary sv;

    /// Failures of sound assertions only.
    [[nodiscard]] std::size_t failures() const {
        return exact_failures + theorem1_failures + theorem2_failures + cosine_sound_violations + sv.violations;
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"check", "summary"},
                {"instances", instances},
                {"exact_failures", exact_failures},
                {"theorem1_failures", theorem1_failures},
                {"theorem2_conditioned", theorem2_conditioned},
                {"theorem2_failures", theorem2_failures},
                {"cosine_applicable", cosine_applicable},
                {"cosine_stated_violations", cosine_stated_violations},
                {"cosine_sound_violations", cosine_sound_violations},
                {"sv_trials", sv.trials},
                {"sv_violations", sv.violations},
                {"failures", failures()}};
    }
};

inline VerifySummary run_verification(const VerifyOptions& opt) {
    VerifySummary sum;
    for (const auto& d : two_topic_types()) {
        const auto in = theory::construct_ideal_instance(corpus::TopicModel::from_counts(d), 60, 0.0, opt.seed);
        auto r = theory::verify_theorem1(in);
        r.check = "theorem1_exact";
        const bool ok = r.quantities.at("measured") <= 1e-8 && in.opt.eps_opt <= 1e-8;
        r.holds = ok;
        sum.exact_failures += !ok;
        sum.reports.push_back(std::move(r));
    }
    for (const auto& spec : verification_instances(opt.instances, opt.seed, opt.noise)) {
        const auto in = theory::construct_ideal_instance(corpus::TopicModel::from_counts(spec.dist), spec.m,
                                                         spec.noise, spec.seed);
        auto r1 = theory::verify_theorem1(in);
        auto r2 = theory::verify_theorem2(in);
        auto rc = theory::verify_cosine_bound(in, in.opt.basis);
        if (opt.inject_fault && r2.condition && r2.comparable)
            r2.holds = r2.quantities.at("measured") >= r2.quantities.at("bound");
        for (auto* r : {&r1, &r2, &rc}) {
            r->quantities["seed"] = static_cast<double>(spec.seed);
            r->quantities["noise"] = spec.noise;
            r->quantities["topics"] = static_cast<double>(spec.dist.size());
        }
        ++sum.instances;
        sum.theorem1_failures += !r1.holds;
        if (r2.condition) {
            ++sum.theorem2_conditioned;
            sum.theorem2_failures += !r2.holds;
        }
        if (rc.condition) {
            ++sum.cosine_applicable;
            sum.cosine_stated_violations += !rc.holds;
            sum.cosine_sound_violations += rc.quantities.at("violations_corrected_lower") > 0.0;
        }
        sum.reports.push_back(std::move(r1));
        sum.reports.push_back(std::move(r2));
        sum.reports.push_back(std::move(rc));
    }
    if (opt.sv_trials) sum.sv = theory::verify_sv_perturbation(opt.sv_trials, opt.seed);
    return sum;
}

}  // namespace irr::experiment
