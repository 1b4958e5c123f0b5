#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "irr/experiment.hpp"

namespace {

namespace ex = irr::experiment;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kVerifyFailed = 3;

/// String-valued flags; only those given on the command line override the config file.
struct FlagSet {
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::map<std::string, std::string> values;
    std::string config;

    void add(CLI::App* app, const std::string& key, const std::string& names, const std::string& help) {
        options.emplace_back(key, app->add_option(names, values[key], help));
    }

    [[nodiscard]] std::set<std::string> keys() const {
        std::set<std::string> k;
        for (const auto& [key, opt] : options) k.insert(key);
        if (k.contains("seeds")) k.insert("seed");
        return k;
    }

    void apply(ex::ExperimentConfig& c) const {
        if (!config.empty()) ex::apply_config_file(c, config, keys());
        for (const auto& [key, opt] : options)
            if (opt->count()) ex::apply_setting(c, key, values.at(key));
    }
};

void add_synth_flags(CLI::App* app, FlagSet& f) {
    f.add(app, "vocab-per-topic", "--vocab-per-topic", "primary terms per topic (default 40)");
    f.add(app, "shared-vocab", "--shared-vocab", "shared noise terms (default 3)");
    f.add(app, "doc-length", "--doc-length", "tokens per document (default 40)");
    f.add(app, "noise", "--noise", "probability a token comes from the shared pool (default 0.3)");
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    file.open(path, std::ios::binary);
    if (!file) throw irr::DataError("cannot write " + path);
    return file;
}

int cmd_synth(const FlagSet& f) {
    ex::ExperimentConfig c;
    f.apply(c);
    if (c.dists.size() != 1) throw ex::ConfigError("synth: give exactly one distribution");
    if (c.seeds.size() != 1) throw ex::ConfigError("synth: give exactly one seed");
    if (c.out.empty()) throw ex::ConfigError("synth: --out directory required");
    irr::corpus::SynthSpec spec = c.synth;
    spec.distribution = c.dists.front();
    spec.rng_seed = c.seeds.front();
    try {
        spec.validate();
    } catch (const irr::ParameterError& e) {
        throw ex::ConfigError(e.what());
    }
    ex::write_synth_corpus(c.out, spec);
    std::cerr << "wrote " << spec.num_docs() << " documents to " << c.out << '\n';
    return kOk;
}

int cmd_run(const FlagSet& f) {
    ex::ExperimentConfig c;
    f.apply(c);
    const auto rows = ex::run_experiment(c);
    std::ofstream file;
    ex::write_rows(open_out(c.out, file), rows);
    std::cerr << rows.size() << " rows\n";
    return kOk;
}

struct PlotArgs {
    std::string input, out, x = "dominance_ratio", y = "kappa", series = "method";
};

int cmd_plotdata(const PlotArgs& a) {
    std::ifstream is(a.input);
    if (!is) throw irr::DataError("cannot open report " + a.input);
    const auto table = ex::read_table(is, a.input);
    const auto pts = ex::plot_points(table, a.x, a.y, a.series);
    std::ofstream file;
    ex::write_plot_points(open_out(a.out, file), pts);
    return kOk;
}

struct VerifyArgs {
    std::size_t instances = 100;
    std::uint64_t seed = 1000;
    double noise = -1.0;
    std::size_t sv_trials = 1000;
    bool inject_fault = false;
    std::string out;
};

int cmd_verify(const VerifyArgs& a) {
    ex::VerifyOptions opt;
    opt.instances = a.instances;
    opt.seed = a.seed;
    if (a.noise >= 0.0) opt.noise = a.noise;
    opt.sv_trials = a.sv_trials;
    opt.inject_fault = a.inject_fault;
    const auto sum = ex::run_verification(opt);
    std::ofstream file;
    auto& os = open_out(a.out, file);
    irr::theory::write_jsonl(os, sum.reports);
    const auto js = sum.to_json();
    os << js.dump() << '\n';
    std::cerr << "verify: " << js.dump() << '\n';
    if (sum.cosine_stated_violations)
        std::cerr << "note: " << sum.cosine_stated_violations
                  << " instance(s) break the stated cosine lower bound for pairs with sim < eps; "
                     "the corrected bound is what gates the exit code\n";
    return sum.failures() ? kVerifyFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subspace document representation: VSM, LSI and iterative residual rescaling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "irrkit 1.0");

    FlagSet synth_f;
    auto* synth = app.add_subcommand("synth", "write a synthetic corpus directory");
    synth->add_option("--config", synth_f.config, "key = value file; flags override")->check(CLI::ExistingFile);
    synth_f.add(synth, "dist", "--dist", "documents per topic, e.g. 46,4");
    synth_f.add(synth, "seeds", "--seed,--seeds", "random seed");
    synth_f.add(synth, "out", "--out,-o", "output directory");
    add_synth_flags(synth, synth_f);

    FlagSet run_f;
    auto* run = app.add_subcommand("run", "run methods over datasets and seeds, write a CSV report");
    run->add_option("--config", run_f.config, "key = value file; flags override")->check(CLI::ExistingFile);
    run_f.add(run, "dist", "--dist", "synthetic distributions: '25,25;46,4' or 'sweep'");
    run_f.add(run, "corpus", "--corpus", "corpus directory of .txt files with topics.tsv");
    run_f.add(run, "matrix", "--matrix", "term-document CSV (header: term,<doc ids>)");
    run_f.add(run, "labels", "--labels", "topics.tsv for --matrix");
    run_f.add(run, "stopwords", "--stopwords", "stopword file, one per line");
    run_f.add(run, "seeds", "--seed,--seeds", "seeds: 1-10 or 1,2,3 (default 1)");
    run_f.add(run, "methods", "--methods", "vsm,lsi,irr,irr:auto,irr:<q> (default vsm,lsi,irr)");
    run_f.add(run, "q", "--q", "auto or a float; used by plain 'irr' (default auto)");
    run_f.add(run, "alpha", "--alpha", "auto-scale slope (default 3.5)");
    run_f.add(run, "beta", "--beta", "auto-scale offset (default 0)");
    run_f.add(run, "ell", "--ell", "<int> or ratio:<theta> (default: topic count)");
    run_f.add(run, "topics", "--topics", "known topic count k");
    run_f.add(run, "clusters", "--clusters", "cluster count (default k, else ell)");
    run_f.add(run, "metrics", "--metrics", "kappa,cluster (default kappa)");
    run_f.add(run, "jobs", "--jobs,-j", "worker threads (default: all cores)");
    run_f.add(run, "out", "--out,-o", "CSV path (default stdout)");
    add_synth_flags(run, run_f);

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "numerically check the perturbation theorems");
    verify->add_option("--trials", va.instances, "noisy instances (default 100)");
    verify->add_option("--seed", va.seed, "base seed (default 1000)");
    verify->add_option("--noise", va.noise, "fixed noise level (default cycles 0.05, 0.1, 0.2)")
        ->check(CLI::Range(0.0, 1e6));
    verify->add_option("--sv-trials", va.sv_trials, "singular-value perturbation pairs (default 1000)");
    verify->add_option("--out,-o", va.out, "JSON-lines output (default stdout)");
    verify->add_flag("--inject-fault", va.inject_fault, "self-test: reverse the tangent-bound comparison")
        ->group("");

    PlotArgs pa;
    auto* plot = app.add_subcommand("plotdata", "aggregate a run report into tidy plot data");
    plot->add_option("report", pa.input, "CSV written by 'run'")->required()->check(CLI::ExistingFile);
    plot->add_option("--x", pa.x, "x column (default dominance_ratio)");
    plot->add_option("--y", pa.y, "metric column (default kappa)");
    plot->add_option("--series", pa.series, "series column (default method)");
    plot->add_option("--out,-o", pa.out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*synth) return cmd_synth(synth_f);
        if (*run) return cmd_run(run_f);
        if (*verify) return cmd_verify(va);
        if (*plot) return cmd_plotdata(pa);
    } catch (const ex::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const irr::ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
