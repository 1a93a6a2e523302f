// Command-line front end: run one experiment from a config file, sweep a
// (method x noise x concentration x seed) grid from a manifest, or summarize
// finished runs into a comparison table.
//
// Exit codes: 0 success, 1 config/usage error, 2 run failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsir/config.hpp"
#include "fedsir/metrics.hpp"
#include "fedsir/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitRunFailure = 2;

fs::path resolve_out(const fs::path& out) {
    const char* root = std::getenv("FEDSIR_OUT_ROOT");
    if (root != nullptr && *root != '\0' && out.is_relative()) {
        return fs::path(root) / out;
    }
    return out;
}

std::string compact(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

fedsir::ExperimentResult execute(fedsir::ParsedConfig& cfg) {
    if (cfg.feature_file) {
        int num_classes = 0;
        int input_dim = 0;
        std::vector<fedsir::Sample> samples =
            fedsir::load_feature_file(*cfg.feature_file, num_classes,
                                      input_dim);
        cfg.experiment.data.num_classes = num_classes;
        cfg.experiment.data.input_dim = input_dim;
        cfg.experiment.validate();
        return fedsir::run_experiment(
            cfg.experiment,
            fedsir::environment_from_samples(cfg.experiment,
                                             std::move(samples)));
    }
    return fedsir::run_experiment(cfg.experiment);
}

std::string similarity_csv(const fedsir::Stage1Result& stage1) {
    std::ostringstream out;
    out << "client_id,class_a,class_b,similarity\n";
    for (std::size_t k = 0; k < stage1.similarities.size(); ++k) {
        const fedsir::ClassSimilarityMatrix& sim = stage1.similarities[k];
        int id = k < stage1.stats.size() ? stage1.stats[k].client_id
                                         : static_cast<int>(k);
        for (int a : sim.observed) {
            for (int b : sim.observed) {
                out << id << "," << a << "," << b << ","
                    << sim.values(static_cast<std::size_t>(a),
                                  static_cast<std::size_t>(b))
                    << "\n";
            }
        }
    }
    return out.str();
}

void write_run_outputs(const fs::path& dir, const fedsir::ParsedConfig& cfg,
                       const fedsir::ExperimentResult& result,
                       bool dump_similarity) {
    fs::create_directories(dir);
    fedsir::write_text_atomic(dir / "metrics.csv", fedsir::metrics_csv(result));
    fedsir::write_text_atomic(dir / "summary.json",
                              fedsir::summarize(cfg, result).dump(2) + "\n");
    fedsir::write_text_atomic(dir / "config.ini", fedsir::emit_config(cfg));
    if (dump_similarity && result.has_stage1) {
        fedsir::write_text_atomic(dir / "similarity.csv",
                                  similarity_csv(result.stage1));
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir,
            const std::vector<std::string>& overrides, bool dump_similarity) {
    fedsir::ParsedConfig cfg;
    try {
        cfg = fedsir::parse_config(config_path);
        if (seed) fedsir::set_master_seed(cfg, *seed);
        for (const std::string& ov : overrides) {
            fedsir::apply_override(cfg, ov);
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        fedsir::ExperimentResult result = execute(cfg);
        fs::path dir = resolve_out(out_dir);
        write_run_outputs(dir, cfg, result, dump_similarity);
        std::cout << "method=" << fedsir::method_name(cfg.experiment.method)
                  << " seed=" << cfg.experiment.rng_seed
                  << " final_accuracy=" << result.final_accuracy
                  << " best_accuracy=" << result.best_accuracy << " out="
                  << dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "run failure: " << e.what() << "\n";
        return kExitRunFailure;
    }
}

struct Manifest {
    std::string config_path;
    std::vector<std::string> methods;
    std::vector<double> noise_rates;
    std::vector<double> concentrations;
    std::vector<std::uint64_t> seeds;
    std::string out = "runs";
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> items;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

Manifest parse_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open manifest: " + path.string());
    }
    Manifest m;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw std::invalid_argument("manifest line " +
                                            std::to_string(lineno) +
                                            ": unterminated section");
            }
            section = trim(s.substr(1, s.size() - 2));
            if (section != "sweep") {
                throw std::invalid_argument("manifest section [" + section +
                                            "]: only [sweep] is recognized");
            }
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos || section != "sweep") {
            throw std::invalid_argument("manifest line " +
                                        std::to_string(lineno) +
                                        ": expected 'key = value' in [sweep]");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key == "config") {
            m.config_path = value;
        } else if (key == "methods") {
            m.methods = split_list(value);
        } else if (key == "noise_rates") {
            for (const std::string& item : split_list(value)) {
                m.noise_rates.push_back(std::stod(item));
            }
        } else if (key == "concentrations") {
            for (const std::string& item : split_list(value)) {
                m.concentrations.push_back(std::stod(item));
            }
        } else if (key == "seeds") {
            for (const std::string& item : split_list(value)) {
                m.seeds.push_back(std::stoull(item));
            }
        } else if (key == "out") {
            m.out = value;
        } else {
            throw std::invalid_argument("sweep." + key + ": unknown key");
        }
    }
    if (m.config_path.empty()) {
        throw std::invalid_argument("sweep.config: required key missing");
    }
    if (m.methods.empty()) {
        throw std::invalid_argument("sweep.methods: required key missing");
    }
    if (m.seeds.empty()) {
        throw std::invalid_argument("sweep.seeds: required key missing");
    }
    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        for (std::size_t j = i + 1; j < m.seeds.size(); ++j) {
            if (m.seeds[i] == m.seeds[j]) {
                throw std::invalid_argument("sweep.seeds: duplicate seed " +
                                            std::to_string(m.seeds[i]));
            }
        }
    }
    return m;
}

int cmd_sweep(const std::string& manifest_path) {
    Manifest manifest;
    fedsir::ParsedConfig base;
    try {
        fs::path mpath(manifest_path);
        manifest = parse_manifest(mpath);
        fs::path cfg_path(manifest.config_path);
        if (cfg_path.is_relative()) cfg_path = mpath.parent_path() / cfg_path;
        base = fedsir::parse_config(cfg_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (manifest.noise_rates.empty()) {
        manifest.noise_rates = {base.experiment.data.noise_rate};
    }
    if (manifest.concentrations.empty()) {
        manifest.concentrations = {
            base.experiment.data.dirichlet_concentration};
    }

    fs::path out_root = resolve_out(manifest.out);
    int failures = 0;
    for (const std::string& method : manifest.methods) {
        for (double rho : manifest.noise_rates) {
            for (double alpha : manifest.concentrations) {
                for (std::uint64_t seed : manifest.seeds) {
                    std::string tag = method + "_rho" + compact(rho) +
                                      "_alpha" + compact(alpha) + "_seed" +
                                      std::to_string(seed);
                    fedsir::ParsedConfig cfg = base;
                    try {
                        fedsir::apply_override(cfg,
                                               "experiment.method=" + method);
                        fedsir::apply_override(
                            cfg, "data.noise_rate=" + compact(rho));
                        fedsir::apply_override(
                            cfg,
                            "data.dirichlet_concentration=" + compact(alpha));
                        fedsir::set_master_seed(cfg, seed);
                        fedsir::ExperimentResult result = execute(cfg);
                        write_run_outputs(out_root / tag, cfg, result, false);
                        std::cout << tag << ": final_accuracy="
                                  << result.final_accuracy << "\n";
                    } catch (const std::exception& e) {
                        std::cerr << tag << ": FAILED: " << e.what() << "\n";
                        ++failures;
                    }
                }
            }
        }
    }
    if (failures > 0) {
        std::cerr << failures << " run(s) failed\n";
        return kExitRunFailure;
    }
    return 0;
}

int cmd_report(const std::string& dir) {
    struct CellStats {
        std::vector<double> finals;
    };
    std::map<std::string, std::map<double, CellStats>> table;
    std::size_t found = 0;
    if (!fs::exists(dir)) {
        std::cerr << "report error: no such directory: " << dir << "\n";
        return kExitConfigError;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() ||
            entry.path().filename() != "summary.json") {
            continue;
        }
        std::ifstream in(entry.path());
        json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            std::cerr << "skipping " << entry.path() << ": " << e.what()
                      << "\n";
            continue;
        }
        std::string method = j.at("method").get<std::string>();
        double rho = j.at("noise_rate").get<double>();
        table[method][rho].finals.push_back(
            j.at("final_accuracy").get<double>());
        ++found;
    }
    if (found == 0) {
        std::cerr << "report error: no summary.json files under " << dir
                  << "\n";
        return kExitConfigError;
    }

    std::vector<double> rhos;
    for (const auto& [method, row] : table) {
        for (const auto& [rho, cell] : row) {
            if (std::find(rhos.begin(), rhos.end(), rho) == rhos.end()) {
                rhos.push_back(rho);
            }
        }
    }
    std::sort(rhos.begin(), rhos.end());

    std::ostringstream text;
    std::ostringstream csv;
    csv << "method,noise_rate,mean_accuracy,std_accuracy,num_seeds\n";
    text << "method";
    for (double rho : rhos) text << "\trho=" << rho;
    text << "\n";
    for (const auto& [method, row] : table) {
        text << method;
        for (double rho : rhos) {
            auto it = row.find(rho);
            if (it == row.end()) {
                text << "\t—";
                continue;
            }
            const std::vector<double>& xs = it->second.finals;
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            var /= static_cast<double>(xs.size());
            double sd = std::sqrt(var);
            text << "\t" << mean << " ± " << sd << " (n=" << xs.size() << ")";
            csv << method << "," << rho << "," << mean << "," << sd << ","
                << xs.size() << "\n";
        }
        text << "\n";
    }
    std::cout << text.str();
    fedsir::write_text_atomic(fs::path(dir) / "report.csv", csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated label-noise simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    bool dump_similarity = false;
    CLI::App* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "experiment config file")
        ->required();
    run->add_option("--seed", seed, "override the experiment seed");
    run->add_option("--out", out_dir, "output directory (default: .)");
    run->add_option("--override", overrides,
                    "section.key=value config override (repeatable)");
    run->add_flag("--dump-similarity", dump_similarity,
                  "also write the identification-stage class-similarity "
                  "matrices as CSV");

    std::string manifest_path;
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
    sweep->add_option("manifest", manifest_path, "sweep manifest file")
        ->required();

    std::string report_dir;
    CLI::App* report =
        app.add_subcommand("report", "tabulate summaries under a directory");
    report->add_option("dir", report_dir, "directory of run outputs")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitConfigError;
    }

    if (run->parsed()) {
        return cmd_run(config_path, seed, out_dir, overrides, dump_similarity);
    }
    if (sweep->parsed()) return cmd_sweep(manifest_path);
    if (report->parsed()) return cmd_report(report_dir);
    return kExitConfigError;
}
