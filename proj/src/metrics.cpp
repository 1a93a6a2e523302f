#include "fedsir/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsir {

namespace {

constexpr const char* kMissing = "—";

std::string cell(double x) {
    if (!std::isfinite(x)) return kMissing;
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return kMissing;
    return std::string(buf, ptr);
}

std::string joined(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ";";
        out += cell(xs[i]);
    }
    return out.empty() ? kMissing : out;
}

}  // namespace

std::string metrics_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "round,global_accuracy,clean_accuracy,mean_noise_rate,"
           "client_noise_rates,aggregation_weights,relabel_examined,"
           "relabel_changed,relabel_changed_correctly\n";
    for (const RoundMetrics& m : result.rounds) {
        double mean_noise = 0.0;
        for (double r : m.client_noise_rates) mean_noise += r;
        if (!m.client_noise_rates.empty()) {
            mean_noise /= static_cast<double>(m.client_noise_rates.size());
        }
        out << m.round << "," << cell(m.global_accuracy) << ","
            << cell(m.clean_accuracy) << "," << cell(mean_noise) << ","
            << joined(m.client_noise_rates) << ","
            << joined(m.weights.final_weight) << ",";
        if (m.relabel_reports.empty()) {
            out << kMissing << "," << kMissing << "," << kMissing << "\n";
        } else {
            long examined = 0;
            long changed = 0;
            long correct = 0;
            for (const RelabelReport& r : m.relabel_reports) {
                examined += r.examined;
                changed += r.changed;
                correct += r.changed_correctly;
            }
            out << examined << "," << changed << "," << correct << "\n";
        }
    }
    return out.str();
}

nlohmann::json summarize(const ParsedConfig& cfg,
                         const ExperimentResult& result) {
    const ExperimentConfig& e = cfg.experiment;
    nlohmann::json j;
    j["method"] = method_name(e.method);
    j["seed"] = e.rng_seed;
    j["noise_rate"] = e.data.noise_rate;
    j["dirichlet_concentration"] = e.data.dirichlet_concentration;
    j["rounds"] = static_cast<int>(result.rounds.size());
    j["final_accuracy"] = result.final_accuracy;
    j["best_accuracy"] = result.best_accuracy;

    if (result.has_stage1) {
        nlohmann::json clients = nlohmann::json::array();
        int correct = 0;
        int total = 0;
        const ClientPartition& part = result.stage1.partition;
        for (const ClientSpectralStats& s : result.stage1.stats) {
            bool in_clean = std::binary_search(part.clean.begin(),
                                               part.clean.end(), s.client_id);
            bool truth_noisy = result.clients[s.client_id].is_noisy_ground_truth;
            nlohmann::json c;
            c["client_id"] = s.client_id;
            if (s.valid) {
                c["mu"] = s.mu;
                c["energy"] = s.energy;
            } else {
                c["mu"] = nullptr;
                c["energy"] = nullptr;
            }
            c["assigned"] = in_clean ? "clean" : "noisy";
            c["ground_truth"] = truth_noisy ? "noisy" : "clean";
            clients.push_back(c);
            ++total;
            if (in_clean != truth_noisy) ++correct;
        }
        j["identification"] = {
            {"clients", clients},
            {"accuracy",
             total > 0 ? static_cast<double>(correct) / total : 0.0},
            {"excluded", part.excluded},
        };
    }

    long changed = 0;
    long correct = 0;
    for (const RoundMetrics& m : result.rounds) {
        for (const RelabelReport& r : m.relabel_reports) {
            changed += r.changed;
            correct += r.changed_correctly;
        }
    }
    double reduction = 0.0;
    int noisy_count = 0;
    for (std::size_t k = 0; k < result.clients.size(); ++k) {
        if (!result.clients[k].is_noisy_ground_truth) continue;
        reduction += result.initial_noise_rates[k] -
                     residual_noise_rate(result.clients[k]);
        ++noisy_count;
    }
    nlohmann::json precision = nullptr;
    if (changed > 0) precision = static_cast<double>(correct) / changed;
    j["relabel"] = {
        {"total_changed", changed},
        {"total_changed_correctly", correct},
        {"precision", precision},
        {"mean_noise_reduction",
         noisy_count > 0 ? reduction / noisy_count : 0.0},
    };
    return j;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace fedsir
