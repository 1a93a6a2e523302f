#include "fedsir/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fedsir/kernels.hpp"
#include "fedsir/rng.hpp"

namespace fedsir {

std::vector<int> ClientDataset::class_counts(int num_classes) const {
    std::vector<int> counts(num_classes, 0);
    for (const Sample& s : samples) counts[s.observed_label]++;
    return counts;
}

void DataGenConfig::validate() const {
    if (num_clients < 1) throw std::invalid_argument("num_clients must be >= 1");
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    if (samples_total < num_classes)
        throw std::invalid_argument("samples_total must be >= num_classes");
    if (dirichlet_concentration <= 0.0)
        throw std::invalid_argument("dirichlet_concentration must be > 0");
    if (noise_rate < 0.0 || noise_rate > 1.0)
        throw std::invalid_argument("noise_rate must be in [0, 1]");
    if (clean_client_count < 0 || clean_client_count > num_clients)
        throw std::invalid_argument("clean_client_count must be in [0, num_clients]");
    if (class_separation < 0.0)
        throw std::invalid_argument("class_separation must be >= 0");
    if (!per_client_noise.empty()) {
        if (static_cast<int>(per_client_noise.size()) != num_clients)
            throw std::invalid_argument("per_client_noise must list one rate per client");
        for (double r : per_client_noise)
            if (r < 0.0 || r > 1.0)
                throw std::invalid_argument("per_client_noise entries must be in [0, 1]");
    }
}

namespace {

// Cluster means are a function of (seed, C, d_in, separation) only, so the
// training and held-out draws see identical clusters.
std::vector<std::vector<double>> make_class_means(const DataGenConfig& cfg) {
    auto rng = make_rng(cfg.rng_seed, "class_means");
    std::normal_distribution<double> normal(0.0, 1.0);

    const double sep = cfg.class_separation;
    double scale = std::max(sep, 1.0);
    std::vector<std::vector<double>> means;
    int attempts = 0;
    while (static_cast<int>(means.size()) < cfg.num_classes) {
        std::vector<double> m(cfg.input_dim);
        for (double& x : m) x = scale * normal(rng);
        bool ok = true;
        for (const auto& other : means) {
            if (std::sqrt(kern::sq_dist(m, other)) < sep) {
                ok = false;
                break;
            }
        }
        if (ok) {
            means.push_back(std::move(m));
            attempts = 0;
        } else if (++attempts > 10000) {
            scale *= 2.0;  // spread further out; guarantees termination
            attempts = 0;
        }
    }
    return means;
}

std::vector<Sample> draw_from_clusters(const std::vector<std::vector<double>>& means,
                                       int count, int input_dim,
                                       std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int num_classes = static_cast<int>(means.size());
    std::vector<Sample> out(count);
    for (int i = 0; i < count; ++i) {
        const int c = i % num_classes;  // balanced class assignment
        Sample& s = out[i];
        s.input.resize(input_dim);
        for (int j = 0; j < input_dim; ++j) s.input[j] = means[c][j] + normal(rng);
        s.observed_label = c;
        s.true_label = c;
    }
    return out;
}

}  // namespace

std::vector<Sample> generate_synthetic(const DataGenConfig& cfg) {
    cfg.validate();
    const auto means = make_class_means(cfg);
    auto rng = make_rng(cfg.rng_seed, "train_samples");
    return draw_from_clusters(means, cfg.samples_total, cfg.input_dim, rng);
}

std::vector<Sample> generate_heldout(const DataGenConfig& cfg, int count) {
    cfg.validate();
    if (count < 1) throw std::invalid_argument("heldout count must be >= 1");
    const auto means = make_class_means(cfg);
    auto rng = make_rng(cfg.rng_seed, "heldout_samples");
    return draw_from_clusters(means, count, cfg.input_dim, rng);
}

std::vector<ClientDataset> partition_dirichlet(const std::vector<Sample>& samples,
                                               const DataGenConfig& cfg) {
    const int k = cfg.num_clients;
    if (k < 1) throw std::invalid_argument("num_clients must be >= 1");

    std::vector<ClientDataset> clients(k);
    for (int i = 0; i < k; ++i) clients[i].client_id = i;

    auto rng = make_rng(cfg.rng_seed, "partition");
    std::gamma_distribution<double> gamma(cfg.dirichlet_concentration, 1.0);

    // Per-class client shares ~ Dirichlet(alpha, ..., alpha).
    std::vector<std::vector<double>> shares(cfg.num_classes, std::vector<double>(k));
    for (int c = 0; c < cfg.num_classes; ++c) {
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            shares[c][j] = gamma(rng);
            total += shares[c][j];
        }
        if (total <= 0.0) {
            // All gamma draws underflowed (tiny alpha); fall back to uniform.
            std::fill(shares[c].begin(), shares[c].end(), 1.0 / k);
        } else {
            for (int j = 0; j < k; ++j) shares[c][j] /= total;
        }
    }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const Sample& s : samples) {
        const auto& p = shares[s.observed_label];
        double u = unif(rng);
        int chosen = k - 1;
        double acc = 0.0;
        for (int j = 0; j < k; ++j) {
            acc += p[j];
            if (u < acc) {
                chosen = j;
                break;
            }
        }
        clients[chosen].samples.push_back(s);
    }

    // Repair empty clients: move one sample from the current largest client.
    for (int i = 0; i < k; ++i) {
        while (clients[i].samples.empty()) {
            int largest = 0;
            for (int j = 1; j < k; ++j)
                if (clients[j].samples.size() > clients[largest].samples.size())
                    largest = j;
            if (clients[largest].samples.size() <= 1)
                throw std::runtime_error("not enough samples to populate every client");
            clients[i].samples.push_back(clients[largest].samples.back());
            clients[largest].samples.pop_back();
        }
    }
    return clients;
}

std::vector<ClientDataset> inject_symmetric_noise(std::vector<ClientDataset> clients,
                                                  const DataGenConfig& cfg) {
    const int k = static_cast<int>(clients.size());

    // Clean clients by seeded draw: partial Fisher-Yates over client ids.
    std::vector<int> ids(k);
    for (int i = 0; i < k; ++i) ids[i] = i;
    auto pick_rng = make_rng(cfg.rng_seed, "clean_designation");
    for (int i = 0; i < cfg.clean_client_count; ++i) {
        std::uniform_int_distribution<int> d(i, k - 1);
        std::swap(ids[i], ids[d(pick_rng)]);
    }
    std::vector<bool> clean(k, false);
    for (int i = 0; i < cfg.clean_client_count; ++i) clean[ids[i]] = true;

    for (ClientDataset& client : clients) {
        if (clean[client.client_id]) {
            client.is_noisy_ground_truth = false;
            continue;
        }
        client.is_noisy_ground_truth = true;
        const double rho = cfg.per_client_noise.empty()
                               ? cfg.noise_rate
                               : cfg.per_client_noise[client.client_id];
        // Per-client stream: one client's noise never perturbs another's.
        auto rng = make_rng(cfg.rng_seed, "noise", client.client_id);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::uniform_int_distribution<int> other(0, cfg.num_classes - 2);
        for (Sample& s : client.samples) {
            if (cfg.num_classes < 2) break;
            if (unif(rng) < rho) {
                int draw = other(rng);
                if (draw >= s.observed_label) draw++;  // skip the original class
                s.observed_label = draw;
            }
        }
    }
    return clients;
}

double residual_noise_rate(const ClientDataset& client) {
    if (client.samples.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const Sample& s : client.samples)
        if (s.observed_label != s.true_label) wrong++;
    return static_cast<double>(wrong) / static_cast<double>(client.samples.size());
}

std::vector<Sample> load_feature_file(const std::string& path, int& num_classes,
                                      int& input_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    int n = 0;
    if (!(in >> n >> input_dim >> num_classes) || n < 1 || input_dim < 1 ||
        num_classes < 1)
        throw std::runtime_error("feature file has a malformed header: " + path);

    std::vector<Sample> out(n);
    for (int i = 0; i < n; ++i) {
        Sample& s = out[i];
        s.input.resize(input_dim);
        for (int j = 0; j < input_dim; ++j) {
            if (!(in >> s.input[j]))
                throw std::runtime_error("feature file truncated at row " +
                                         std::to_string(i));
            if (!std::isfinite(s.input[j]))
                throw std::runtime_error("feature file has a non-finite value at row " +
                                         std::to_string(i));
        }
        int label = 0;
        if (!(in >> label) || label < 0 || label >= num_classes)
            throw std::runtime_error("feature file has a bad label at row " +
                                     std::to_string(i));
        s.true_label = label;
        s.observed_label = label;
    }
    return out;
}

void save_feature_file(const std::string& path, const std::vector<Sample>& samples,
                       int num_classes) {
    if (samples.empty()) throw std::invalid_argument("no samples to save");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    const int d = static_cast<int>(samples[0].input.size());
    out << samples.size() << " " << d << " " << num_classes << "\n";
    out.precision(17);
    for (const Sample& s : samples) {
        for (double x : s.input) out << x << " ";
        out << s.true_label << "\n";
    }
}

}  // namespace fedsir
