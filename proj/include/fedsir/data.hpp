#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Synthetic multi-class data, Dirichlet partitioning across clients, and
// symmetric label-noise injection with retained ground truth.

namespace fedsir {

struct Sample {
    std::vector<double> input;
    int observed_label = 0;
    int true_label = 0;  // evaluation only; training/relabeling never read it
};

struct ClientDataset {
    int client_id = 0;
    std::vector<Sample> samples;
    bool is_noisy_ground_truth = false;  // evaluation only

    std::size_t size() const { return samples.size(); }
    // n_{k,c} over observed labels.
    std::vector<int> class_counts(int num_classes) const;
};

struct DataGenConfig {
    int num_clients = 10;
    int num_classes = 10;
    int samples_total = 5000;
    int input_dim = 32;
    double dirichlet_concentration = 0.5;
    double noise_rate = 0.6;
    int clean_client_count = 3;
    double class_separation = 6.0;
    std::uint64_t rng_seed = 1;
    // Optional per-client noise rates (applied to noisy clients only);
    // empty means every noisy client uses noise_rate.
    std::vector<double> per_client_noise;

    void validate() const;  // throws std::invalid_argument on violation
};

// N samples from C isotropic unit-variance Gaussian clusters whose means are
// mutually separated by at least class_separation. Labels start clean.
std::vector<Sample> generate_synthetic(const DataGenConfig& cfg);

// Extra draw from the same clusters (same means under the same seed), for
// held-out evaluation data.
std::vector<Sample> generate_heldout(const DataGenConfig& cfg, int count);

// Assign every sample to exactly one client; per-class client shares are
// Dirichlet(alpha). Clients left empty are repaired with one sample moved
// from the largest client.
std::vector<ClientDataset> partition_dirichlet(const std::vector<Sample>& samples,
                                               const DataGenConfig& cfg);

// Flip each sample on a noisy client with probability rho to a uniform draw
// over the other C-1 classes. Clean clients are chosen by seeded draw.
std::vector<ClientDataset> inject_symmetric_noise(std::vector<ClientDataset> clients,
                                                  const DataGenConfig& cfg);

// Fraction of samples whose observed label differs from the true label.
double residual_noise_rate(const ClientDataset& client);

// Feature-file ingestion: text table, header "num_samples d_in C", then one
// row per sample "f_1 ... f_d true_label". Substitutes for generate_synthetic.
std::vector<Sample> load_feature_file(const std::string& path, int& num_classes,
                                      int& input_dim);

void save_feature_file(const std::string& path, const std::vector<Sample>& samples,
                       int num_classes);

}  // namespace fedsir
