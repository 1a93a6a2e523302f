#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedsir/aggregate.hpp"
#include "fedsir/data.hpp"
#include "fedsir/identify.hpp"
#include "fedsir/model.hpp"
#include "fedsir/relabel.hpp"
#include "fedsir/spectral.hpp"

// Runs the full federated loop: an identification stage that splits clients
// into clean and noisy sets, then T rounds of local training with periodic
// spectral relabeling, logit-adjusted losses, distillation for noisy clients,
// and distance-aware server aggregation. Also provides the plain-FedAvg and
// prune-noisy-clients baselines.

namespace fedsir {

enum class Method { kFedSir, kFedAvg, kPruning };

struct AblationFlags {
    bool relabel = true;
    bool la = true;      // off forces the logit-adjustment strength to 0
    bool kd = true;      // off forces the distillation weight to 0
    bool daagg = true;   // off aggregates all clients by plain FedAvg
};

struct ExperimentConfig {
    DataGenConfig data;
    int hidden_dim = 64;
    int feature_dim = 16;
    LocalTrainConfig stage1{.epochs = 5,
                            .learning_rate = 5e-5,
                            .weight_decay = 2e-2};
    LocalTrainConfig stage2{.epochs = 1,
                            .learning_rate = 3e-4,
                            .weight_decay = 5e-4};
    int rounds = 100;         // T
    int relabel_period = 20;  // R; relabeling fires when t % R == 0
    int residual_rank = 12;   // L
    LAConfig la;
    KDConfig kd;
    Method method = Method::kFedSir;
    AblationFlags ablation;
    bool excluded_as_clean = false;
    bool normalize_features = false;
    RelabelWeighting relabel_weighting = RelabelWeighting::kLinear;
    bool rescale_distances = false;
    double heldout_fraction = 0.1;
    std::uint64_t rng_seed = 1;

    ModelShape shape() const;
    void validate() const;
};

struct ExperimentEnv {
    std::vector<ClientDataset> clients;
    std::vector<Sample> heldout;
};

struct Stage1Result {
    ClientPartition partition;
    ModelParams global;  // FedAvg of the identified clean clients
    std::vector<ClientSpectralStats> stats;
    std::vector<ClassSimilarityMatrix> similarities;  // aligned with stats
};

struct RoundMetrics {
    int round = 0;
    double global_accuracy = 0.0;
    // NaN when the method maintains no clean reference model.
    double clean_accuracy = 0.0;
    std::vector<double> client_noise_rates;
    AggregationWeights weights;
    std::vector<RelabelReport> relabel_reports;  // only on relabel rounds
};

struct ExperimentResult {
    bool has_stage1 = false;
    Stage1Result stage1;
    std::vector<RoundMetrics> rounds;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
    ModelParams final_global;
    std::vector<double> initial_noise_rates;  // before any relabeling
    std::vector<ClientDataset> clients;       // final label state
};

// Called after every round with the metrics just recorded, the new global
// model, and the clean reference model (empty when the method keeps none).
using RoundObserver = std::function<void(
    const RoundMetrics&, const ModelParams& global, const ModelParams& clean)>;

// Synthetic data, Dirichlet partition, label noise, held-out clean split.
ExperimentEnv prepare_environment(const ExperimentConfig& cfg);

// Pre-featurized samples instead of synthetic generation: a seeded shuffle
// holds out heldout_fraction of the rows, the rest are partitioned and
// noised as usual.
ExperimentEnv environment_from_samples(const ExperimentConfig& cfg,
                                       std::vector<Sample> samples);

// Every client trains from a shared random init with plain cross-entropy,
// dominant spectral directions are extracted, and the mixture fit splits the
// cohort. The returned global model averages only the identified clean set.
Stage1Result run_stage1(const ExperimentConfig& cfg,
                        const std::vector<ClientDataset>& clients);

ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, ExperimentEnv env,
                                const RoundObserver& observer = {});

std::string method_name(Method m);

}  // namespace fedsir
