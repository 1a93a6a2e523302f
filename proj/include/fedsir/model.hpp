#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedsir/data.hpp"

// A small trainable classifier: two-layer tanh feature extractor
// (input -> hidden -> feature) followed by a linear head (feature -> classes).
// Parameters live in one flat vector laid out [W1 b1 W2 b2 W3 b3]; gradients
// are exact and computed by hand.

namespace fedsir {

using ModelParams = std::vector<double>;

struct ModelShape {
    int input_dim = 32;
    int hidden_dim = 64;
    int feature_dim = 16;
    int num_classes = 10;

    std::size_t param_count() const;
    // Offsets into the flat parameter vector.
    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const;
    std::size_t w2_off() const;
    std::size_t b2_off() const;
    std::size_t w3_off() const;
    std::size_t b3_off() const;
};

struct ForwardOutput {
    std::vector<double> features;  // pre-head activations, post-nonlinearity
    std::vector<double> logits;
};

enum class Optimizer { kAdam, kSgd };

struct LocalTrainConfig {
    int epochs = 1;
    double learning_rate = 3e-4;
    double weight_decay = 5e-4;
    int batch_size = 64;
    Optimizer optimizer = Optimizer::kAdam;
    std::uint64_t rng_seed = 1;
};

struct LAConfig {
    double beta = 1.0;
    double epsilon = 1e-8;
};

struct KDConfig {
    double temperature = 2.0;
    double kd_weight = 0.5;
    // Multiply the KD term by temperature^2 (classic distillation scaling).
    bool scale_by_temp_sq = false;
};

enum class LossKind { kCrossEntropy, kLogitAdjusted, kLogitAdjustedKD };

// Extra inputs a loss kind needs during local training.
struct TrainAux {
    const std::vector<double>* margins = nullptr;      // LA, LA-KD
    const ModelParams* teacher_params = nullptr;       // LA-KD
    KDConfig kd;                                       // LA-KD
};

struct LossValue {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

ForwardOutput forward(const ModelShape& shape, const ModelParams& params,
                      std::span<const double> input);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

// pi_{k,c} = n_{k,c} / N_k over observed labels.
std::vector<double> class_priors(const ClientDataset& dataset, int num_classes);

// m_{k,c} = beta * ln(pi_{k,c} + epsilon).
std::vector<double> logit_adjustment(const std::vector<double>& priors,
                                     const LAConfig& la);

LossValue loss_ce(std::span<const double> logits, int label);

LossValue loss_la(std::span<const double> logits,
                  std::span<const double> margins, int label);

// Hybrid loss: kd_weight * KL(teacher_soft || student) + (1-kd_weight) * CE
// on the hard label, where the student distribution is softmax of the
// margin-adjusted logits at temperature 1 and the teacher is softened by tau.
LossValue loss_la_kd(std::span<const double> student_logits,
                     std::span<const double> margins,
                     std::span<const double> teacher_logits, int label,
                     const KDConfig& kd);

// Mean loss and full parameter gradient over the given sample indices.
struct BatchGradient {
    double mean_loss = 0.0;
    std::vector<double> grad;  // param_count entries
};

BatchGradient batch_gradient(const ModelShape& shape, const ModelParams& params,
                             const ClientDataset& dataset,
                             std::span<const int> indices, LossKind kind,
                             const TrainAux& aux);

// E epochs of seeded mini-batch optimization; returns the new parameters.
ModelParams local_train(const ModelShape& shape, ModelParams params,
                        const ClientDataset& dataset,
                        const LocalTrainConfig& cfg, LossKind kind,
                        const TrainAux& aux);

double mean_loss(const ModelShape& shape, const ModelParams& params,
                 const ClientDataset& dataset, LossKind kind,
                 const TrainAux& aux);

// Fraction of samples whose argmax logit equals true_label.
double evaluate_accuracy(const ModelShape& shape, const ModelParams& params,
                         const std::vector<Sample>& samples);

}  // namespace fedsir
