#pragma once

#include <map>
#include <vector>

#include "fedsir/spectral.hpp"

// Builds per-class reference directions from the clean clients' spectral
// signatures and relabels noisy clients' samples when the dominant-direction
// vote and the residual-energy vote agree.

namespace fedsir {

enum class RelabelWeighting {
    kLinear,  // weight by per-class sample count
    kSqrt,    // weight by its square root
};

enum class RelabelRule {
    kAgreement,     // relabel only when both votes agree
    kDominantOnly,  // relabel by the dominant-direction vote alone
    kResidualOnly,  // relabel by the residual-energy vote alone
};

struct ClassReference {
    int cls = 0;
    std::vector<double> dominant;               // unit principal direction
    std::vector<std::vector<double>> residual;  // orthonormal rows, <= L
};

struct RelabelOptions {
    int residual_rank = 12;  // the L in the 1/sqrt(L) score normalizer
    RelabelWeighting weighting = RelabelWeighting::kLinear;
    RelabelRule rule = RelabelRule::kAgreement;
    SpectralOptions spectral;
};

struct SampleScores {
    // Indexed by class; uncovered classes hold -1 (dominant) and +inf
    // (residual) so they can never win either vote.
    std::vector<double> dominant;
    std::vector<double> residual;
};

struct RelabelReport {
    int client_id = 0;
    int examined = 0;
    int changed = 0;
    int changed_correctly = 0;  // new label matches the held-back true label
    double noise_rate_before = 0.0;
    double noise_rate_after = 0.0;
};

// Weighted consensus across clean signatures: per class, the principal
// eigenvector of the weighted mean dominant-direction projector, and the top
// eigenvectors of the weighted mean residual projector. class_counts[k] is
// client k's per-class sample count vector, aligned with clean_sigs. Classes
// no clean client observed are absent from the result.
std::map<int, ClassReference> aggregate_references(
    const std::vector<SpectralSignature>& clean_sigs,
    const std::vector<std::vector<int>>& class_counts, int num_classes,
    const RelabelOptions& opts = {});

// Dominant score |z.v| per covered class; residual score is the L2 alignment
// with the residual basis scaled by 1/sqrt(residual_rank), so rank-deficient
// references stay comparable across classes.
SampleScores score_sample(const std::vector<double>& features,
                          const std::map<int, ClassReference>& refs,
                          int num_classes, int residual_rank);

// Rewrites observed labels in place per the configured rule; inputs and true
// labels are never touched. Ties in either vote resolve to the lowest class
// index. Empty references are a warned no-op.
RelabelReport relabel_client(ClientDataset& dataset, const ModelShape& shape,
                             const ModelParams& params,
                             const std::map<int, ClassReference>& refs,
                             const RelabelOptions& opts = {});

// relabel_client with an explicit vote rule; used by the strategy ablations.
RelabelReport relabel_variant(ClientDataset& dataset, const ModelShape& shape,
                              const ModelParams& params,
                              const std::map<int, ClassReference>& refs,
                              RelabelRule rule, RelabelOptions opts = {});

}  // namespace fedsir
