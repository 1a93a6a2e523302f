#pragma once

#include <map>
#include <optional>
#include <vector>

#include "fedsir/data.hpp"
#include "fedsir/linalg.hpp"
#include "fedsir/model.hpp"

// Per-client class-wise spectral structure: the dominant direction of each
// observed class's feature matrix plus a residual basis, and the off-diagonal
// similarity statistics that summarize cross-class mixing.

namespace fedsir {

struct ClassSpectrum {
    std::vector<double> dominant;          // unit vector, length feature_dim
    std::vector<std::vector<double>> residual;  // orthonormal rows, <= L of them
};

struct SpectralSignature {
    int client_id = 0;
    std::map<int, ClassSpectrum> per_class;  // keyed by observed class
};

struct ClientSpectralStats {
    int client_id = 0;
    double mu = 0.0;      // mean off-diagonal similarity
    double energy = 0.0;  // mean squared off-diagonal similarity
    bool valid = false;   // false when fewer than two classes are observed
};

struct ClassSimilarityMatrix {
    int num_classes = 0;
    std::vector<int> observed;     // observed class indices, ascending
    linalg::Matrix values;         // C x C; only observed pairs are defined

    bool is_observed(int c) const;
};

struct SpectralOptions {
    bool normalize_features = false;  // L2-normalize rows before the SVD
};

// Rows are the features of the samples observed as class c, in dataset order.
linalg::Matrix class_feature_matrix(const ModelShape& shape,
                                    const ModelParams& params,
                                    const ClientDataset& dataset, int cls,
                                    const SpectralOptions& opts = {});

// Per observed class: dominant right singular vector plus the next
// min(L, rank-1) right singular vectors. L = 0 extracts dominants only.
SpectralSignature extract_spectral(const ClientDataset& dataset,
                                   const ModelShape& shape,
                                   const ModelParams& params, int residual_rank,
                                   const SpectralOptions& opts = {});

// [S]_{c,c'} = |v_c . v_c'| over observed class pairs; diagonal is 1.
ClassSimilarityMatrix class_similarity(const SpectralSignature& sig,
                                       int num_classes);

// Mean and mean-square of the off-diagonal entries over observed pairs.
ClientSpectralStats offdiag_stats(const ClassSimilarityMatrix& sim,
                                  int client_id = 0);

}  // namespace fedsir
