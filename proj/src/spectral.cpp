#include "fedsir/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedsir/kernels.hpp"

namespace fedsir {

namespace {

// Singular values at or below this fraction of the largest are treated as
// numerically zero when deciding how many residual directions exist.
constexpr double kRankTol = 1e-10;

}  // namespace

bool ClassSimilarityMatrix::is_observed(int c) const {
    return std::binary_search(observed.begin(), observed.end(), c);
}

linalg::Matrix class_feature_matrix(const ModelShape& shape,
                                    const ModelParams& params,
                                    const ClientDataset& dataset, int cls,
                                    const SpectralOptions& opts) {
    std::vector<const Sample*> members;
    for (const Sample& s : dataset.samples) {
        if (s.observed_label == cls) members.push_back(&s);
    }
    if (members.empty()) {
        throw std::invalid_argument("class " + std::to_string(cls) +
                                    " has no samples on this client");
    }
    linalg::Matrix z(members.size(), static_cast<std::size_t>(shape.feature_dim));
    for (std::size_t i = 0; i < members.size(); ++i) {
        ForwardOutput out = forward(shape, params, members[i]->input);
        auto row = z.row(i);
        std::copy(out.features.begin(), out.features.end(), row.begin());
        if (opts.normalize_features) {
            double norm = std::sqrt(kern::dot(row, row));
            if (norm > 0.0) kern::scal(1.0 / norm, row);
        }
    }
    return z;
}

SpectralSignature extract_spectral(const ClientDataset& dataset,
                                   const ModelShape& shape,
                                   const ModelParams& params, int residual_rank,
                                   const SpectralOptions& opts) {
    if (residual_rank < 0) {
        throw std::invalid_argument("residual_rank must be non-negative");
    }
    SpectralSignature sig;
    sig.client_id = dataset.client_id;
    std::vector<int> counts = dataset.class_counts(shape.num_classes);
    for (int c = 0; c < shape.num_classes; ++c) {
        if (counts[c] == 0) continue;
        linalg::Matrix z = class_feature_matrix(shape, params, dataset, c, opts);
        linalg::SvdResult svd = linalg::svd(z);

        ClassSpectrum spec;
        spec.dominant.resize(z.cols());
        for (std::size_t j = 0; j < z.cols(); ++j) spec.dominant[j] = svd.v(j, 0);

        // Residual directions only exist where the singular value is
        // numerically nonzero; rank-1 data yields an empty residual basis.
        double head = svd.singular_values.empty() ? 0.0 : svd.singular_values[0];
        std::size_t avail = 0;
        for (std::size_t j = 1; j < svd.singular_values.size(); ++j) {
            if (svd.singular_values[j] > kRankTol * head) ++avail;
        }
        std::size_t take = std::min<std::size_t>(avail, residual_rank);
        for (std::size_t j = 1; j <= take; ++j) {
            std::vector<double> dir(z.cols());
            for (std::size_t i = 0; i < z.cols(); ++i) dir[i] = svd.v(i, j);
            spec.residual.push_back(std::move(dir));
        }
        sig.per_class.emplace(c, std::move(spec));
    }
    return sig;
}

ClassSimilarityMatrix class_similarity(const SpectralSignature& sig,
                                       int num_classes) {
    ClassSimilarityMatrix sim;
    sim.num_classes = num_classes;
    sim.values = linalg::Matrix(static_cast<std::size_t>(num_classes),
                                static_cast<std::size_t>(num_classes));
    for (const auto& [c, spec] : sig.per_class) {
        if (c < 0 || c >= num_classes) {
            throw std::invalid_argument("signature class index out of range");
        }
        sim.observed.push_back(c);
    }
    for (int c : sim.observed) {
        const auto& vc = sig.per_class.at(c).dominant;
        for (int d : sim.observed) {
            const auto& vd = sig.per_class.at(d).dominant;
            double s = std::abs(kern::dot(vc, vd));
            sim.values(static_cast<std::size_t>(c), static_cast<std::size_t>(d)) = s;
        }
        sim.values(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = 1.0;
    }
    return sim;
}

ClientSpectralStats offdiag_stats(const ClassSimilarityMatrix& sim,
                                  int client_id) {
    ClientSpectralStats stats;
    stats.client_id = client_id;
    std::size_t m = sim.observed.size();
    if (m < 2) return stats;  // valid stays false

    double sum = 0.0;
    double sum_sq = 0.0;
    for (int c : sim.observed) {
        for (int d : sim.observed) {
            if (c == d) continue;
            double s = sim.values(static_cast<std::size_t>(c),
                                  static_cast<std::size_t>(d));
            sum += s;
            sum_sq += s * s;
        }
    }
    double pairs = static_cast<double>(m) * static_cast<double>(m - 1);
    stats.mu = sum / pairs;
    stats.energy = sum_sq / pairs;
    stats.valid = true;
    return stats;
}

}  // namespace fedsir
