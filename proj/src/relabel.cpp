#include "fedsir/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "fedsir/kernels.hpp"

namespace fedsir {

namespace {

// Eigenvalues at or below this fraction of the largest count as zero when
// deciding how many residual directions a reference actually has.
constexpr double kEigTol = 1e-12;

// Eigenvectors are sign-ambiguous; pointing the largest-magnitude component
// positive makes aggregation reproducible bit-for-bit.
void canonicalize_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (!v.empty() && v[arg] < 0.0) kern::scal(-1.0, v);
}

double client_weight(int count, RelabelWeighting weighting) {
    double n = static_cast<double>(count);
    return weighting == RelabelWeighting::kSqrt ? std::sqrt(n) : n;
}

// W += alpha * v v^T for a symmetric accumulator stored as a full matrix.
void add_outer(linalg::Matrix& w, double alpha, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        kern::axpy(alpha * v[i], v, w.row(i));
    }
}

}  // namespace

std::map<int, ClassReference> aggregate_references(
    const std::vector<SpectralSignature>& clean_sigs,
    const std::vector<std::vector<int>>& class_counts, int num_classes,
    const RelabelOptions& opts) {
    if (clean_sigs.empty()) {
        throw std::invalid_argument("reference aggregation needs >= 1 client");
    }
    if (class_counts.size() != clean_sigs.size()) {
        throw std::invalid_argument("class_counts must align with clean_sigs");
    }

    std::map<int, ClassReference> refs;
    for (int c = 0; c < num_classes; ++c) {
        double total_weight = 0.0;
        std::size_t dim = 0;
        for (std::size_t k = 0; k < clean_sigs.size(); ++k) {
            auto it = clean_sigs[k].per_class.find(c);
            if (it == clean_sigs[k].per_class.end()) continue;
            total_weight += client_weight(class_counts[k][c], opts.weighting);
            dim = it->second.dominant.size();
        }
        if (total_weight <= 0.0) continue;  // class uncovered by clean clients

        linalg::Matrix m_r(dim, dim);
        linalg::Matrix m_n(dim, dim);
        for (std::size_t k = 0; k < clean_sigs.size(); ++k) {
            auto it = clean_sigs[k].per_class.find(c);
            if (it == clean_sigs[k].per_class.end()) continue;
            double w = client_weight(class_counts[k][c], opts.weighting) /
                       total_weight;
            add_outer(m_r, w, it->second.dominant);
            for (const auto& dir : it->second.residual) add_outer(m_n, w, dir);
        }

        ClassReference ref;
        ref.cls = c;
        linalg::EigResult er = linalg::sym_eig(m_r);
        ref.dominant.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) ref.dominant[i] = er.vectors(i, 0);
        canonicalize_sign(ref.dominant);

        linalg::EigResult en = linalg::sym_eig(m_n);
        double head = en.values.empty() ? 0.0 : std::max(en.values[0], 0.0);
        for (std::size_t j = 0;
             j < en.values.size() &&
             j < static_cast<std::size_t>(opts.residual_rank);
             ++j) {
            if (en.values[j] <= kEigTol * std::max(head, 1.0)) break;
            std::vector<double> dir(dim);
            for (std::size_t i = 0; i < dim; ++i) dir[i] = en.vectors(i, j);
            canonicalize_sign(dir);
            ref.residual.push_back(std::move(dir));
        }
        refs.emplace(c, std::move(ref));
    }
    return refs;
}

SampleScores score_sample(const std::vector<double>& features,
                          const std::map<int, ClassReference>& refs,
                          int num_classes, int residual_rank) {
    if (residual_rank < 1) {
        throw std::invalid_argument("residual_rank must be positive");
    }
    SampleScores scores;
    scores.dominant.assign(num_classes, -1.0);
    scores.residual.assign(num_classes,
                           std::numeric_limits<double>::infinity());
    double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(residual_rank));
    for (const auto& [c, ref] : refs) {
        scores.dominant[c] = std::abs(kern::dot(features, ref.dominant));
        double energy = 0.0;
        for (const auto& dir : ref.residual) {
            double a = kern::dot(features, dir);
            energy += a * a;
        }
        scores.residual[c] = inv_sqrt_l * std::sqrt(energy);
    }
    return scores;
}

RelabelReport relabel_client(ClientDataset& dataset, const ModelShape& shape,
                             const ModelParams& params,
                             const std::map<int, ClassReference>& refs,
                             const RelabelOptions& opts) {
    RelabelReport report;
    report.client_id = dataset.client_id;
    report.examined = static_cast<int>(dataset.samples.size());
    report.noise_rate_before = residual_noise_rate(dataset);
    report.noise_rate_after = report.noise_rate_before;
    if (refs.empty()) {
        std::cerr << "warning: no class references available; client "
                  << dataset.client_id << " left unchanged\n";
        return report;
    }

    for (Sample& sample : dataset.samples) {
        ForwardOutput out = forward(shape, params, sample.input);
        SampleScores s = score_sample(out.features, refs, shape.num_classes,
                                      opts.residual_rank);

        // First strict improvement wins, so ties land on the lowest index.
        int vote_r = -1;
        int vote_n = -1;
        double best_r = -std::numeric_limits<double>::infinity();
        double best_n = std::numeric_limits<double>::infinity();
        for (const auto& [c, ref] : refs) {
            if (s.dominant[c] > best_r) { best_r = s.dominant[c]; vote_r = c; }
            if (s.residual[c] < best_n) { best_n = s.residual[c]; vote_n = c; }
        }

        int new_label = -1;
        switch (opts.rule) {
            case RelabelRule::kAgreement:
                if (vote_r == vote_n) new_label = vote_r;
                break;
            case RelabelRule::kDominantOnly: new_label = vote_r; break;
            case RelabelRule::kResidualOnly: new_label = vote_n; break;
        }
        if (new_label >= 0 && new_label != sample.observed_label) {
            sample.observed_label = new_label;
            ++report.changed;
            if (new_label == sample.true_label) ++report.changed_correctly;
        }
    }
    report.noise_rate_after = residual_noise_rate(dataset);
    return report;
}

RelabelReport relabel_variant(ClientDataset& dataset, const ModelShape& shape,
                              const ModelParams& params,
                              const std::map<int, ClassReference>& refs,
                              RelabelRule rule, RelabelOptions opts) {
    opts.rule = rule;
    return relabel_client(dataset, shape, params, refs, opts);
}

}  // namespace fedsir
