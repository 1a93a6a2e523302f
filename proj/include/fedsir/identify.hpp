#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fedsir/spectral.hpp"

// Splits clients into a clean and a noisy set by fitting a two-component
// Gaussian mixture to the (mu, energy) statistics and taking the component
// with the smaller mean similarity as clean.

namespace fedsir {

struct GmmComponent {
    double weight = 0.5;
    std::array<double, 2> mean{0.0, 0.0};
    // Row-major 2x2 covariance; kept symmetric positive definite by the
    // prior scatter folded into every update.
    std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};
};

struct GmmModel {
    std::array<GmmComponent, 2> components;
    // Final value of the fit objective: data log likelihood plus the
    // component-prior penalty, up to an additive constant.
    double log_likelihood = 0.0;
    int iterations = 0;

    // Posterior responsibility of each component for point (x, y).
    std::array<double, 2> responsibilities(double x, double y) const;
};

struct IdentifyOptions {
    // Clients with fewer than two observed classes have no off-diagonal
    // statistics; by default they get the noisy treatment.
    bool excluded_as_clean = false;
};

struct ClientPartition {
    std::vector<int> clean;     // ascending client ids
    std::vector<int> noisy;     // ascending client ids
    std::vector<int> excluded;  // ascending; also present in clean or noisy
    GmmModel model;
};

// The (mu, energy) pairs of the valid stats, in input order; this is the
// point set the mixture is fit on.
std::vector<std::array<double, 2>> stats_points(
    const std::vector<ClientSpectralStats>& stats);

// EM fit on 2-D points, regularized by a weak normal-inverse-Wishart prior
// per component so covariances stay bounded away from zero. Requires at
// least two points; degenerate inputs (all points identical) leave both
// components at the shared location. ll_trace, when given, receives the
// per-iteration objective values, which are nondecreasing within a run.
GmmModel fit_gmm_2(const std::vector<std::array<double, 2>>& points,
                   std::uint64_t seed, std::vector<double>* ll_trace = nullptr);

// Hard-assigns every valid client by posterior responsibility under the
// given model; the component with the smaller mean mu is clean. Throws if
// no client lands in the clean set.
ClientPartition partition_clients(const std::vector<ClientSpectralStats>& stats,
                                  const GmmModel& gmm,
                                  const IdentifyOptions& opts = {});

}  // namespace fedsir
