#pragma once

#include <vector>

#include "fedsir/model.hpp"

// Server-side aggregation: sample-weighted FedAvg over arbitrary client
// subsets, and distance-aware aggregation that discounts clients by their
// parameter-space distance to the nearest clean client.

namespace fedsir {

struct AggregationWeights {
    std::vector<double> sample_weight;  // a_k, sums to 1
    std::vector<double> distance;       // d_k, 0 for clean clients
    std::vector<double> final_weight;   // alpha_k, sums to 1
};

struct DaAggOptions {
    // Divide distances by the median clean-pair distance before weighting.
    // Off by default; the raw formula is exact even when exp(-d) underflows.
    bool rescale_distances = false;
};

// Elementwise sample-count-weighted mean of the parameter vectors.
ModelParams fedavg(const std::vector<ModelParams>& params_list,
                   const std::vector<int>& sample_counts);

// d_k = 0 when k is in clean_set, else the minimum L2 distance from client
// k's parameters to any clean client's. clean_set holds indices into
// params_list and must be nonempty.
std::vector<double> daagg_distances(const std::vector<ModelParams>& params_list,
                                    const std::vector<int>& clean_set);

// alpha_k proportional to a_k * exp(-d_k); returns the weighted global model
// and the weights for logging. Warns when max d exceeds 30, where exp(-d)
// starts vanishing against double precision.
std::pair<ModelParams, AggregationWeights> daagg(
    const std::vector<ModelParams>& params_list,
    const std::vector<int>& sample_counts, const std::vector<int>& clean_set,
    const DaAggOptions& opts = {});

}  // namespace fedsir
