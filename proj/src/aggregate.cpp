#include "fedsir/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "fedsir/kernels.hpp"

namespace fedsir {

namespace {

void check_shapes(const std::vector<ModelParams>& params_list) {
    if (params_list.empty()) {
        throw std::invalid_argument("aggregation needs at least one client");
    }
    for (const auto& p : params_list) {
        if (p.size() != params_list.front().size()) {
            throw std::invalid_argument(
                "client parameter vectors differ in length");
        }
    }
}

}  // namespace

ModelParams fedavg(const std::vector<ModelParams>& params_list,
                   const std::vector<int>& sample_counts) {
    check_shapes(params_list);
    if (sample_counts.size() != params_list.size()) {
        throw std::invalid_argument("sample_counts must align with params_list");
    }
    double total = 0.0;
    for (int n : sample_counts) {
        if (n < 0) throw std::invalid_argument("negative sample count");
        total += static_cast<double>(n);
    }
    if (total <= 0.0) throw std::invalid_argument("no samples to weight by");

    ModelParams out(params_list.front().size(), 0.0);
    for (std::size_t k = 0; k < params_list.size(); ++k) {
        kern::axpy(static_cast<double>(sample_counts[k]) / total,
                   params_list[k], out);
    }
    return out;
}

std::vector<double> daagg_distances(const std::vector<ModelParams>& params_list,
                                    const std::vector<int>& clean_set) {
    check_shapes(params_list);
    if (clean_set.empty()) throw std::invalid_argument("empty clean set");
    std::vector<bool> is_clean(params_list.size(), false);
    for (int j : clean_set) {
        if (j < 0 || static_cast<std::size_t>(j) >= params_list.size()) {
            throw std::invalid_argument("clean index out of range");
        }
        is_clean[j] = true;
    }

    std::vector<double> d(params_list.size(), 0.0);
    for (std::size_t k = 0; k < params_list.size(); ++k) {
        if (is_clean[k]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int j : clean_set) {
            best = std::min(best, kern::sq_dist(params_list[k],
                                                params_list[j]));
        }
        d[k] = std::sqrt(best);
    }
    return d;
}

std::pair<ModelParams, AggregationWeights> daagg(
    const std::vector<ModelParams>& params_list,
    const std::vector<int>& sample_counts, const std::vector<int>& clean_set,
    const DaAggOptions& opts) {
    check_shapes(params_list);
    if (sample_counts.size() != params_list.size()) {
        throw std::invalid_argument("sample_counts must align with params_list");
    }

    AggregationWeights w;
    w.distance = daagg_distances(params_list, clean_set);

    if (opts.rescale_distances && clean_set.size() >= 2) {
        // Median pairwise distance among clean clients sets the scale.
        std::vector<double> pair_d;
        for (std::size_t a = 0; a < clean_set.size(); ++a) {
            for (std::size_t b = a + 1; b < clean_set.size(); ++b) {
                pair_d.push_back(std::sqrt(
                    kern::sq_dist(params_list[clean_set[a]],
                                  params_list[clean_set[b]])));
            }
        }
        std::nth_element(pair_d.begin(), pair_d.begin() + pair_d.size() / 2,
                         pair_d.end());
        double med = pair_d[pair_d.size() / 2];
        if (med > 0.0) {
            for (double& d : w.distance) d /= med;
        }
    }

    double max_d = *std::max_element(w.distance.begin(), w.distance.end());
    if (max_d > 30.0) {
        std::cerr << "warning: max client distance " << max_d
                  << " drives exp(-d) toward underflow\n";
    }

    double total = 0.0;
    for (int n : sample_counts) {
        if (n < 0) throw std::invalid_argument("negative sample count");
        total += static_cast<double>(n);
    }
    if (total <= 0.0) throw std::invalid_argument("no samples to weight by");

    w.sample_weight.resize(params_list.size());
    w.final_weight.resize(params_list.size());
    double norm = 0.0;
    for (std::size_t k = 0; k < params_list.size(); ++k) {
        w.sample_weight[k] = static_cast<double>(sample_counts[k]) / total;
        w.final_weight[k] = w.sample_weight[k] * std::exp(-w.distance[k]);
        norm += w.final_weight[k];
    }
    if (norm <= 0.0) {
        throw std::runtime_error("all aggregation weights underflowed to zero");
    }
    kern::scal(1.0 / norm, w.final_weight);

    ModelParams out(params_list.front().size(), 0.0);
    for (std::size_t k = 0; k < params_list.size(); ++k) {
        kern::axpy(w.final_weight[k], params_list[k], out);
    }
    return {std::move(out), std::move(w)};
}

}  // namespace fedsir
