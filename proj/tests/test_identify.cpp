#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedsir/identify.hpp"
#include "fedsir/rng.hpp"

using namespace fedsir;

namespace {

ClientSpectralStats make_stats(int id, double mu, double energy,
                               bool valid = true) {
    ClientSpectralStats s;
    s.client_id = id;
    s.mu = mu;
    s.energy = energy;
    s.valid = valid;
    return s;
}

// Two well-separated blobs of equal size around the given centers.
std::vector<std::array<double, 2>> two_blobs(std::array<double, 2> a,
                                             std::array<double, 2> b,
                                             int per_blob, std::uint64_t seed) {
    std::mt19937_64 gen(splitmix64(seed));
    std::normal_distribution<double> normal(0.0, 0.01);
    std::vector<std::array<double, 2>> points;
    for (int i = 0; i < per_blob; ++i) {
        points.push_back({a[0] + normal(gen), a[1] + normal(gen)});
        points.push_back({b[0] + normal(gen), b[1] + normal(gen)});
    }
    return points;
}

}  // namespace

TEST_CASE("stats_points keeps valid pairs in input order") {
    std::vector<ClientSpectralStats> stats = {
        make_stats(0, 0.1, 0.02),
        make_stats(1, 0.0, 0.0, false),
        make_stats(2, 0.7, 0.5),
    };
    std::vector<std::array<double, 2>> points = stats_points(stats);
    REQUIRE(points.size() == 2);
    CHECK(points[0] == std::array<double, 2>{0.1, 0.02});
    CHECK(points[1] == std::array<double, 2>{0.7, 0.5});
}

TEST_CASE("well-separated blobs are recovered to centroid accuracy") {
    std::array<double, 2> lo = {0.15, 0.05};
    std::array<double, 2> hi = {0.75, 0.60};
    std::vector<std::array<double, 2>> points = two_blobs(lo, hi, 40, 5);
    GmmModel model = fit_gmm_2(points, 9);

    // Components may come out in either order.
    const GmmComponent* low = &model.components[0];
    const GmmComponent* high = &model.components[1];
    if (low->mean[0] > high->mean[0]) std::swap(low, high);
    CHECK(std::abs(low->mean[0] - lo[0]) < 0.02);
    CHECK(std::abs(low->mean[1] - lo[1]) < 0.02);
    CHECK(std::abs(high->mean[0] - hi[0]) < 0.02);
    CHECK(std::abs(high->mean[1] - hi[1]) < 0.02);
    CHECK(low->weight == doctest::Approx(0.5).epsilon(0.05));

    std::array<double, 2> r_lo = model.responsibilities(lo[0], lo[1]);
    std::array<double, 2> r_hi = model.responsibilities(hi[0], hi[1]);
    CHECK(r_lo[0] + r_lo[1] == doctest::Approx(1.0).epsilon(1e-9));
    int lo_idx = low == &model.components[0] ? 0 : 1;
    CHECK(r_lo[lo_idx] > 0.99);
    CHECK(r_hi[1 - lo_idx] > 0.99);
}

TEST_CASE("the EM log likelihood never decreases") {
    std::vector<std::array<double, 2>> points =
        two_blobs({0.2, 0.1}, {0.6, 0.4}, 25, 3);
    std::vector<double> trace;
    GmmModel model = fit_gmm_2(points, 4, &trace);
    REQUIRE(trace.size() >= 1);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] >= trace[i - 1] - 1e-9);
    }
    CHECK(model.log_likelihood == doctest::Approx(trace.back()));
    CHECK(model.iterations == static_cast<int>(trace.size()));
}

TEST_CASE("fitting is deterministic in the seed") {
    std::vector<std::array<double, 2>> points =
        two_blobs({0.2, 0.1}, {0.7, 0.5}, 20, 8);
    GmmModel a = fit_gmm_2(points, 21);
    GmmModel b = fit_gmm_2(points, 21);
    CHECK(a.log_likelihood == b.log_likelihood);
    for (int k = 0; k < 2; ++k) {
        CHECK(a.components[k].mean == b.components[k].mean);
        CHECK(a.components[k].cov == b.components[k].cov);
        CHECK(a.components[k].weight == b.components[k].weight);
    }
}

TEST_CASE("fewer than two points is an error") {
    CHECK_THROWS_AS(fit_gmm_2({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(fit_gmm_2({{0.5, 0.5}}, 1), std::invalid_argument);
}

TEST_CASE("identical points do not break the fit") {
    std::vector<std::array<double, 2>> points(8, {0.3, 0.2});
    GmmModel model = fit_gmm_2(points, 2);
    CHECK(std::isfinite(model.log_likelihood));
    for (const GmmComponent& comp : model.components) {
        CHECK(std::isfinite(comp.mean[0]));
        CHECK(std::isfinite(comp.mean[1]));
        CHECK(comp.cov[0] > 0.0);
        CHECK(comp.cov[3] > 0.0);
    }
    std::array<double, 2> r = model.responsibilities(0.3, 0.2);
    CHECK(r[0] + r[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("clients with low similarity statistics form the clean set") {
    std::vector<ClientSpectralStats> stats = {
        make_stats(0, 0.12, 0.02), make_stats(1, 0.74, 0.56),
        make_stats(2, 0.10, 0.015), make_stats(3, 0.80, 0.65),
        make_stats(4, 0.15, 0.03), make_stats(5, 0.71, 0.52),
        make_stats(6, 0.78, 0.62),
    };
    GmmModel model = fit_gmm_2(stats_points(stats), 6);
    ClientPartition part = partition_clients(stats, model);
    CHECK(part.clean == std::vector<int>{0, 2, 4});
    CHECK(part.noisy == std::vector<int>{1, 3, 5, 6});
    CHECK(part.excluded.empty());
}

TEST_CASE("the partition is stable across mixture seeds") {
    std::vector<ClientSpectralStats> stats = {
        make_stats(0, 0.12, 0.02), make_stats(1, 0.74, 0.56),
        make_stats(2, 0.10, 0.015), make_stats(3, 0.80, 0.65),
        make_stats(4, 0.15, 0.03), make_stats(5, 0.71, 0.52),
    };
    std::vector<std::array<double, 2>> points = stats_points(stats);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ClientPartition part =
            partition_clients(stats, fit_gmm_2(points, seed));
        CHECK(part.clean == std::vector<int>{0, 2, 4});
        CHECK(part.noisy == std::vector<int>{1, 3, 5});
    }
}

TEST_CASE("client order does not change the partition sets") {
    std::vector<ClientSpectralStats> stats = {
        make_stats(3, 0.80, 0.65), make_stats(0, 0.12, 0.02),
        make_stats(5, 0.71, 0.52), make_stats(2, 0.10, 0.015),
        make_stats(1, 0.74, 0.56), make_stats(4, 0.15, 0.03),
    };
    GmmModel model = fit_gmm_2(stats_points(stats), 6);
    ClientPartition part = partition_clients(stats, model);
    CHECK(part.clean == std::vector<int>{0, 2, 4});
    CHECK(part.noisy == std::vector<int>{1, 3, 5});
}

TEST_CASE("invalid clients are excluded and treated as noisy by default") {
    std::vector<ClientSpectralStats> stats = {
        make_stats(0, 0.12, 0.02), make_stats(1, 0.74, 0.56),
        make_stats(2, 0.0, 0.0, false), make_stats(3, 0.10, 0.015),
        make_stats(4, 0.78, 0.60),
    };
    GmmModel model = fit_gmm_2(stats_points(stats), 11);
    ClientPartition part = partition_clients(stats, model);
    CHECK(part.excluded == std::vector<int>{2});
    CHECK(part.clean == std::vector<int>{0, 3});
    CHECK(part.noisy == std::vector<int>{1, 2, 4});

    IdentifyOptions opts;
    opts.excluded_as_clean = true;
    ClientPartition part2 = partition_clients(stats, model, opts);
    CHECK(part2.clean == std::vector<int>{0, 2, 3});
    CHECK(part2.noisy == std::vector<int>{1, 4});
    CHECK(part2.excluded == std::vector<int>{2});
}

TEST_CASE("an empty clean set is reported as an error") {
    // A hand-built mixture whose low-mu component sits far from every client
    // pushes all responsibilities onto the high component.
    GmmModel model;
    model.components[0].mean = {-5.0, -5.0};
    model.components[0].cov = {1e-4, 0.0, 0.0, 1e-4};
    model.components[0].weight = 0.5;
    model.components[1].mean = {0.5, 0.3};
    model.components[1].cov = {0.05, 0.0, 0.0, 0.05};
    model.components[1].weight = 0.5;
    std::vector<ClientSpectralStats> stats = {
        make_stats(0, 0.45, 0.25), make_stats(1, 0.55, 0.35),
    };
    CHECK_THROWS_WITH_AS(partition_clients(stats, model),
                         doctest::Contains("no clean clients"),
                         std::runtime_error);
}
