#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "fedsir/data.hpp"

using namespace fedsir;

namespace {

DataGenConfig small_config() {
    DataGenConfig cfg;
    cfg.num_clients = 4;
    cfg.num_classes = 3;
    cfg.samples_total = 120;
    cfg.input_dim = 8;
    cfg.dirichlet_concentration = 1.0;
    cfg.noise_rate = 0.5;
    cfg.clean_client_count = 2;
    cfg.class_separation = 6.0;
    cfg.rng_seed = 42;
    return cfg;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

// Sortable key so multisets of samples can be compared exactly.
std::vector<double> sample_key(const Sample& s) {
    std::vector<double> key = s.input;
    key.push_back(static_cast<double>(s.true_label));
    return key;
}

double entropy_gap_from_uniform(const ClientDataset& client, int num_classes) {
    std::vector<int> counts = client.class_counts(num_classes);
    double n = static_cast<double>(client.size());
    double h = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        double p = c / n;
        h -= p * std::log(p);
    }
    return std::log(static_cast<double>(num_classes)) - h;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    DataGenConfig cfg = small_config();
    cfg.noise_rate = 1.5;
    CHECK_THROWS_WITH_AS(cfg.validate(),
                         doctest::Contains("noise_rate"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.dirichlet_concentration = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(),
                         doctest::Contains("dirichlet_concentration"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.samples_total = cfg.num_classes - 1;  // more classes than samples
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = small_config();
    cfg.input_dim = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("input_dim"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.clean_client_count = cfg.num_clients + 1;
    CHECK_THROWS_WITH_AS(cfg.validate(),
                         doctest::Contains("clean_client_count"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.per_client_noise = {0.1, 0.2};  // wrong length
    CHECK_THROWS_WITH_AS(cfg.validate(),
                         doctest::Contains("per_client_noise"),
                         std::invalid_argument);
}

TEST_CASE("two separated classes keep within-class pairs closest") {
    DataGenConfig cfg = small_config();
    cfg.num_classes = 2;
    cfg.samples_total = 4;
    cfg.class_separation = 10.0;
    std::vector<Sample> samples = generate_synthetic(cfg);
    REQUIRE(samples.size() == 4);

    std::vector<const Sample*> cls0;
    std::vector<const Sample*> cls1;
    for (const Sample& s : samples) {
        CHECK(s.observed_label == s.true_label);
        (s.true_label == 0 ? cls0 : cls1).push_back(&s);
    }
    REQUIRE(cls0.size() == 2);
    REQUIRE(cls1.size() == 2);

    double within0 = dist(cls0[0]->input, cls0[1]->input);
    double within1 = dist(cls1[0]->input, cls1[1]->input);
    for (const Sample* a : cls0) {
        for (const Sample* b : cls1) {
            double cross = dist(a->input, b->input);
            CHECK(within0 < cross);
            CHECK(within1 < cross);
        }
    }
}

TEST_CASE("N equal to C yields one sample per class") {
    DataGenConfig cfg = small_config();
    cfg.num_classes = 5;
    cfg.samples_total = 5;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::set<int> seen;
    for (const Sample& s : samples) seen.insert(s.true_label);
    CHECK(seen.size() == 5);
}

TEST_CASE("generation is bit-identical under a fixed seed") {
    DataGenConfig cfg = small_config();
    std::vector<Sample> a = generate_synthetic(cfg);
    std::vector<Sample> b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].input == b[i].input);
        CHECK(a[i].true_label == b[i].true_label);
    }
}

TEST_CASE("heldout samples share clusters but differ from training draws") {
    DataGenConfig cfg = small_config();
    std::vector<Sample> train = generate_synthetic(cfg);
    std::vector<Sample> held = generate_heldout(cfg, 30);
    CHECK(held.size() == 30);
    for (const Sample& s : held) {
        CHECK(s.observed_label == s.true_label);
        CHECK(s.input != train[0].input);
    }
}

TEST_CASE("dirichlet partition covers every sample exactly once") {
    DataGenConfig cfg = small_config();
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    REQUIRE(clients.size() == static_cast<std::size_t>(cfg.num_clients));

    std::size_t total = 0;
    std::vector<std::vector<double>> all_keys;
    for (const ClientDataset& c : clients) {
        CHECK(c.size() >= 1);
        total += c.size();
        for (const Sample& s : c.samples) all_keys.push_back(sample_key(s));
    }
    CHECK(total == samples.size());

    std::vector<std::vector<double>> want_keys;
    for (const Sample& s : samples) want_keys.push_back(sample_key(s));
    std::sort(all_keys.begin(), all_keys.end());
    std::sort(want_keys.begin(), want_keys.end());
    CHECK(all_keys == want_keys);
}

TEST_CASE("single client receives everything") {
    DataGenConfig cfg = small_config();
    cfg.num_clients = 1;
    cfg.clean_client_count = 1;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    REQUIRE(clients.size() == 1);
    CHECK(clients[0].size() == samples.size());
}

TEST_CASE("low concentration increases label-skew entropy gap") {
    double gap_low = 0.0;
    double gap_high = 0.0;
    int clients_counted_low = 0;
    int clients_counted_high = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (double alpha : {0.1, 2.0}) {
            DataGenConfig cfg;
            cfg.num_clients = 10;
            cfg.num_classes = 10;
            cfg.samples_total = 1000;
            cfg.input_dim = 4;
            cfg.dirichlet_concentration = alpha;
            cfg.clean_client_count = 10;
            cfg.rng_seed = seed;
            std::vector<Sample> samples = generate_synthetic(cfg);
            std::vector<ClientDataset> clients =
                partition_dirichlet(samples, cfg);
            for (const ClientDataset& c : clients) {
                double gap = entropy_gap_from_uniform(c, cfg.num_classes);
                if (alpha == 0.1) {
                    gap_low += gap;
                    ++clients_counted_low;
                } else {
                    gap_high += gap;
                    ++clients_counted_high;
                }
            }
        }
    }
    gap_low /= clients_counted_low;
    gap_high /= clients_counted_high;
    CHECK(gap_low > gap_high);
}

TEST_CASE("zero noise leaves every label intact") {
    DataGenConfig cfg = small_config();
    cfg.noise_rate = 0.0;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    clients = inject_symmetric_noise(std::move(clients), cfg);
    for (const ClientDataset& c : clients) {
        for (const Sample& s : c.samples) {
            CHECK(s.observed_label == s.true_label);
        }
        CHECK(residual_noise_rate(c) == 0.0);
    }
}

TEST_CASE("full noise with two classes forces every flip") {
    DataGenConfig cfg = small_config();
    cfg.num_classes = 2;
    cfg.noise_rate = 1.0;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    clients = inject_symmetric_noise(std::move(clients), cfg);
    int noisy_clients = 0;
    for (const ClientDataset& c : clients) {
        if (!c.is_noisy_ground_truth) continue;
        ++noisy_clients;
        for (const Sample& s : c.samples) {
            CHECK(s.observed_label == 1 - s.true_label);
        }
        CHECK(residual_noise_rate(c) == 1.0);
    }
    CHECK(noisy_clients == cfg.num_clients - cfg.clean_client_count);
}

TEST_CASE("noise frequency concentrates at the nominal rate") {
    DataGenConfig cfg;
    cfg.num_clients = 2;
    cfg.num_classes = 5;
    cfg.samples_total = 20000;
    cfg.input_dim = 2;
    cfg.noise_rate = 0.6;
    cfg.clean_client_count = 0;
    cfg.rng_seed = 3;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    clients = inject_symmetric_noise(std::move(clients), cfg);
    for (const ClientDataset& c : clients) {
        if (c.size() < 10000) continue;
        double rate = residual_noise_rate(c);
        CHECK(rate > 0.58);
        CHECK(rate < 0.62);
    }
}

TEST_CASE("noise never touches inputs or true labels") {
    DataGenConfig cfg = small_config();
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    std::vector<ClientDataset> before = clients;
    clients = inject_symmetric_noise(std::move(clients), cfg);
    for (std::size_t k = 0; k < clients.size(); ++k) {
        REQUIRE(clients[k].size() == before[k].size());
        for (std::size_t i = 0; i < clients[k].samples.size(); ++i) {
            CHECK(clients[k].samples[i].input == before[k].samples[i].input);
            CHECK(clients[k].samples[i].true_label ==
                  before[k].samples[i].true_label);
        }
    }
}

TEST_CASE("per-client noise override applies distinct rates") {
    DataGenConfig cfg = small_config();
    cfg.num_clients = 2;
    cfg.clean_client_count = 0;
    cfg.samples_total = 4000;
    cfg.per_client_noise = {0.0, 1.0};
    cfg.num_classes = 2;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    clients = inject_symmetric_noise(std::move(clients), cfg);
    CHECK(residual_noise_rate(clients[0]) == 0.0);
    CHECK(residual_noise_rate(clients[1]) == 1.0);
}

TEST_CASE("class_counts sums to the dataset size") {
    DataGenConfig cfg = small_config();
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::vector<ClientDataset> clients = partition_dirichlet(samples, cfg);
    clients = inject_symmetric_noise(std::move(clients), cfg);
    for (const ClientDataset& c : clients) {
        std::vector<int> counts = c.class_counts(cfg.num_classes);
        int sum = 0;
        for (int n : counts) sum += n;
        CHECK(sum == static_cast<int>(c.size()));
    }
}

TEST_CASE("feature file round-trips samples exactly") {
    DataGenConfig cfg = small_config();
    cfg.samples_total = 25;
    std::vector<Sample> samples = generate_synthetic(cfg);
    std::filesystem::path path =
        std::filesystem::temp_directory_path() / "fedsir_features_test.txt";
    save_feature_file(path.string(), samples, cfg.num_classes);

    int num_classes = 0;
    int input_dim = 0;
    std::vector<Sample> loaded =
        load_feature_file(path.string(), num_classes, input_dim);
    CHECK(num_classes == cfg.num_classes);
    CHECK(input_dim == cfg.input_dim);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].input == samples[i].input);
        CHECK(loaded[i].true_label == samples[i].true_label);
        CHECK(loaded[i].observed_label == samples[i].true_label);
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed feature files are rejected") {
    std::filesystem::path path =
        std::filesystem::temp_directory_path() / "fedsir_features_bad.txt";
    {
        std::ofstream out(path);
        out << "2 2 2\n1.0 2.0 0\n3.0 4.0 7\n";  // label out of range
    }
    int c = 0;
    int d = 0;
    CHECK_THROWS_AS(load_feature_file(path.string(), c, d),
                    std::runtime_error);
    {
        std::ofstream out(path);
        out << "3 2 2\n1.0 2.0 0\n3.0 4.0 1\n";  // truncated
    }
    CHECK_THROWS_AS(load_feature_file(path.string(), c, d),
                    std::runtime_error);
    std::filesystem::remove(path);
}
