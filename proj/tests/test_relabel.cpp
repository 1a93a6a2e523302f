#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "fedsir/data.hpp"
#include "fedsir/model.hpp"
#include "fedsir/relabel.hpp"
#include "fedsir/spectral.hpp"

using namespace fedsir;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

SpectralSignature sig_for(int client_id,
                          std::map<int, ClassSpectrum> per_class) {
    SpectralSignature sig;
    sig.client_id = client_id;
    sig.per_class = std::move(per_class);
    return sig;
}

// Identity weights and tiny inputs keep the two tanh layers in their linear
// regime, so features track inputs to ~1e-9 and scores are predictable.
ModelShape passthrough_shape() {
    ModelShape shape;
    shape.input_dim = 2;
    shape.hidden_dim = 2;
    shape.feature_dim = 2;
    shape.num_classes = 2;
    return shape;
}

ModelParams passthrough_params(const ModelShape& shape) {
    ModelParams params(shape.param_count(), 0.0);
    params[shape.w1_off() + 0] = 1.0;
    params[shape.w1_off() + 3] = 1.0;
    params[shape.w2_off() + 0] = 1.0;
    params[shape.w2_off() + 3] = 1.0;
    return params;
}

Sample make_sample(std::vector<double> input, int observed, int truth) {
    Sample s;
    s.input = std::move(input);
    s.observed_label = observed;
    s.true_label = truth;
    return s;
}

}  // namespace

TEST_CASE("a single contributor fixes the reference up to sign") {
    SpectralSignature sig = sig_for(0, {{0, {{0.6, 0.8}, {}}}});
    std::map<int, ClassReference> refs =
        aggregate_references({sig}, {{5, 0}}, 2);
    REQUIRE(refs.count(0) == 1);
    CHECK(refs.at(0).dominant[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(refs.at(0).dominant[1] == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(refs.count(1) == 0);  // class 1 has no contributor

    // The same direction with flipped sign builds the same projector.
    SpectralSignature neg = sig_for(0, {{0, {{-0.6, -0.8}, {}}}});
    std::map<int, ClassReference> refs2 =
        aggregate_references({neg}, {{5, 0}}, 2);
    CHECK(refs2.at(0).dominant[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(refs2.at(0).dominant[1] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("sample counts weight the dominant consensus") {
    SpectralSignature a = sig_for(0, {{0, {{1.0, 0.0, 0.0}, {}}}});
    SpectralSignature b = sig_for(1, {{0, {{0.0, 1.0, 0.0}, {}}}});
    std::map<int, ClassReference> refs =
        aggregate_references({a, b}, {{3, 0, 0}, {1, 0, 0}}, 3);
    // (3 e1e1^T + e2e2^T)/4 has principal direction e1.
    CHECK(refs.at(0).dominant[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(refs.at(0).dominant[1]) <= 1e-9);

    RelabelOptions sqrt_opts;
    sqrt_opts.weighting = RelabelWeighting::kSqrt;
    std::map<int, ClassReference> refs_sqrt =
        aggregate_references({a, b}, {{9, 0, 0}, {1, 0, 0}}, 3, sqrt_opts);
    CHECK(refs_sqrt.at(0).dominant[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("residual references stay orthonormal and span contributors") {
    ClassSpectrum sa;
    sa.dominant = {1.0, 0.0, 0.0};
    sa.residual = {{0.0, 1.0, 0.0}};
    ClassSpectrum sb;
    sb.dominant = {1.0, 0.0, 0.0};
    sb.residual = {{0.0, 0.0, 1.0}};
    RelabelOptions opts;
    opts.residual_rank = 2;
    std::map<int, ClassReference> refs = aggregate_references(
        {sig_for(0, {{0, sa}}), sig_for(1, {{0, sb}})}, {{1, 0}, {1, 0}}, 2,
        opts);
    const ClassReference& ref = refs.at(0);
    REQUIRE(ref.residual.size() == 2);
    for (const std::vector<double>& row : ref.residual) {
        CHECK(dot(row, row) == doctest::Approx(1.0).epsilon(1e-9));
        // Contributors span {e2, e3}; e1 must not leak in.
        CHECK(std::abs(row[0]) <= 1e-9);
    }
    CHECK(std::abs(dot(ref.residual[0], ref.residual[1])) <= 1e-9);

    opts.residual_rank = 1;
    std::map<int, ClassReference> trimmed = aggregate_references(
        {sig_for(0, {{0, sa}}), sig_for(1, {{0, sb}})}, {{1, 0}, {1, 0}}, 2,
        opts);
    CHECK(trimmed.at(0).residual.size() == 1);
}

TEST_CASE("scores combine dominant alignment and residual energy") {
    std::map<int, ClassReference> refs;
    refs[0].cls = 0;
    refs[0].dominant = {1.0, 0.0, 0.0};
    refs[0].residual = {{0.0, 0.0, 1.0}};
    std::vector<double> z = {1.0, 1.0, 0.0};
    SampleScores scores = score_sample(z, refs, 2, 1);
    CHECK(scores.dominant[0] == doctest::Approx(1.0));
    CHECK(scores.residual[0] == doctest::Approx(0.0));
    // Uncovered classes can win neither vote.
    CHECK(scores.dominant[1] == -1.0);
    CHECK(scores.residual[1] == std::numeric_limits<double>::infinity());

    // A feature orthogonal to the dominant scores zero on it.
    SampleScores ortho = score_sample({0.0, 2.0, 0.0}, refs, 2, 1);
    CHECK(ortho.dominant[0] == doctest::Approx(0.0));

    // The normalizer uses the configured rank, not the rows present.
    std::map<int, ClassReference> wide;
    wide[0].dominant = {1.0, 0.0, 0.0};
    wide[0].residual = {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    SampleScores s4 = score_sample({0.0, 3.0, 4.0}, wide, 1, 4);
    CHECK(s4.residual[0] == doctest::Approx(5.0 / 2.0));
}

TEST_CASE("an ideal member scores one on dominant and zero on residual") {
    std::map<int, ClassReference> refs;
    refs[0].dominant = {0.6, 0.8, 0.0};
    refs[0].residual = {{0.0, 0.0, 1.0}};
    SampleScores s = score_sample({0.6, 0.8, 0.0}, refs, 1, 1);
    CHECK(s.dominant[0] == doctest::Approx(1.0));
    CHECK(s.residual[0] == doctest::Approx(0.0));
}

TEST_CASE("vote agreement gates the label rewrite") {
    ModelShape shape = passthrough_shape();
    ModelParams params = passthrough_params(shape);

    std::map<int, ClassReference> refs;
    // Class 0's residual deliberately overlaps its own dominant, so a sample
    // along e1 wins the dominant vote for 0 but the residual vote for 1.
    refs[0].dominant = {1.0, 0.0};
    refs[0].residual = {{1.0, 0.0}};
    refs[1].dominant = {0.0, 1.0};
    refs[1].residual = {{0.0, 1.0}};

    RelabelOptions opts;
    opts.residual_rank = 1;

    ClientDataset disagree;
    disagree.samples.push_back(make_sample({1e-3, 0.5e-3}, 1, 0));

    ClientDataset copy = disagree;
    RelabelReport agree_report =
        relabel_client(copy, shape, params, refs, opts);
    CHECK(agree_report.changed == 0);
    CHECK(copy.samples[0].observed_label == 1);

    copy = disagree;
    RelabelReport dom_report = relabel_variant(copy, shape, params, refs,
                                               RelabelRule::kDominantOnly, opts);
    CHECK(dom_report.changed == 1);
    CHECK(dom_report.changed_correctly == 1);
    CHECK(copy.samples[0].observed_label == 0);

    copy = disagree;
    RelabelReport res_report = relabel_variant(copy, shape, params, refs,
                                               RelabelRule::kResidualOnly, opts);
    CHECK(res_report.changed == 0);  // residual vote matches the current label
    CHECK(copy.samples[0].observed_label == 1);
}

TEST_CASE("agreeing votes rewrite the label under every rule") {
    ModelShape shape = passthrough_shape();
    ModelParams params = passthrough_params(shape);
    std::map<int, ClassReference> refs;
    refs[0].dominant = {1.0, 0.0};
    refs[0].residual = {{0.0, 1.0}};
    refs[1].dominant = {0.0, 1.0};
    refs[1].residual = {{1.0, 0.0}};
    RelabelOptions opts;
    opts.residual_rank = 1;

    for (RelabelRule rule : {RelabelRule::kAgreement, RelabelRule::kDominantOnly,
                             RelabelRule::kResidualOnly}) {
        ClientDataset client;
        client.samples.push_back(make_sample({1e-3, 0.0}, 1, 0));
        RelabelReport report =
            relabel_variant(client, shape, params, refs, rule, opts);
        CHECK(report.examined == 1);
        CHECK(report.changed == 1);
        CHECK(report.changed_correctly == 1);
        CHECK(client.samples[0].observed_label == 0);
        CHECK(client.samples[0].true_label == 0);
        CHECK(report.noise_rate_before == doctest::Approx(1.0));
        CHECK(report.noise_rate_after == doctest::Approx(0.0));
    }
}

TEST_CASE("empty references leave the client untouched") {
    ModelShape shape = passthrough_shape();
    ModelParams params = passthrough_params(shape);
    ClientDataset client;
    client.samples.push_back(make_sample({1e-3, 0.0}, 1, 0));
    RelabelReport report = relabel_client(client, shape, params, {}, {});
    CHECK(report.changed == 0);
    CHECK(client.samples[0].observed_label == 1);
}

TEST_CASE("relabeling separable clusters reduces the noise rate") {
    ModelShape shape;
    shape.input_dim = 6;
    shape.hidden_dim = 12;
    shape.feature_dim = 6;
    shape.num_classes = 3;

    DataGenConfig cfg;
    cfg.num_clients = 2;
    cfg.num_classes = 3;
    cfg.samples_total = 300;
    cfg.input_dim = 6;
    cfg.dirichlet_concentration = 10.0;
    cfg.noise_rate = 0.6;
    cfg.clean_client_count = 1;
    cfg.class_separation = 8.0;
    cfg.rng_seed = 14;
    std::vector<ClientDataset> clients =
        inject_symmetric_noise(partition_dirichlet(generate_synthetic(cfg), cfg), cfg);
    ClientDataset* clean = nullptr;
    ClientDataset* noisy = nullptr;
    for (ClientDataset& c : clients) {
        (c.is_noisy_ground_truth ? noisy : clean) = &c;
    }
    REQUIRE(clean != nullptr);
    REQUIRE(noisy != nullptr);

    // Features come from a model briefly trained on the clean client.
    LocalTrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.learning_rate = 5e-3;
    tcfg.weight_decay = 0.0;
    tcfg.batch_size = 32;
    tcfg.rng_seed = 2;
    TrainAux aux;
    ModelParams params = local_train(shape, init_params(shape, 1), *clean,
                                     tcfg, LossKind::kCrossEntropy, aux);

    RelabelOptions opts;
    opts.residual_rank = 2;
    SpectralSignature sig = extract_spectral(*clean, shape, params, 2);
    std::map<int, ClassReference> refs = aggregate_references(
        {sig}, {clean->class_counts(3)}, 3, opts);
    REQUIRE(!refs.empty());

    ClientDataset before = *noisy;
    RelabelReport report = relabel_client(*noisy, shape, params, refs, opts);

    CHECK(report.examined == static_cast<int>(noisy->size()));
    CHECK(report.changed <= report.examined);
    CHECK(report.changed_correctly <= report.changed);
    CHECK(report.noise_rate_before == doctest::Approx(residual_noise_rate(before)));
    CHECK(report.noise_rate_after == doctest::Approx(residual_noise_rate(*noisy)));
    CHECK(report.noise_rate_after < report.noise_rate_before);

    // Inputs and ground truth survive; only observed labels move.
    REQUIRE(noisy->size() == before.size());
    for (std::size_t i = 0; i < noisy->samples.size(); ++i) {
        CHECK(noisy->samples[i].input == before.samples[i].input);
        CHECK(noisy->samples[i].true_label == before.samples[i].true_label);
    }

    // A second pass finds nothing left to change: votes depend only on
    // features and references, both unchanged.
    RelabelReport again = relabel_client(*noisy, shape, params, refs, opts);
    CHECK(again.changed == 0);

    // Agreement rewrites exactly where the two single-vote rules coincide.
    ClientDataset dom_copy = before;
    ClientDataset res_copy = before;
    relabel_variant(dom_copy, shape, params, refs, RelabelRule::kDominantOnly,
                    opts);
    relabel_variant(res_copy, shape, params, refs, RelabelRule::kResidualOnly,
                    opts);
    for (std::size_t i = 0; i < before.samples.size(); ++i) {
        int dom = dom_copy.samples[i].observed_label;
        int res = res_copy.samples[i].observed_label;
        int got = noisy->samples[i].observed_label;
        if (dom == res) {
            CHECK(got == dom);
        } else {
            CHECK(got == before.samples[i].observed_label);
        }
    }
}
