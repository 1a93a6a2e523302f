#include "fedsir/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsir/rng.hpp"

namespace fedsir {

namespace {

// Per-client training with a per-(round, client) seed so that reordering or
// skipping one client's work never shifts another client's RNG stream.
ModelParams train_client(const ModelShape& shape, const ModelParams& start,
                         const ClientDataset& client,
                         const LocalTrainConfig& base, LossKind kind,
                         const TrainAux& aux, std::uint64_t stage_tag_seed) {
    LocalTrainConfig local = base;
    local.rng_seed = derive_seed(stage_tag_seed, "client",
                                 static_cast<std::uint64_t>(client.client_id));
    return local_train(shape, start, client, local, kind, aux);
}

std::vector<double> margins_for(const ClientDataset& client, int num_classes,
                                const LAConfig& la, bool enabled) {
    LAConfig effective = la;
    if (!enabled) effective.beta = 0.0;
    return logit_adjustment(class_priors(client, num_classes), effective);
}

std::vector<int> counts_of(const std::vector<ClientDataset>& clients) {
    std::vector<int> counts;
    counts.reserve(clients.size());
    for (const auto& c : clients) counts.push_back(static_cast<int>(c.size()));
    return counts;
}

}  // namespace

ModelShape ExperimentConfig::shape() const {
    return ModelShape{.input_dim = data.input_dim,
                      .hidden_dim = hidden_dim,
                      .feature_dim = feature_dim,
                      .num_classes = data.num_classes};
}

void ExperimentConfig::validate() const {
    data.validate();
    if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
    if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (relabel_period < 1) {
        throw std::invalid_argument("relabel_period must be >= 1");
    }
    if (residual_rank < 1) {
        throw std::invalid_argument("residual_rank must be >= 1");
    }
    if (stage1.epochs < 1 || stage2.epochs < 1) {
        throw std::invalid_argument("local epochs must be >= 1");
    }
    if (stage1.learning_rate <= 0.0 || stage2.learning_rate <= 0.0) {
        throw std::invalid_argument("learning rates must be positive");
    }
    if (stage1.weight_decay < 0.0 || stage2.weight_decay < 0.0) {
        throw std::invalid_argument("weight decay must be non-negative");
    }
    if (stage1.batch_size < 1 || stage2.batch_size < 1) {
        throw std::invalid_argument("batch sizes must be >= 1");
    }
    if (la.beta < 0.0) throw std::invalid_argument("la beta must be >= 0");
    if (la.epsilon <= 0.0) throw std::invalid_argument("la epsilon must be > 0");
    if (kd.temperature <= 0.0) {
        throw std::invalid_argument("kd temperature must be > 0");
    }
    if (kd.kd_weight < 0.0 || kd.kd_weight > 1.0) {
        throw std::invalid_argument("kd weight must be in [0, 1]");
    }
    if (heldout_fraction <= 0.0 || heldout_fraction >= 1.0) {
        throw std::invalid_argument("heldout_fraction must be in (0, 1)");
    }
}

std::string method_name(Method m) {
    switch (m) {
        case Method::kFedSir: return "fedsir";
        case Method::kFedAvg: return "fedavg";
        case Method::kPruning: return "pruning";
    }
    throw std::invalid_argument("unknown method");
}

ExperimentEnv prepare_environment(const ExperimentConfig& cfg) {
    ExperimentEnv env;
    std::vector<Sample> samples = generate_synthetic(cfg.data);
    env.clients = partition_dirichlet(samples, cfg.data);
    env.clients = inject_symmetric_noise(std::move(env.clients), cfg.data);
    int heldout = std::max(
        1, static_cast<int>(std::lround(cfg.heldout_fraction *
                                        cfg.data.samples_total)));
    env.heldout = generate_heldout(cfg.data, heldout);
    return env;
}

ExperimentEnv environment_from_samples(const ExperimentConfig& cfg,
                                       std::vector<Sample> samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("need at least two samples to split");
    }
    auto rng = make_rng(cfg.data.rng_seed, "heldout_split");
    std::shuffle(samples.begin(), samples.end(), rng);
    std::size_t heldout = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::lround(cfg.heldout_fraction *
                           static_cast<double>(samples.size()))));
    if (heldout >= samples.size()) heldout = samples.size() - 1;

    ExperimentEnv env;
    env.heldout.assign(samples.end() - static_cast<std::ptrdiff_t>(heldout),
                       samples.end());
    samples.resize(samples.size() - heldout);
    env.clients = partition_dirichlet(samples, cfg.data);
    env.clients = inject_symmetric_noise(std::move(env.clients), cfg.data);
    return env;
}

Stage1Result run_stage1(const ExperimentConfig& cfg,
                        const std::vector<ClientDataset>& clients) {
    ModelShape shape = cfg.shape();
    ModelParams init = init_params(shape, derive_seed(cfg.rng_seed, "model_init"));
    std::uint64_t stage_seed = derive_seed(cfg.rng_seed, "stage1_train");

    Stage1Result result;
    std::vector<ModelParams> trained(clients.size());
    SpectralOptions spectral{.normalize_features = cfg.normalize_features};
    for (std::size_t k = 0; k < clients.size(); ++k) {
        trained[k] = train_client(shape, init, clients[k], cfg.stage1,
                                  LossKind::kCrossEntropy, {}, stage_seed);
        SpectralSignature sig =
            extract_spectral(clients[k], shape, trained[k], 0, spectral);
        result.similarities.push_back(class_similarity(sig, shape.num_classes));
        result.stats.push_back(offdiag_stats(result.similarities.back(),
                                             clients[k].client_id));
    }

    GmmModel gmm =
        fit_gmm_2(stats_points(result.stats), derive_seed(cfg.rng_seed, "gmm"));
    IdentifyOptions id_opts{.excluded_as_clean = cfg.excluded_as_clean};
    result.partition = partition_clients(result.stats, gmm, id_opts);

    std::vector<ModelParams> clean_params;
    std::vector<int> clean_counts;
    for (int id : result.partition.clean) {
        clean_params.push_back(trained[id]);
        clean_counts.push_back(static_cast<int>(clients[id].size()));
    }
    result.global = fedavg(clean_params, clean_counts);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    return run_experiment(cfg, prepare_environment(cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, ExperimentEnv env,
                                const RoundObserver& observer) {
    cfg.validate();
    ModelShape shape = cfg.shape();

    ExperimentResult result;
    result.initial_noise_rates.reserve(env.clients.size());
    for (const auto& c : env.clients) {
        result.initial_noise_rates.push_back(residual_noise_rate(c));
    }

    ModelParams global;
    ModelParams clean_ref;  // empty unless the method maintains one
    std::vector<bool> is_clean(env.clients.size(), false);

    if (cfg.method == Method::kFedAvg) {
        global = init_params(shape, derive_seed(cfg.rng_seed, "model_init"));
    } else {
        result.has_stage1 = true;
        result.stage1 = run_stage1(cfg, env.clients);
        global = result.stage1.global;
        clean_ref = result.stage1.global;
        for (int id : result.stage1.partition.clean) is_clean[id] = true;
    }

    std::vector<int> all_counts = counts_of(env.clients);
    std::vector<int> clean_ids;
    for (std::size_t k = 0; k < env.clients.size(); ++k) {
        if (is_clean[k]) clean_ids.push_back(static_cast<int>(k));
    }

    RelabelOptions relabel_opts{
        .residual_rank = cfg.residual_rank,
        .weighting = cfg.relabel_weighting,
        .rule = RelabelRule::kAgreement,
        .spectral = {.normalize_features = cfg.normalize_features}};
    KDConfig kd = cfg.kd;
    if (!cfg.ablation.kd) kd.kd_weight = 0.0;
    DaAggOptions daagg_opts{.rescale_distances = cfg.rescale_distances};

    result.best_accuracy = 0.0;
    for (int t = 1; t <= cfg.rounds; ++t) {
        std::uint64_t round_seed =
            derive_seed(cfg.rng_seed, "round_train", static_cast<std::uint64_t>(t));
        RoundMetrics metrics;
        metrics.round = t;

        if (cfg.method == Method::kFedAvg) {
            std::vector<ModelParams> trained(env.clients.size());
            for (std::size_t k = 0; k < env.clients.size(); ++k) {
                trained[k] = train_client(shape, global, env.clients[k],
                                          cfg.stage2, LossKind::kCrossEntropy,
                                          {}, round_seed);
            }
            global = fedavg(trained, all_counts);
            metrics.weights.sample_weight.assign(env.clients.size(), 0.0);
            metrics.weights.distance.assign(env.clients.size(), 0.0);
            metrics.weights.final_weight.resize(env.clients.size());
            double total = 0.0;
            for (int n : all_counts) total += n;
            for (std::size_t k = 0; k < env.clients.size(); ++k) {
                metrics.weights.sample_weight[k] = all_counts[k] / total;
                metrics.weights.final_weight[k] = all_counts[k] / total;
            }
        } else if (cfg.method == Method::kPruning) {
            std::vector<ModelParams> trained;
            std::vector<int> counts;
            for (int id : clean_ids) {
                trained.push_back(train_client(shape, global,
                                               env.clients[id], cfg.stage2,
                                               LossKind::kCrossEntropy, {},
                                               round_seed));
                counts.push_back(all_counts[id]);
            }
            global = fedavg(trained, counts);
            clean_ref = global;
            double total = 0.0;
            for (int n : counts) total += n;
            metrics.weights.sample_weight.assign(env.clients.size(), 0.0);
            metrics.weights.distance.assign(env.clients.size(), 0.0);
            metrics.weights.final_weight.assign(env.clients.size(), 0.0);
            for (std::size_t i = 0; i < clean_ids.size(); ++i) {
                metrics.weights.sample_weight[clean_ids[i]] = counts[i] / total;
                metrics.weights.final_weight[clean_ids[i]] = counts[i] / total;
            }
        } else {
            // Clean clients first: their freshly trained models provide the
            // relabel-round signatures before any noisy client proceeds.
            std::vector<ModelParams> trained(env.clients.size());
            for (int id : clean_ids) {
                std::vector<double> margins = margins_for(
                    env.clients[id], shape.num_classes, cfg.la, cfg.ablation.la);
                TrainAux aux;
                aux.margins = &margins;
                trained[id] = train_client(shape, global, env.clients[id],
                                           cfg.stage2, LossKind::kLogitAdjusted,
                                           aux, round_seed);
            }

            bool relabel_round =
                cfg.ablation.relabel && (t % cfg.relabel_period == 0);
            if (relabel_round) {
                std::vector<SpectralSignature> sigs;
                std::vector<std::vector<int>> counts;
                for (int id : clean_ids) {
                    sigs.push_back(extract_spectral(env.clients[id], shape,
                                                    trained[id],
                                                    cfg.residual_rank,
                                                    relabel_opts.spectral));
                    counts.push_back(
                        env.clients[id].class_counts(shape.num_classes));
                }
                auto refs = aggregate_references(sigs, counts,
                                                 shape.num_classes,
                                                 relabel_opts);
                for (std::size_t k = 0; k < env.clients.size(); ++k) {
                    if (is_clean[k]) continue;
                    metrics.relabel_reports.push_back(
                        relabel_client(env.clients[k], shape, clean_ref, refs,
                                       relabel_opts));
                }
            }

            for (std::size_t k = 0; k < env.clients.size(); ++k) {
                if (is_clean[k]) continue;
                std::vector<double> margins = margins_for(
                    env.clients[k], shape.num_classes, cfg.la, cfg.ablation.la);
                TrainAux aux;
                aux.margins = &margins;
                aux.teacher_params = &global;
                aux.kd = kd;
                trained[k] = train_client(shape, global, env.clients[k],
                                          cfg.stage2,
                                          LossKind::kLogitAdjustedKD, aux,
                                          round_seed);
            }

            if (cfg.ablation.daagg) {
                auto [next, weights] =
                    daagg(trained, all_counts, clean_ids, daagg_opts);
                global = std::move(next);
                metrics.weights = std::move(weights);
            } else {
                global = fedavg(trained, all_counts);
                double total = 0.0;
                for (int n : all_counts) total += n;
                metrics.weights.sample_weight.resize(env.clients.size());
                metrics.weights.distance.assign(env.clients.size(), 0.0);
                metrics.weights.final_weight.resize(env.clients.size());
                for (std::size_t k = 0; k < env.clients.size(); ++k) {
                    metrics.weights.sample_weight[k] = all_counts[k] / total;
                    metrics.weights.final_weight[k] = all_counts[k] / total;
                }
            }

            std::vector<ModelParams> clean_trained;
            std::vector<int> clean_counts;
            for (int id : clean_ids) {
                clean_trained.push_back(trained[id]);
                clean_counts.push_back(all_counts[id]);
            }
            clean_ref = fedavg(clean_trained, clean_counts);
        }

        metrics.global_accuracy = evaluate_accuracy(shape, global, env.heldout);
        metrics.clean_accuracy =
            clean_ref.empty()
                ? std::numeric_limits<double>::quiet_NaN()
                : evaluate_accuracy(shape, clean_ref, env.heldout);
        for (const auto& c : env.clients) {
            metrics.client_noise_rates.push_back(residual_noise_rate(c));
        }

        result.best_accuracy = std::max(result.best_accuracy,
                                        metrics.global_accuracy);
        if (observer) observer(metrics, global, clean_ref);
        result.rounds.push_back(std::move(metrics));
    }

    result.final_accuracy = result.rounds.back().global_accuracy;
    result.final_global = std::move(global);
    result.clients = std::move(env.clients);
    return result;
}

}  // namespace fedsir
