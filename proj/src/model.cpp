#include "fedsir/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fedsir/kernels.hpp"
#include "fedsir/rng.hpp"

namespace fedsir {

std::size_t ModelShape::param_count() const {
    return b3_off() + num_classes;
}
std::size_t ModelShape::b1_off() const {
    return static_cast<std::size_t>(hidden_dim) * input_dim;
}
std::size_t ModelShape::w2_off() const { return b1_off() + hidden_dim; }
std::size_t ModelShape::b2_off() const {
    return w2_off() + static_cast<std::size_t>(feature_dim) * hidden_dim;
}
std::size_t ModelShape::w3_off() const { return b2_off() + feature_dim; }
std::size_t ModelShape::b3_off() const {
    return w3_off() + static_cast<std::size_t>(num_classes) * feature_dim;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
    ModelParams p(shape.param_count(), 0.0);
    auto rng = make_rng(seed, "model_init");
    auto fill = [&](std::size_t off, std::size_t count, int fan_in) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(fan_in));
        for (std::size_t i = 0; i < count; ++i) p[off + i] = normal(rng);
    };
    fill(shape.w1_off(), static_cast<std::size_t>(shape.hidden_dim) * shape.input_dim,
         shape.input_dim);
    fill(shape.w2_off(), static_cast<std::size_t>(shape.feature_dim) * shape.hidden_dim,
         shape.hidden_dim);
    fill(shape.w3_off(), static_cast<std::size_t>(shape.num_classes) * shape.feature_dim,
         shape.feature_dim);
    return p;
}

namespace {

struct ForwardTrace {
    std::vector<double> hidden;    // tanh(W1 x + b1)
    std::vector<double> features;  // tanh(W2 hidden + b2)
    std::vector<double> logits;    // W3 features + b3
};

ForwardTrace forward_trace(const ModelShape& s, const ModelParams& p,
                           std::span<const double> x) {
    if (static_cast<int>(x.size()) != s.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    if (p.size() != s.param_count())
        throw std::invalid_argument("forward: parameter vector size mismatch");

    ForwardTrace t;
    t.hidden.resize(s.hidden_dim);
    t.features.resize(s.feature_dim);
    t.logits.resize(s.num_classes);

    std::span<const double> params(p);
    kern::matvec(params.subspan(s.w1_off(), s.b1_off() - s.w1_off()), x, t.hidden,
                 s.hidden_dim, s.input_dim);
    for (int i = 0; i < s.hidden_dim; ++i)
        t.hidden[i] = std::tanh(t.hidden[i] + p[s.b1_off() + i]);

    kern::matvec(params.subspan(s.w2_off(), s.b2_off() - s.w2_off()), t.hidden,
                 t.features, s.feature_dim, s.hidden_dim);
    for (int i = 0; i < s.feature_dim; ++i)
        t.features[i] = std::tanh(t.features[i] + p[s.b2_off() + i]);

    kern::matvec(params.subspan(s.w3_off(), s.b3_off() - s.w3_off()), t.features,
                 t.logits, s.num_classes, s.feature_dim);
    for (int i = 0; i < s.num_classes; ++i) t.logits[i] += p[s.b3_off() + i];
    return t;
}

// Accumulate the parameter gradient for one sample given dL/dlogits.
void backward_accumulate(const ModelShape& s, const ModelParams& p,
                         std::span<const double> x, const ForwardTrace& t,
                         std::span<const double> dlogits,
                         std::span<double> grad) {
    std::span<const double> params(p);

    // Head: gW3 += dlogits (x) features, gb3 += dlogits, dz = W3^T dlogits.
    kern::ger(1.0, dlogits, t.features,
              grad.subspan(s.w3_off(), s.b3_off() - s.w3_off()), s.num_classes,
              s.feature_dim);
    kern::axpy(1.0, dlogits, grad.subspan(s.b3_off(), s.num_classes));

    std::vector<double> dz(s.feature_dim);
    kern::matvec_t(params.subspan(s.w3_off(), s.b3_off() - s.w3_off()), dlogits,
                   dz, s.num_classes, s.feature_dim);
    for (int i = 0; i < s.feature_dim; ++i)
        dz[i] *= 1.0 - t.features[i] * t.features[i];  // tanh'

    kern::ger(1.0, dz, t.hidden, grad.subspan(s.w2_off(), s.b2_off() - s.w2_off()),
              s.feature_dim, s.hidden_dim);
    kern::axpy(1.0, dz, grad.subspan(s.b2_off(), s.feature_dim));

    std::vector<double> dh(s.hidden_dim);
    kern::matvec_t(params.subspan(s.w2_off(), s.b2_off() - s.w2_off()), dz, dh,
                   s.feature_dim, s.hidden_dim);
    for (int i = 0; i < s.hidden_dim; ++i)
        dh[i] *= 1.0 - t.hidden[i] * t.hidden[i];

    kern::ger(1.0, dh, x, grad.subspan(s.w1_off(), s.b1_off() - s.w1_off()),
              s.hidden_dim, s.input_dim);
    kern::axpy(1.0, dh, grad.subspan(s.b1_off(), s.hidden_dim));
}

LossValue loss_for_sample(const Sample& sample, std::span<const double> logits,
                          LossKind kind, const TrainAux& aux,
                          const std::vector<double>* teacher_logits) {
    switch (kind) {
        case LossKind::kCrossEntropy:
            return loss_ce(logits, sample.observed_label);
        case LossKind::kLogitAdjusted:
            if (!aux.margins)
                throw std::invalid_argument("LA loss requires margins");
            return loss_la(logits, *aux.margins, sample.observed_label);
        case LossKind::kLogitAdjustedKD:
            if (!aux.margins || !teacher_logits)
                throw std::invalid_argument("LA-KD loss requires margins and teacher");
            return loss_la_kd(logits, *aux.margins, *teacher_logits,
                              sample.observed_label, aux.kd);
    }
    throw std::logic_error("unknown loss kind");
}

}  // namespace

ForwardOutput forward(const ModelShape& shape, const ModelParams& params,
                      std::span<const double> input) {
    ForwardTrace t = forward_trace(shape, params, input);
    return {std::move(t.features), std::move(t.logits)};
}

std::vector<double> log_softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out = log_softmax(logits);
    for (double& v : out) v = std::exp(v);
    return out;
}

std::vector<double> class_priors(const ClientDataset& dataset, int num_classes) {
    if (dataset.samples.empty())
        throw std::invalid_argument("class_priors: empty dataset");
    std::vector<double> pi(num_classes, 0.0);
    for (const Sample& s : dataset.samples) pi[s.observed_label] += 1.0;
    const double n = static_cast<double>(dataset.samples.size());
    for (double& v : pi) v /= n;
    return pi;
}

std::vector<double> logit_adjustment(const std::vector<double>& priors,
                                     const LAConfig& la) {
    std::vector<double> m(priors.size());
    for (std::size_t c = 0; c < priors.size(); ++c)
        m[c] = la.beta * std::log(priors[c] + la.epsilon);
    return m;
}

LossValue loss_ce(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("loss_ce: label out of range");
    const std::vector<double> logp = log_softmax(logits);
    LossValue out;
    out.loss = -logp[label];
    out.grad_logits.resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c)
        out.grad_logits[c] = std::exp(logp[c]);
    out.grad_logits[label] -= 1.0;
    return out;
}

LossValue loss_la(std::span<const double> logits,
                  std::span<const double> margins, int label) {
    if (margins.size() != logits.size())
        throw std::invalid_argument("loss_la: margin dimension mismatch");
    std::vector<double> adjusted(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c)
        adjusted[c] = logits[c] + margins[c];
    return loss_ce(adjusted, label);
}

LossValue loss_la_kd(std::span<const double> student_logits,
                     std::span<const double> margins,
                     std::span<const double> teacher_logits, int label,
                     const KDConfig& kd) {
    const std::size_t c = student_logits.size();
    if (margins.size() != c || teacher_logits.size() != c)
        throw std::invalid_argument("loss_la_kd: dimension mismatch");
    if (label < 0 || label >= static_cast<int>(c))
        throw std::invalid_argument("loss_la_kd: label out of range");

    std::vector<double> adjusted(c);
    for (std::size_t i = 0; i < c; ++i) adjusted[i] = student_logits[i] + margins[i];
    const std::vector<double> logq = log_softmax(adjusted);

    std::vector<double> soft(c);
    for (std::size_t i = 0; i < c; ++i) soft[i] = teacher_logits[i] / kd.temperature;
    const std::vector<double> logp = log_softmax(soft);

    const double kd_scale =
        kd.scale_by_temp_sq ? kd.temperature * kd.temperature : 1.0;

    double kl = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double p = std::exp(logp[i]);
        kl += p * (logp[i] - logq[i]);
    }
    const double ce = -logq[label];

    LossValue out;
    out.loss = kd.kd_weight * kd_scale * kl + (1.0 - kd.kd_weight) * ce;
    out.grad_logits.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        const double q = std::exp(logq[i]);
        const double p = std::exp(logp[i]);
        double g = kd.kd_weight * kd_scale * (q - p) + (1.0 - kd.kd_weight) * q;
        if (static_cast<int>(i) == label) g -= (1.0 - kd.kd_weight);
        out.grad_logits[i] = g;
    }
    return out;
}

BatchGradient batch_gradient(const ModelShape& shape, const ModelParams& params,
                             const ClientDataset& dataset,
                             std::span<const int> indices, LossKind kind,
                             const TrainAux& aux) {
    BatchGradient out;
    out.grad.assign(shape.param_count(), 0.0);
    if (indices.empty()) return out;

    std::vector<double> teacher_logits;
    for (int idx : indices) {
        const Sample& sample = dataset.samples[idx];
        const ForwardTrace t = forward_trace(shape, params, sample.input);
        const std::vector<double>* teacher = nullptr;
        if (kind == LossKind::kLogitAdjustedKD) {
            if (!aux.teacher_params)
                throw std::invalid_argument("LA-KD requires teacher parameters");
            teacher_logits =
                forward(shape, *aux.teacher_params, sample.input).logits;
            teacher = &teacher_logits;
        }
        const LossValue lv = loss_for_sample(sample, t.logits, kind, aux, teacher);
        out.mean_loss += lv.loss;
        backward_accumulate(shape, params, sample.input, t, lv.grad_logits, out.grad);
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    out.mean_loss *= inv;
    kern::scal(inv, out.grad);
    return out;
}

ModelParams local_train(const ModelShape& shape, ModelParams params,
                        const ClientDataset& dataset,
                        const LocalTrainConfig& cfg, LossKind kind,
                        const TrainAux& aux) {
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cfg.learning_rate < 0.0)
        throw std::invalid_argument("learning_rate must be >= 0");
    if (dataset.samples.empty()) return params;

    const std::size_t n = dataset.samples.size();
    const int batch = std::max(1, std::min<int>(cfg.batch_size, static_cast<int>(n)));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.rng_seed, "local_train_shuffle");

    // Adam state lives for the duration of this call.
    std::vector<double> m, v;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    if (cfg.optimizer == Optimizer::kAdam) {
        m.assign(shape.param_count(), 0.0);
        v.assign(shape.param_count(), 0.0);
    }
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min<std::size_t>(batch, n - start);
            const BatchGradient bg = batch_gradient(
                shape, params, dataset,
                std::span<const int>(order.data() + start, count), kind, aux);
            ++step;
            if (cfg.optimizer == Optimizer::kAdam) {
                const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
                kern::adam_step(params, bg.grad, m, v, cfg.learning_rate, kBeta1,
                                kBeta2, kEps, cfg.weight_decay, bc1, bc2);
            } else {
                // SGD with L2 weight decay folded into the gradient.
                if (cfg.weight_decay != 0.0)
                    kern::axpy(-cfg.learning_rate * cfg.weight_decay, params, params);
                kern::axpy(-cfg.learning_rate, bg.grad, params);
            }
        }
    }
    return params;
}

double mean_loss(const ModelShape& shape, const ModelParams& params,
                 const ClientDataset& dataset, LossKind kind,
                 const TrainAux& aux) {
    if (dataset.samples.empty()) return 0.0;
    std::vector<int> all(dataset.samples.size());
    std::iota(all.begin(), all.end(), 0);
    // batch_gradient also returns the mean loss; reuse it.
    return batch_gradient(shape, params, dataset, all, kind, aux).mean_loss;
}

double evaluate_accuracy(const ModelShape& shape, const ModelParams& params,
                         const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const Sample& s : samples) {
        const ForwardOutput out = forward(shape, params, s.input);
        const int pred = static_cast<int>(
            std::max_element(out.logits.begin(), out.logits.end()) -
            out.logits.begin());
        if (pred == s.true_label) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace fedsir
