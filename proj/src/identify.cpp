#include "fedsir/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsir/rng.hpp"

namespace fedsir {

namespace {

constexpr double kCovRegFrac = 1e-2;  // per-axis prior scale, relative
constexpr double kCovRegAbs = 1e-8;   // absolute floor for degenerate inputs
constexpr double kMeanPull = 1e-2;    // pseudo-count pulling means to m0
constexpr double kPriorDof = 4.0;     // inverse-Wishart degrees of freedom
constexpr double kLLTol = 1e-8;       // EM stops when the gain drops below
constexpr int kMaxIters = 200;
constexpr int kRandomRestarts = 3;    // seeded inits tried besides the split

double log_gauss2(const GmmComponent& comp, double x, double y) {
    double a = comp.cov[0];
    double b = comp.cov[1];
    double d = comp.cov[3];
    double det = a * d - b * b;
    // Regularization keeps det positive, but guard against pathological input.
    if (det <= 0.0) det = std::numeric_limits<double>::min();
    double dx = x - comp.mean[0];
    double dy = y - comp.mean[1];
    double quad = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

double log_sum_exp(double a, double b) {
    double hi = std::max(a, b);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

}  // namespace

std::array<double, 2> GmmModel::responsibilities(double x, double y) const {
    double l0 = std::log(components[0].weight) + log_gauss2(components[0], x, y);
    double l1 = std::log(components[1].weight) + log_gauss2(components[1], x, y);
    double norm = log_sum_exp(l0, l1);
    return {std::exp(l0 - norm), std::exp(l1 - norm)};
}

namespace {

// Log density of the normal-inverse-Wishart prior at a component, up to an
// additive constant shared by every evaluation. psix and psiy are the
// diagonal of the inverse-Wishart scale; (mx, my) centers the mean prior.
double log_prior(const GmmComponent& comp, double mx, double my, double psix,
                 double psiy) {
    double a = comp.cov[0];
    double b = comp.cov[1];
    double d = comp.cov[3];
    double det = a * d - b * b;
    if (det <= 0.0) det = std::numeric_limits<double>::min();
    double trace_term = (psix * d + psiy * a) / det;
    double dx = comp.mean[0] - mx;
    double dy = comp.mean[1] - my;
    double quad = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    return -0.5 * ((kPriorDof + 4.0) * std::log(det) + trace_term +
                   kMeanPull * quad);
}

// One EM run from the given initial model, fit as a MAP estimate under a
// normal-inverse-Wishart prior per component, centered on the global mean
// with diagonal scale (psix, psiy). The prior scatter is folded into every
// covariance update, which bounds how thin a component can get and keeps
// near-collinear point sets from being swallowed by a single degenerate
// component. Because the M-step maximizes the penalized objective exactly,
// the traced objective never decreases.
GmmModel run_em(const std::vector<std::array<double, 2>>& points,
                GmmModel model, double mx, double my, double psix, double psiy,
                std::vector<double>& trace) {
    std::size_t n = points.size();
    std::vector<std::array<double, 2>> resp(n);
    double prev_obj = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= kMaxIters; ++iter) {
        // E-step, accumulating the observed-data log likelihood.
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double l0 = std::log(model.components[0].weight) +
                        log_gauss2(model.components[0], points[i][0], points[i][1]);
            double l1 = std::log(model.components[1].weight) +
                        log_gauss2(model.components[1], points[i][0], points[i][1]);
            double norm = log_sum_exp(l0, l1);
            resp[i] = {std::exp(l0 - norm), std::exp(l1 - norm)};
            ll += norm;
        }
        double obj = ll + log_prior(model.components[0], mx, my, psix, psiy) +
                     log_prior(model.components[1], mx, my, psix, psiy);
        model.log_likelihood = obj;
        model.iterations = iter;
        trace.push_back(obj);

        // M-step: exact maximizer of the expected penalized log likelihood.
        for (int k = 0; k < 2; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i][k];
            GmmComponent& comp = model.components[k];
            comp.weight = nk / static_cast<double>(n);
            double sx = 0.0;
            double sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sx += resp[i][k] * points[i][0];
                sy += resp[i][k] * points[i][1];
            }
            // A component that loses all mass settles at the prior mode.
            comp.mean = {(sx + kMeanPull * mx) / (nk + kMeanPull),
                         (sy + kMeanPull * my) / (nk + kMeanPull)};
            double cxx = psix;
            double cxy = 0.0;
            double cyy = psiy;
            for (std::size_t i = 0; i < n; ++i) {
                double dx = points[i][0] - comp.mean[0];
                double dy = points[i][1] - comp.mean[1];
                cxx += resp[i][k] * dx * dx;
                cxy += resp[i][k] * dx * dy;
                cyy += resp[i][k] * dy * dy;
            }
            double dx = comp.mean[0] - mx;
            double dy = comp.mean[1] - my;
            cxx += kMeanPull * dx * dx;
            cxy += kMeanPull * dx * dy;
            cyy += kMeanPull * dy * dy;
            double denom = nk + kPriorDof + 4.0;
            comp.cov = {cxx / denom, cxy / denom, cxy / denom, cyy / denom};
        }

        if (obj - prev_obj < kLLTol && iter > 1) break;
        prev_obj = obj;
    }
    return model;
}

// Moment-matched component over a subset of points, with ridged variances.
GmmComponent subset_component(const std::vector<std::array<double, 2>>& points,
                              std::size_t begin, std::size_t end,
                              std::size_t n_total, double regx, double regy) {
    GmmComponent comp;
    double cnt = static_cast<double>(end - begin);
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        sx += points[i][0];
        sy += points[i][1];
    }
    comp.mean = {sx / cnt, sy / cnt};
    double vx = 0.0;
    double vy = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        double dx = points[i][0] - comp.mean[0];
        double dy = points[i][1] - comp.mean[1];
        vx += dx * dx;
        vy += dy * dy;
    }
    comp.cov = {vx / cnt + regx, 0.0, 0.0, vy / cnt + regy};
    comp.weight = cnt / static_cast<double>(n_total);
    return comp;
}

}  // namespace

GmmModel fit_gmm_2(const std::vector<std::array<double, 2>>& points,
                   std::uint64_t seed, std::vector<double>* ll_trace) {
    std::size_t n = points.size();
    if (n < 2) throw std::invalid_argument("gmm fit needs at least two points");

    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) { mx += p[0]; my += p[1]; }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0;
    double vy = 0.0;
    for (const auto& p : points) {
        double dx = p[0] - mx;
        double dy = p[1] - my;
        vx += dx * dx;
        vy += dy * dy;
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    double regx = std::max(kCovRegFrac * vx, kCovRegAbs);
    double regy = std::max(kCovRegFrac * vy, kCovRegAbs);
    // Prior scale such that a component with no mass settles at exactly
    // (regx, regy) variance.
    double psix = (kPriorDof + 4.0) * regx;
    double psiy = (kPriorDof + 4.0) * regy;

    // Candidate 1: split the points at the median of the first coordinate
    // and moment-match a component to each half.
    std::vector<std::array<double, 2>> sorted = points;
    std::sort(sorted.begin(), sorted.end(),
              [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
                  return a[0] < b[0];
              });
    GmmModel best;
    std::vector<double> best_trace;
    {
        GmmModel init;
        init.components[0] = subset_component(sorted, 0, n / 2, n, regx, regy);
        init.components[1] = subset_component(sorted, n / 2, n, n, regx, regy);
        std::vector<double> trace;
        best = run_em(points, init, mx, my, psix, psiy, trace);
        best_trace = std::move(trace);
    }

    // Further candidates: k-means++ style seeding, first center uniform,
    // second proportional to squared distance from the first.
    auto rng = make_rng(seed, "gmm_init");
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int restart = 0; restart < kRandomRestarts; ++restart) {
        std::size_t i0 = pick(rng);
        std::vector<double> d2(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dx = points[i][0] - points[i0][0];
            double dy = points[i][1] - points[i0][1];
            d2[i] = dx * dx + dy * dy;
            total += d2[i];
        }
        std::size_t i1 = i0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) { i1 = i; break; }
            }
        } else {
            // All points coincide; any distinct index keeps the loop well-formed.
            i1 = (i0 + 1) % n;
        }
        GmmModel init;
        init.components[0].mean = points[i0];
        init.components[1].mean = points[i1];
        for (auto& comp : init.components) {
            comp.weight = 0.5;
            comp.cov = {vx + regx, 0.0, 0.0, vy + regy};
        }
        std::vector<double> trace;
        GmmModel model = run_em(points, init, mx, my, psix, psiy, trace);
        if (model.log_likelihood > best.log_likelihood) {
            best = model;
            best_trace = std::move(trace);
        }
    }

    if (ll_trace != nullptr) {
        ll_trace->insert(ll_trace->end(), best_trace.begin(), best_trace.end());
    }
    return best;
}

std::vector<std::array<double, 2>> stats_points(
    const std::vector<ClientSpectralStats>& stats) {
    std::vector<std::array<double, 2>> points;
    for (const auto& s : stats) {
        if (s.valid) points.push_back({s.mu, s.energy});
    }
    return points;
}

ClientPartition partition_clients(const std::vector<ClientSpectralStats>& stats,
                                  const GmmModel& gmm,
                                  const IdentifyOptions& opts) {
    std::vector<std::array<double, 2>> points;
    std::vector<int> ids;
    ClientPartition part;
    for (const auto& s : stats) {
        if (s.valid) {
            points.push_back({s.mu, s.energy});
            ids.push_back(s.client_id);
        } else {
            part.excluded.push_back(s.client_id);
        }
    }
    if (points.size() < 2) {
        throw std::invalid_argument(
            "client partition needs at least two clients with spectral stats");
    }

    part.model = gmm;
    int clean_comp =
        part.model.components[0].mean[0] <= part.model.components[1].mean[0] ? 0
                                                                             : 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto r = part.model.responsibilities(points[i][0], points[i][1]);
        bool is_clean = (r[clean_comp] >= r[1 - clean_comp]);
        (is_clean ? part.clean : part.noisy).push_back(ids[i]);
    }
    for (int id : part.excluded) {
        (opts.excluded_as_clean ? part.clean : part.noisy).push_back(id);
    }
    std::sort(part.clean.begin(), part.clean.end());
    std::sort(part.noisy.begin(), part.noisy.end());
    std::sort(part.excluded.begin(), part.excluded.end());

    if (part.clean.empty()) {
        throw std::runtime_error("no clean clients identified");
    }
    return part;
}

}  // namespace fedsir
