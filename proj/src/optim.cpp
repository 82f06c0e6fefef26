// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metasel/common.hpp"

namespace metasel {

namespace {

/// In-place Cholesky solve of the n×n system H x = g. Returns false when H is
/// not (numerically) positive definite.
bool cholesky_solve(std::vector<double> h, std::vector<double>& x, std::size_t n) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(h[i * n + i]));
    const double floor = std::max(scale, 1.0) * 1e-12;
    for (std::size_t j = 0; j < n; ++j) {
        double d = h[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= h[j * n + k] * h[j * n + k];
        if (!(d > floor)) return false;
        d = std::sqrt(d);
        h[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = h[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= h[i * n + k] * h[j * n + k];
            h[i * n + j] = s / d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= h[i * n + k] * x[k];
        x[i] = s / h[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= h[k * n + i] * x[k];
        x[i] = s / h[i * n + i];
    }
    return true;
}

void check_inputs(const FeatureMatrix& features, std::span<const int> labels,
                  std::span<const double> weights) {
    if (labels.size() != features.rows() || weights.size() != features.rows()) {
        throw std::invalid_argument("logistic: features, labels and weights differ in length");
    }
    for (int l : labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("logistic: labels must be 0 or 1");
    }
}

}  // namespace

void FeatureMatrix::push_row(std::span<const double> row) {
    if (row.size() != dim_) throw std::invalid_argument("FeatureMatrix: row dimension mismatch");
    data_.insert(data_.end(), row.begin(), row.end());
}

void TrainConfig::validate() const {
    if (max_iters < 1) throw std::invalid_argument("TrainConfig: max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("TrainConfig: grad_tol must be > 0");
    if (!(reg_inverse_strength > 0.0)) throw std::invalid_argument("TrainConfig: C must be > 0");
}

double LinearScorer::linear_score(std::span<const double> f) const {
    if (f.size() != theta.size()) {
        throw std::invalid_argument("LinearScorer: feature dimension " + std::to_string(f.size()) +
                                    " != " + std::to_string(theta.size()));
    }
    double z = bias;
    for (std::size_t i = 0; i < f.size(); ++i) z += theta[i] * f[i];
    return z;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double x) noexcept {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double predict_proba(const LinearScorer& scorer, std::span<const double> f) {
    return sigmoid(scorer.linear_score(f));
}

std::vector<double> balanced_weights(std::span<const int> labels) {
    std::size_t counts[2] = {0, 0};
    for (int l : labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("balanced_weights: labels must be 0 or 1");
        ++counts[l];
    }
    if (counts[0] == 0 || counts[1] == 0) {
        throw Error("balanced_weights: meta-dataset contains a single class");
    }
    const double n = static_cast<double>(labels.size());
    const double w[2] = {n / (2.0 * static_cast<double>(counts[0])),
                         n / (2.0 * static_cast<double>(counts[1]))};
    std::vector<double> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(w[l]);
    return out;
}

LossGradient loss_and_gradient(const LinearScorer& scorer, const FeatureMatrix& features,
                               std::span<const int> labels, std::span<const double> weights,
                               const TrainConfig& config) {
    check_inputs(features, labels, weights);
    const std::size_t d = scorer.dim();
    if (features.dim() != d) throw std::invalid_argument("loss_and_gradient: dimension mismatch");

    LossGradient out;
    out.theta_grad.assign(d, 0.0);
    double data_loss = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto f = features.row(i);
        const double z = scorer.linear_score(f);
        data_loss += weights[i] * (labels[i] ? softplus(-z) : softplus(z));
        const double r = weights[i] * (sigmoid(z) - labels[i]);
        for (std::size_t j = 0; j < d; ++j) out.theta_grad[j] += r * f[j];
        out.bias_grad += r;
    }
    const double c = config.reg_inverse_strength;
    double reg = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        out.theta_grad[j] = c * out.theta_grad[j] + scorer.theta[j];
        reg += scorer.theta[j] * scorer.theta[j];
    }
    out.bias_grad *= c;
    if (config.bias_penalized) {
        out.bias_grad += scorer.bias;
        reg += scorer.bias * scorer.bias;
    }
    out.loss = 0.5 * reg + c * data_loss;
    return out;
}

LinearScorer fit_logistic(const FeatureMatrix& features, std::span<const int> labels,
                          std::span<const double> weights, const TrainConfig& config,
                          std::uint64_t /*seed*/, std::vector<std::string> feature_names) {
    config.validate();
    check_inputs(features, labels, weights);
    const std::size_t n = features.rows();
    const std::size_t d = features.dim();
    if (n < 2) throw Error("fit_logistic: need at least two samples");
    std::size_t positives = 0;
    for (int l : labels) positives += static_cast<std::size_t>(l);
    if (positives == 0 || positives == n) throw Error("fit_logistic: both classes must be present");
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : features.row(i)) {
            if (!std::isfinite(v)) throw Error("fit_logistic: non-finite feature in row " + std::to_string(i));
        }
        if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
            throw Error("fit_logistic: invalid sample weight in row " + std::to_string(i));
        }
    }
    if (!feature_names.empty() && feature_names.size() != d) {
        throw std::invalid_argument("fit_logistic: feature_names size mismatch");
    }

    LinearScorer s;
    s.theta.assign(d, 0.0);
    s.feature_names = std::move(feature_names);
    const std::size_t p = d + 1;
    const double c = config.reg_inverse_strength;

    auto grad_inf = [](const LossGradient& g) {
        double m = std::abs(g.bias_grad);
        for (double v : g.theta_grad) m = std::max(m, std::abs(v));
        return m;
    };

    auto lg = loss_and_gradient(s, features, labels, weights, config);
    if (!std::isfinite(lg.loss)) throw Error("fit_logistic: non-finite loss at iteration 0");

    int iter = 0;
    for (; iter < config.max_iters; ++iter) {
        if (grad_inf(lg) < config.grad_tol) {
            s.info.converged = true;
            break;
        }

        // Hessian over (θ, b): I_θ (+ I_b) + C Σ wᵢ σᵢ(1-σᵢ) x̃ᵢ x̃ᵢᵀ with x̃ = (f, 1).
        std::vector<double> h(p * p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto f = features.row(i);
            const double sz = sigmoid(s.linear_score(f));
            const double a = c * weights[i] * sz * (1.0 - sz);
            for (std::size_t r = 0; r < p; ++r) {
                const double xr = r < d ? f[r] : 1.0;
                for (std::size_t col = 0; col <= r; ++col) {
                    const double xc = col < d ? f[col] : 1.0;
                    h[r * p + col] += a * xr * xc;
                }
            }
        }
        for (std::size_t j = 0; j < d; ++j) h[j * p + j] += 1.0;
        if (config.bias_penalized) h[d * p + d] += 1.0;
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t col = r + 1; col < p; ++col) h[r * p + col] = h[col * p + r];
        }

        std::vector<double> grad(lg.theta_grad);
        grad.push_back(lg.bias_grad);
        std::vector<double> step(grad);
        if (!cholesky_solve(h, step, p)) {
            step = grad;
            ++s.info.gradient_fallbacks;
        }
        double slope = 0.0;  // directional derivative along -step
        for (std::size_t j = 0; j < p; ++j) slope -= grad[j] * step[j];

        // Armijo backtracking. Near the optimum the predicted decrease drops
        // below the objective's rounding error; a step whose change is lost in
        // rounding is then judged by whether it shrinks the gradient.
        const double rounding = 1e-12 * (1.0 + std::abs(lg.loss));
        bool accepted = false;
        double t = 1.0;
        for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
            LinearScorer trial = s;
            for (std::size_t j = 0; j < d; ++j) trial.theta[j] -= t * step[j];
            trial.bias -= t * step[d];
            auto trial_lg = loss_and_gradient(trial, features, labels, weights, config);
            if (!std::isfinite(trial_lg.loss)) {
                throw Error("fit_logistic: non-finite loss at iteration " + std::to_string(iter + 1));
            }
            const bool sufficient = trial_lg.loss < lg.loss + 1e-4 * t * slope;
            const bool flat = std::abs(trial_lg.loss - lg.loss) <= rounding && grad_inf(trial_lg) < grad_inf(lg);
            if (sufficient || flat) {
                s.theta = std::move(trial.theta);
                s.bias = trial.bias;
                lg = std::move(trial_lg);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no representable progress left
    }
    if (!s.info.converged && grad_inf(lg) < config.grad_tol) s.info.converged = true;

    s.info.iterations = iter;
    s.info.final_objective = lg.loss;
    s.info.final_grad_norm = grad_inf(lg);
    s.info.n_samples = n;
    s.info.n_positive = positives;
    return s;
}

nlohmann::ordered_json scorer_to_json(const LinearScorer& scorer,
                                      const nlohmann::ordered_json& train_meta) {
    nlohmann::ordered_json j;
    j["theta"] = scorer.theta;
    j["bias"] = scorer.bias;
    j["feature_names"] = scorer.feature_names;
    nlohmann::ordered_json meta = train_meta.is_object() ? train_meta : nlohmann::ordered_json::object();
    meta["iterations"] = scorer.info.iterations;
    meta["converged"] = scorer.info.converged;
    meta["final_objective"] = scorer.info.final_objective;
    meta["final_grad_norm"] = scorer.info.final_grad_norm;
    meta["n_samples"] = scorer.info.n_samples;
    meta["n_positive"] = scorer.info.n_positive;
    j["train_meta"] = std::move(meta);
    return j;
}

LinearScorer scorer_from_json(const nlohmann::json& j) {
    LinearScorer s;
    try {
        s.theta = j.at("theta").get<std::vector<double>>();
        s.bias = j.at("bias").get<double>();
        if (j.contains("feature_names")) s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (auto it = j.find("train_meta"); it != j.end() && it->is_object()) {
            s.info.iterations = it->value("iterations", 0);
            s.info.converged = it->value("converged", false);
            s.info.final_objective = it->value("final_objective", 0.0);
            s.info.final_grad_norm = it->value("final_grad_norm", 0.0);
            s.info.n_samples = it->value("n_samples", std::size_t{0});
            s.info.n_positive = it->value("n_positive", std::size_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("scorer JSON: ") + e.what());
    }
    if (!s.feature_names.empty() && s.feature_names.size() != s.theta.size()) {
        throw DataError("scorer JSON: feature_names and theta differ in length");
    }
    for (double v : s.theta) {
        if (!std::isfinite(v)) throw DataError("scorer JSON: non-finite weight");
    }
    if (!std::isfinite(s.bias)) throw DataError("scorer JSON: non-finite bias");
    return s;
}

}  // namespace metasel
