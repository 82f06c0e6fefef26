// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace metasel {

/// Dense row-major design matrix with a fixed number of columns.
class FeatureMatrix {
public:
    explicit FeatureMatrix(std::size_t dim = 0) : dim_(dim) {}

    void push_row(std::span<const double> row);
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    void reserve(std::size_t rows) { data_.reserve(rows * dim_); }

private:
    std::size_t dim_;
    std::vector<double> data_;
};

struct TrainConfig {
    int max_iters = 200;
    double grad_tol = 1e-6;
    double reg_inverse_strength = 1.0;  // C
    bool bias_penalized = false;

    void validate() const;
};

/// Diagnostics from the last fit; not part of the model's identity.
struct TrainInfo {
    int iterations = 0;
    bool converged = false;
    double final_objective = 0.0;
    double final_grad_norm = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_positive = 0;
    int gradient_fallbacks = 0;
};

struct LinearScorer {
    std::vector<double> theta;
    double bias = 0.0;
    std::vector<std::string> feature_names;
    TrainInfo info;

    std::size_t dim() const noexcept { return theta.size(); }

    /// θᵀf + b. Throws std::invalid_argument on dimension mismatch.
    double linear_score(std::span<const double> f) const;
};

/// σ(z) without overflow for large |z|.
double sigmoid(double z) noexcept;

/// ln(1 + e^x), stable for either sign.
double softplus(double x) noexcept;

double predict_proba(const LinearScorer& scorer, std::span<const double> f);

/// Balanced class weights: a sample of class c gets N / (2 n_c).
std::vector<double> balanced_weights(std::span<const int> labels);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> theta_grad;
    double bias_grad = 0.0;
};

/// Objective ½‖θ‖² + C Σ wᵢ·logloss(ℓᵢ, θᵀfᵢ + b) and its analytic gradient.
/// The bias joins the penalty only when config.bias_penalized is set.
LossGradient loss_and_gradient(const LinearScorer& scorer, const FeatureMatrix& features,
                               std::span<const int> labels, std::span<const double> weights,
                               const TrainConfig& config);

/// Full-batch Newton with backtracking line search from θ = 0, b = 0,
/// falling back to a gradient step when the Hessian is not positive definite.
/// `seed` is accepted for interface stability; the solver is deterministic.
LinearScorer fit_logistic(const FeatureMatrix& features, std::span<const int> labels,
                          std::span<const double> weights, const TrainConfig& config,
                          std::uint64_t seed = 0, std::vector<std::string> feature_names = {});

nlohmann::ordered_json scorer_to_json(const LinearScorer& scorer,
                                      const nlohmann::ordered_json& train_meta = {});
LinearScorer scorer_from_json(const nlohmann::json& j);

}  // namespace metasel
