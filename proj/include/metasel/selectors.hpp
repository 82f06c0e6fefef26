// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metasel/common.hpp"
#include "metasel/corpus.hpp"
#include "metasel/metasel.hpp"
#include "metasel/prompt.hpp"
#include "metasel/vectorize.hpp"

namespace metasel {

enum class SelectorKind {
    random,
    icl,
    zero_shot_cot,
    few_shot_cot,
    diversity,
    uncertainty,
    influence,
    ts_bandit,
    rdes,
    reinforce,
    a2c,
    meta_sel,
};

std::string_view to_string(SelectorKind kind) noexcept;
SelectorKind selector_kind_from_string(std::string_view name);
std::span<const SelectorKind> all_selector_kinds() noexcept;

/// Online selectors learn from correctness feedback during evaluation.
bool is_online(SelectorKind kind) noexcept;
PromptMode prompt_mode_for(SelectorKind kind) noexcept;

/// Training pool with the TF-IDF embedding every similarity-based method
/// shares.
struct CandidatePool {
    Dataset examples;
    Vectorizer vectorizer;
    PoolMatrix matrix;
    std::vector<double> label_prior;  // n_y / N per example's label, aligned with examples

    static std::shared_ptr<const CandidatePool> build(const Dataset& train);
    std::size_t size() const noexcept { return examples.size(); }
};

/// (sim, len_ratio) of every pool candidate against `query_text`.
std::vector<FeatureVector> query_features(const CandidatePool& pool, std::string_view query_text);

// ---------------------------------------------------------------------------
// Offline baselines

/// Uniform k-subset drawn from a stream keyed by (seed, query_index).
SelectionResult random_select(std::size_t pool_size, std::size_t k, std::uint64_t seed,
                              std::size_t query_index);

struct KMeansConfig {
    int max_iters = 100;
    int restarts = 3;
};

/// K-Means (k-means++ seeding) over the pool's TF-IDF rows, then the nearest
/// unused example to each centroid by cosine. When the pool has fewer than k
/// distinct vectors the remainder is filled farthest-first.
SelectionResult diversity_select(const CandidatePool& pool, std::size_t k, std::uint64_t seed,
                                 const KMeansConfig& cfg = {});

/// Shannon entropy (nats) of each candidate's similarity-weighted label
/// distribution over its m most similar other examples.
std::vector<double> neighbor_label_entropy(const CandidatePool& pool, std::size_t m_neighbors);

/// Top-k candidates by neighbor_label_entropy, ties by id.
SelectionResult uncertainty_select(const CandidatePool& pool, std::size_t k, std::size_t m_neighbors = 20);

/// score(c) = cos(query, c) · n_{y_c} / N.
SelectionResult influence_select(const CandidatePool& pool, std::string_view query_text, std::size_t k);

// ---------------------------------------------------------------------------
// Online baselines

/// Thompson sampling with one Beta(α, β) arm per candidate.
struct BanditState {
    std::vector<double> alpha;
    std::vector<double> beta;

    explicit BanditState(std::size_t n_arms = 0) : alpha(n_arms, 1.0), beta(n_arms, 1.0) {}
};

SelectionResult bandit_step(const BanditState& state, std::size_t k, Rng& rng);
void bandit_update(BanditState& state, std::span<const std::size_t> selected_ids, int reward);

struct QConfig {
    double learning_rate = 0.1;
    double discount = 0.9;
    double epsilon_max = 0.9;
    double epsilon_min = 0.1;
    double epsilon_decay = 0.001;
    double diversity_weight = 0.5;     // λ
    double diversity_threshold = 0.5;  // θ_div

    /// λ = 0, θ_div = 0: the accuracy-only variant.
    static QConfig reinforce() {
        QConfig c;
        c.diversity_weight = 0.0;
        c.diversity_threshold = 0.0;
        return c;
    }
};

/// Context-free Q table over candidates with an exponentially decaying ε.
struct QState {
    QConfig config;
    std::vector<double> q;
    std::uint64_t step = 0;

    QState() = default;
    QState(std::size_t n_arms, QConfig cfg) : config(cfg), q(n_arms, 0.0) {}

    /// ε_min + (ε_max − ε_min)·exp(−decay·step).
    double epsilon() const noexcept;
};

/// Fraction of selected pairs whose cosine is below `threshold` (0 for k < 2).
double diversity_fraction(const CandidatePool& pool, std::span<const std::size_t> ids, double threshold);

SelectionResult q_select(const QState& state, std::size_t k, Rng& rng);

/// Applies Q ← Q + lr·(r + γ·max Q − Q) to every selected arm with
/// r = accuracy_reward + λ·diversity_fraction. Returns r.
double q_update(QState& state, const CandidatePool& pool, std::span<const std::size_t> selected_ids,
                int accuracy_reward);

struct A2CConfig {
    double actor_lr = 0.01;
    double critic_lr = 0.005;
    double entropy_coef = 0.01;
};

/// Linear softmax actor over candidate features and a linear critic on the
/// mean selected feature vector.
struct ActorCriticState {
    A2CConfig config;
    std::array<double, 2> actor{0.0, 0.0};
    std::array<double, 3> critic{0.0, 0.0, 0.0};  // weights on (sim, len_ratio), then bias
    std::uint64_t updates = 0;

    /// Softmax policy over `features`.
    std::vector<double> policy(std::span<const FeatureVector> features) const;
    double value(std::span<const FeatureVector> features, std::span<const std::size_t> ids) const;
};

/// Samples k distinct candidates by repeated softmax draws over the remainder.
/// demo_ids keep the sampling order; scores are left empty.
SelectionResult a2c_step(const ActorCriticState& state, std::span<const FeatureVector> features,
                         std::size_t k, Rng& rng);
SelectionResult a2c_step(const ActorCriticState& state, const CandidatePool& pool,
                         std::string_view query_text, std::size_t k, Rng& rng);

/// One actor-critic update for the sequence `selected_ids` (sampling order).
/// Returns the advantage used.
double a2c_update(ActorCriticState& state, std::span<const FeatureVector> query_features,
                  std::span<const std::size_t> selected_ids, double reward);

// ---------------------------------------------------------------------------
// Uniform selector interface

struct SelectorParams {
    std::size_t uncertainty_neighbors = 20;
    KMeansConfig kmeans;
    QConfig rdes;
    QConfig reinforce = QConfig::reinforce();
    A2CConfig a2c;
    MetaConfig meta;
    TrainConfig train;
    SelectOptions select;
    /// When set, Meta-Sel skips training and scores with this model
    /// (e.g. θ = (1, 0), b = 0 for similarity-only ranking).
    std::optional<LinearScorer> fixed_scorer;

    nlohmann::ordered_json to_json() const;
    static SelectorParams from_json(const nlohmann::json& j);
};

struct QueryContext {
    std::string_view text;
    std::size_t index = 0;
};

class Selector {
public:
    virtual ~Selector() = default;

    virtual SelectorKind kind() const noexcept = 0;
    virtual SelectionResult select(const QueryContext& query, std::size_t k) = 0;

    /// Correctness feedback for the previous select(); ignored by offline selectors.
    virtual void update(const QueryContext& query, const SelectionResult& selection, int reward) {
        (void)query, (void)selection, (void)reward;
    }

    virtual nlohmann::ordered_json export_state() const { return nlohmann::ordered_json::object(); }

    /// Trained model for meta_sel, nullptr for every other kind.
    virtual const MetaSelModel* model() const noexcept { return nullptr; }
};

std::unique_ptr<Selector> make_selector(SelectorKind kind, const SelectorParams& params,
                                        std::shared_ptr<const CandidatePool> pool, std::uint64_t seed);

}  // namespace metasel
