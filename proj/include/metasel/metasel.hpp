// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/corpus.hpp"
#include "metasel/optim.hpp"
#include "metasel/vectorize.hpp"

namespace metasel {

/// Meta-features of a (candidate, query) pair.
struct FeatureVector {
    static constexpr std::size_t kDim = 2;

    double sim = 0.0;        // TF-IDF cosine in [0, 1]
    double len_ratio = 0.0;  // |candidate| / max(1, |query|), code points

    /// Only an empty candidate text produces a zero length ratio.
    bool degenerate() const noexcept { return len_ratio == 0.0; }

    bool operator==(const FeatureVector&) const = default;
};

enum class Feature { sim, len_ratio };

/// Column order used to lay features out for the scorer.
using FeatureOrder = std::array<Feature, FeatureVector::kDim>;
inline constexpr FeatureOrder kDefaultFeatureOrder = {Feature::sim, Feature::len_ratio};

std::string_view feature_name(Feature f) noexcept;
std::array<double, FeatureVector::kDim> feature_row(const FeatureVector& f, const FeatureOrder& order) noexcept;

/// |candidate| / max(1, |query|) with lengths in code points.
double length_ratio(std::string_view candidate, std::string_view query) noexcept;

FeatureVector meta_features(const Example& query, const Example& candidate, const Vectorizer& vec);

struct MetaPair {
    std::size_t query_id = 0;
    std::size_t candidate_id = 0;
    FeatureVector features;
    int meta_label = 0;
};

/// |Q|·|C| pairs, queries outer and candidates inner; self-pairs are kept.
std::vector<MetaPair> build_meta_dataset(const Dataset& dataset, const MetaSplit& split,
                                         const Vectorizer& vec);

struct MetaConfig {
    std::size_t n_queries = 60;
    std::size_t n_candidates = 300;
    FeatureOrder feature_order = kDefaultFeatureOrder;
};

struct SelectionResult {
    std::vector<std::size_t> demo_ids;  // best first
    std::vector<double> scores;         // aligned with demo_ids; empty for unscored selectors
    std::chrono::nanoseconds selection_latency{0};
};

struct SelectOptions {
    /// Drop candidates whose text equals the query text exactly.
    bool exclude_exact_match = false;
};

/// A trained selector over a fixed candidate pool.
struct MetaSelModel {
    Vectorizer vectorizer;
    PoolMatrix pool;
    LinearScorer scorer;
    Dataset pool_examples;
    MetaConfig meta_config;
    TrainConfig train_config;
    std::uint64_t seed = 0;
    std::size_t meta_pairs = 0;
    double offline_seconds = 0.0;  // wall time; never persisted

    /// Scorer built by hand (used for the similarity-only ablation).
    static MetaSelModel from_parts(const Dataset& train, LinearScorer scorer,
                                   FeatureOrder order = kDefaultFeatureOrder);

    /// Weight of a named feature in the scorer.
    double weight(Feature f) const;

    /// Linear scores θᵀf + b for every pool row against `query_text`.
    std::vector<double> linear_scores(std::string_view query_text) const;
};

MetaSelModel train_metasel(const Dataset& train, const MetaConfig& meta_cfg,
                           const TrainConfig& train_cfg, std::uint64_t seed);

/// Top-k pool candidates by s_c = σ(θᵀf + b). Candidates are ordered by the
/// linear score (σ is monotone) with ties broken by ascending id.
SelectionResult select(const MetaSelModel& model, std::string_view query_text, std::size_t k,
                       const SelectOptions& options = {});

/// Indices of the k largest `scores`, descending, ties by ascending index.
/// Entries flagged in `excluded` are skipped.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k,
                                       std::span<const std::uint8_t> excluded = {});

/// Model bundle: "MSELBNDL" magic, version, length-prefixed JSON (scorer,
/// vectorizer, pool examples, configs) followed by the binary pool cache.
void save_model(const MetaSelModel& model, const std::filesystem::path& path);
MetaSelModel load_model(const std::filesystem::path& path);
std::string serialize_model(const MetaSelModel& model);
MetaSelModel deserialize_model(const std::string& bytes);

}  // namespace metasel
