// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metasel/corpus.hpp"
#include "metasel/llm.hpp"
#include "metasel/prompt.hpp"
#include "metasel/selectors.hpp"

namespace metasel {

struct RunConfig {
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::string dataset_name;  // defaults to the train file stem
    SelectorKind selector = SelectorKind::meta_sel;
    SelectorParams params;
    std::size_t k = 5;
    BackendConfig backend;
    std::optional<PromptMode> prompt_mode;  // unset: the selector's own mode
    std::vector<std::uint64_t> seeds{42, 43, 44};
    std::size_t challenge_size = 1000;  // 0 evaluates the test file as-is
    std::uint64_t challenge_seed = 42;
    std::filesystem::path output_dir;   // empty: nothing written
    bool trace = false;
    std::size_t checkpoint_every = 50;
    std::size_t max_queries = 0;        // 0: every query

    void validate() const;
    PromptMode effective_prompt_mode() const noexcept;

    nlohmann::ordered_json to_json() const;
    /// Relative paths in `j` resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig from_file(const std::filesystem::path& path);
};

struct QueryTrace {
    std::size_t query_id = 0;
    std::string query_label;
    std::vector<std::size_t> demo_ids;
    std::vector<double> scores;
    std::optional<std::string> predicted;
    bool correct = false;
    std::size_t matches = 0;  // demos sharing the query label
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::size_t n_queries = 0;
    std::size_t n_correct = 0;
    std::size_t rejections = 0;
    double accuracy = 0.0;
    double agreement = 0.0;
    double mean_latency_ms = 0.0;  // selection call only
    double offline_seconds = 0.0;
    nlohmann::ordered_json selector_state;  // exported weights/tables
    std::vector<QueryTrace> trace;
};

struct Report {
    std::string method;
    std::string dataset;
    std::string model;
    std::size_t k = 0;
    std::vector<SeedResult> seeds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population std over seeds
    double mean_agreement = 0.0;
    double mean_latency_ms = 0.0;
    std::size_t rejections = 0;
    nlohmann::ordered_json config;

    /// Deterministic content: no wall-clock fields.
    nlohmann::ordered_json to_json(bool include_trace = true) const;
    /// Latency and offline timings, kept apart so report.json is reproducible.
    nlohmann::ordered_json timing_json() const;
    /// One row per seed: method,dataset,model,seed,k,accuracy,agreement,rejections.
    std::string to_csv(bool header = true) const;
};

/// Arithmetic mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// Evaluates one selector over `queries` for every seed in `cfg.seeds`.
/// Paths and challenge settings in `cfg` are ignored; nothing is written.
Report run_experiment(const RunConfig& cfg, const Dataset& train, const Dataset& queries);

/// Loads datasets, draws the challenge subset, runs, and writes report.json,
/// timing.json, results.csv and manifest.json under cfg.output_dir. With an
/// output directory, progress is checkpointed every cfg.checkpoint_every
/// queries and an interrupted run resumes from its checkpoint.
Report run_experiment(const RunConfig& cfg);

/// Mean over queries of (demos sharing the query label) / k. Online selectors
/// are fed reward 1 whenever at least one demo matches.
double label_agreement_at_k(SelectorKind kind, const SelectorParams& params, const Dataset& train,
                            const Dataset& queries, std::size_t k, std::uint64_t seed);

enum class SweepKind { k_values, meta_sizes };

struct MetaSize {
    std::string name;
    std::size_t n_queries = 0;
    std::size_t n_candidates = 0;  // both 0: similarity-only scorer, no training
};

std::vector<std::size_t> default_k_values();
std::vector<MetaSize> default_meta_sizes();

struct AblationPoint {
    std::string setting;
    Report report;
};

std::vector<AblationPoint> ablation_sweep(const RunConfig& cfg, const Dataset& train, const Dataset& queries,
                                          SweepKind sweep, std::span<const std::size_t> k_values = {},
                                          std::span<const MetaSize> meta_sizes = {});
/// File-backed sweep writing ablation.json and ablation.csv.
std::vector<AblationPoint> ablation_sweep(const RunConfig& cfg, SweepKind sweep,
                                          std::span<const std::size_t> k_values = {},
                                          std::span<const MetaSize> meta_sizes = {});
std::string ablation_csv(std::span<const AblationPoint> points);

struct WeightRecord {
    std::string dataset;
    std::uint64_t seed = 0;
    double w_sim = 0.0;
    double w_len = 0.0;
    double intercept = 0.0;
};

struct WeightSummary {
    std::string dataset;
    double w_sim_mean = 0.0, w_sim_std = 0.0;
    double w_len_mean = 0.0, w_len_std = 0.0;
    double intercept_mean = 0.0, intercept_std = 0.0;
};

struct WeightTable {
    std::vector<WeightRecord> records;
    std::vector<WeightSummary> summary;  // one per dataset, first-seen order

    nlohmann::ordered_json to_json() const;
    std::string to_csv() const;
};

/// Weights by feature name, whatever column order the model was trained in.
WeightRecord weight_record(const MetaSelModel& model, std::string dataset, std::uint64_t seed);
WeightTable export_weights(std::vector<WeightRecord> records);
/// Trains one model per (dataset, seed) and tabulates its weights.
WeightTable export_weights(std::span<const Dataset> datasets, std::span<const std::uint64_t> seeds,
                           const MetaConfig& meta_cfg = {}, const TrainConfig& train_cfg = {});

}  // namespace metasel
