// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/common.hpp"

namespace metasel {

enum class BackendKind { http, oracle_one_match, oracle_noisy };

std::string_view to_string(BackendKind kind) noexcept;
BackendKind backend_kind_from_string(std::string_view name);

/// Environment variable that overrides BackendConfig::endpoint.
inline constexpr const char* kEndpointEnv = "METASEL_LLM_ENDPOINT";

struct BackendConfig {
    BackendKind kind = BackendKind::oracle_one_match;
    std::string endpoint = "http://localhost:11434";
    std::string model = "qwen3:8b";
    double temperature = 0.0;  // fixed; anything else is rejected
    double timeout_s = 120.0;
    int max_attempts = 3;      // total requests per prompt, first try included
    double backoff_s = 0.5;    // doubled after each failed attempt
    double noise = 0.0;        // oracle_noisy only
    std::size_t max_in_flight = 4;

    void validate() const;

    /// Copy with the endpoint replaced by $METASEL_LLM_ENDPOINT when set.
    BackendConfig with_env_overrides() const;
};

/// Exact request body for POST {endpoint}/api/generate.
std::string generate_request_body(std::string_view model, std::string_view prompt);

/// Sends one non-streaming generate request and returns its "response"
/// field. 5xx statuses and transport errors are retried with exponential
/// backoff; other non-2xx statuses fail immediately. Throws BackendError.
std::string http_generate(const BackendConfig& cfg, std::string_view prompt);

struct OracleModel {
    double noise = 0.0;  // ρ: chance of a uniformly random wrong label when a demo matches
};

/// One-match-suffices oracle. A demo sharing the query label yields the query
/// label (a random wrong label with probability ρ); otherwise the majority
/// demo label, ties to the lexicographically smallest. No demos → nullopt.
std::optional<std::string> oracle_predict(const OracleModel& oracle, const std::string& query_label,
                                          std::span<const std::string> demo_labels,
                                          std::span<const std::string> vocabulary, Rng& rng);

/// 1 − Π(1 − p_c).
double success_probability(std::span<const double> match_probs);

/// Maps free-form model output onto a vocabulary label, or nullopt.
std::optional<std::string> parse_label(std::string_view raw, std::span<const std::string> vocabulary);

/// Everything a backend may look at for one query.
struct PredictionRequest {
    std::string_view prompt;
    std::string_view query_label;
    std::vector<std::string> demo_labels;
    std::span<const std::string> vocabulary;
    std::uint64_t stream_seed = 0;
};

struct Prediction {
    std::optional<std::string> label;  // nullopt = rejected
    std::string raw;
};

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict(const PredictionRequest& request) = 0;
    /// Whether predict() may be called from several threads at once.
    virtual bool concurrent() const noexcept { return false; }
    virtual std::string describe() const = 0;
};

std::unique_ptr<Predictor> make_predictor(const BackendConfig& cfg);

}  // namespace metasel
