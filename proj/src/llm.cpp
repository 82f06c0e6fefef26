// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace metasel {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw BackendError("endpoint must start with http://: " + url);
    if (url.compare(0, scheme_end, "http") != 0) {
        throw BackendError("only http endpoints are supported: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) e.prefix = url.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    return e;
}

bool is_punct_or_space(unsigned char c) {
    return std::isspace(c) || (std::ispunct(c) && c != '_');
}

/// Lowercase; '_', '-' and whitespace runs become one space; punctuation
/// trimmed from both ends.
std::string normalize_label_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (c == '_' || c == '-' || std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    std::size_t b = 0, e = out.size();
    while (b < e && is_punct_or_space(static_cast<unsigned char>(out[b]))) ++b;
    while (e > b && is_punct_or_space(static_cast<unsigned char>(out[e - 1]))) --e;
    return out.substr(b, e - b);
}

class OraclePredictor final : public Predictor {
public:
    explicit OraclePredictor(OracleModel model) : model_(model) {}

    Prediction predict(const PredictionRequest& req) override {
        Rng rng(req.stream_seed);
        Prediction p;
        p.label = oracle_predict(model_, std::string(req.query_label), req.demo_labels, req.vocabulary, rng);
        p.raw = p.label ? "Intent: " + *p.label : "";
        return p;
    }
    bool concurrent() const noexcept override { return true; }
    std::string describe() const override {
        return model_.noise == 0.0 ? "oracle_one_match" : "oracle_noisy(" + std::to_string(model_.noise) + ")";
    }

private:
    OracleModel model_;
};

class HttpPredictor final : public Predictor {
public:
    explicit HttpPredictor(BackendConfig cfg) : cfg_(std::move(cfg)) {}

    Prediction predict(const PredictionRequest& req) override {
        Prediction p;
        p.raw = http_generate(cfg_, req.prompt);
        p.label = parse_label(p.raw, req.vocabulary);
        return p;
    }
    bool concurrent() const noexcept override { return true; }
    std::string describe() const override { return "http:" + cfg_.model; }

private:
    BackendConfig cfg_;
};

}  // namespace

std::string_view to_string(BackendKind kind) noexcept {
    switch (kind) {
    case BackendKind::http: return "http";
    case BackendKind::oracle_one_match: return "oracle_one_match";
    case BackendKind::oracle_noisy: return "oracle_noisy";
    }
    return "http";
}

BackendKind backend_kind_from_string(std::string_view name) {
    if (name == "http") return BackendKind::http;
    if (name == "oracle_one_match" || name == "oracle") return BackendKind::oracle_one_match;
    if (name == "oracle_noisy") return BackendKind::oracle_noisy;
    throw std::invalid_argument("unknown backend kind '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
    if (temperature != 0.0) throw std::invalid_argument("backend: temperature must be 0");
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("backend: noise must lie in [0, 1]");
    if (kind == BackendKind::oracle_one_match && noise != 0.0) {
        throw std::invalid_argument("backend: oracle_one_match has no noise; use oracle_noisy");
    }
    if (max_attempts < 1) throw std::invalid_argument("backend: max_attempts must be >= 1");
    if (!(timeout_s > 0.0)) throw std::invalid_argument("backend: timeout must be positive");
    if (backoff_s < 0.0) throw std::invalid_argument("backend: backoff must be non-negative");
    if (max_in_flight < 1) throw std::invalid_argument("backend: max_in_flight must be >= 1");
    if (kind == BackendKind::http && model.empty()) throw std::invalid_argument("backend: model name required");
}

BackendConfig BackendConfig::with_env_overrides() const {
    BackendConfig out = *this;
    if (const char* env = std::getenv(kEndpointEnv); env && *env) out.endpoint = env;
    return out;
}

std::string generate_request_body(std::string_view model, std::string_view prompt) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["prompt"] = prompt;
    body["stream"] = false;
    body["options"] = {{"temperature", 0}};
    return body.dump();
}

std::string http_generate(const BackendConfig& cfg, std::string_view prompt) {
    const auto ep = split_endpoint(cfg.endpoint);
    const auto body = generate_request_body(cfg.model, prompt);
    const auto path = ep.prefix + "/api/generate";

    httplib::Client client(ep.origin);
    const auto secs = static_cast<time_t>(cfg.timeout_s);
    const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    std::string last_error;
    double backoff = cfg.backoff_s;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        auto res = client.Post(path, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw BackendError(std::string("malformed response body: ") + e.what());
            }
            auto it = j.find("response");
            if (!j.is_object() || it == j.end() || !it->is_string()) {
                throw BackendError("malformed response body: missing string field 'response'");
            }
            return it->get<std::string>();
        } else if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP status " + std::to_string(res->status);
        } else {
            throw BackendError("HTTP status " + std::to_string(res->status) + ": " + res->body);
        }
        if (attempt < cfg.max_attempts && backoff > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
    }
    throw BackendError("generate failed after " + std::to_string(cfg.max_attempts) + " attempt(s): " + last_error);
}

std::optional<std::string> oracle_predict(const OracleModel& oracle, const std::string& query_label,
                                          std::span<const std::string> demo_labels,
                                          std::span<const std::string> vocabulary, Rng& rng) {
    if (demo_labels.empty()) return std::nullopt;
    const bool matched = std::find(demo_labels.begin(), demo_labels.end(), query_label) != demo_labels.end();
    if (matched) {
        if (oracle.noise <= 0.0) return query_label;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) >= oracle.noise) return query_label;
        std::vector<const std::string*> wrong;
        for (const auto& l : vocabulary) {
            if (l != query_label) wrong.push_back(&l);
        }
        if (wrong.empty()) return query_label;
        std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
        return *wrong[pick(rng)];
    }
    std::map<std::string_view, std::size_t> votes;
    for (const auto& l : demo_labels) ++votes[l];
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;  // map order keeps the smallest label on ties
    }
    return std::string(best->first);
}

double success_probability(std::span<const double> match_probs) {
    double miss = 1.0;
    for (double p : match_probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("success_probability: p outside [0, 1]");
        miss *= 1.0 - p;
    }
    return 1.0 - miss;
}

std::optional<std::string> parse_label(std::string_view raw, std::span<const std::string> vocabulary) {
    constexpr std::string_view kMarker = "Intent:";
    if (auto pos = raw.rfind(kMarker); pos != std::string_view::npos) raw = raw.substr(pos + kMarker.size());
    const std::string text = normalize_label_text(raw);
    if (text.empty()) return std::nullopt;

    std::vector<std::string> normalized;
    normalized.reserve(vocabulary.size());
    for (const auto& l : vocabulary) normalized.push_back(normalize_label_text(l));

    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        if (normalized[i] == text) return vocabulary[i];
    }
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        if (!normalized[i].empty() && text.find(normalized[i]) != std::string::npos) hits.push_back(i);
    }
    // A hit contained in a longer hit ("card" inside "card arrival") is not a separate answer.
    std::vector<std::size_t> maximal;
    for (auto i : hits) {
        const bool subsumed = std::any_of(hits.begin(), hits.end(), [&](std::size_t j) {
            return j != i && normalized[j].size() > normalized[i].size() &&
                   normalized[j].find(normalized[i]) != std::string::npos;
        });
        if (!subsumed) maximal.push_back(i);
    }
    if (maximal.size() == 1) return vocabulary[maximal.front()];
    return std::nullopt;
}

std::unique_ptr<Predictor> make_predictor(const BackendConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
    case BackendKind::http: return std::make_unique<HttpPredictor>(cfg.with_env_overrides());
    case BackendKind::oracle_one_match: return std::make_unique<OraclePredictor>(OracleModel{0.0});
    case BackendKind::oracle_noisy: return std::make_unique<OraclePredictor>(OracleModel{cfg.noise});
    }
    throw std::invalid_argument("unknown backend kind");
}

}  // namespace metasel
