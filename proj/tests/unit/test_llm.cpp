// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "metasel/common.hpp"
#include "metasel/llm.hpp"
#include "mock_server.hpp"

using namespace metasel;
using testing_support::MockGenerateServer;

namespace {

const std::vector<std::string> kVocab{"card_arrival", "card_lost", "pin_reset", "top_up"};

BackendConfig http_config(const std::string& endpoint) {
    BackendConfig c;
    c.kind = BackendKind::http;
    c.endpoint = endpoint;
    c.timeout_s = 5.0;
    c.backoff_s = 0.0;
    return c;
}

/// Unsets an environment variable for the lifetime of the guard.
class EnvGuard {
public:
    explicit EnvGuard(const char* name) : name_(name) {
        if (const char* v = std::getenv(name)) saved_ = v;
        ::unsetenv(name);
    }
    ~EnvGuard() {
        if (saved_) ::setenv(name_, saved_->c_str(), 1);
        else ::unsetenv(name_);
    }

private:
    const char* name_;
    std::optional<std::string> saved_;
};

}  // namespace

TEST_SUITE("llm") {

TEST_CASE("request body is bit-exact") {
    CHECK(generate_request_body("qwen3:8b", "P") ==
          R"({"model":"qwen3:8b","prompt":"P","stream":false,"options":{"temperature":0}})");
    CHECK(generate_request_body("m", "line\n\"quoted\"") ==
          R"({"model":"m","prompt":"line\n\"quoted\"","stream":false,"options":{"temperature":0}})");
}

TEST_CASE("http backend returns the response field") {
    EnvGuard env(kEndpointEnv);
    MockGenerateServer server([](std::size_t, const std::string&) {
        return MockGenerateServer::Reply{200, R"({"response":"Intent: card_lost","done":true})"};
    });
    auto cfg = http_config(server.endpoint());
    CHECK(http_generate(cfg, "P") == "Intent: card_lost");
    REQUIRE(server.requests() == 1);
    CHECK(server.bodies()[0] == generate_request_body("qwen3:8b", "P"));

    auto predictor = make_predictor(cfg);
    PredictionRequest req;
    req.prompt = "Utterance: x -> Intent:";
    req.vocabulary = kVocab;
    auto p = predictor->predict(req);
    CHECK(p.raw == "Intent: card_lost");
    CHECK(p.label == "card_lost");
}

TEST_CASE("server errors are retried and then reported") {
    EnvGuard env(kEndpointEnv);
    MockGenerateServer server([](std::size_t, const std::string&) {
        return MockGenerateServer::Reply{500, R"({"error":"overloaded"})"};
    });
    auto cfg = http_config(server.endpoint());
    CHECK_THROWS_AS(http_generate(cfg, "P"), BackendError);
    CHECK(server.requests() == 3);
}

TEST_CASE("a transient failure is recovered by a retry") {
    EnvGuard env(kEndpointEnv);
    MockGenerateServer server([](std::size_t i, const std::string&) {
        if (i < 2) return MockGenerateServer::Reply{503, "{}"};
        return MockGenerateServer::Reply{200, R"({"response":"top_up"})"};
    });
    CHECK(http_generate(http_config(server.endpoint()), "P") == "top_up");
    CHECK(server.requests() == 3);
}

TEST_CASE("client errors and malformed bodies fail without retry") {
    EnvGuard env(kEndpointEnv);
    MockGenerateServer bad_request([](std::size_t, const std::string&) {
        return MockGenerateServer::Reply{404, R"({"error":"model not found"})"};
    });
    try {
        http_generate(http_config(bad_request.endpoint()), "P");
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(std::string(e.what()).find("404") != std::string::npos);
    }
    CHECK(bad_request.requests() == 1);

    MockGenerateServer garbage([](std::size_t, const std::string&) { return MockGenerateServer::Reply{200, "not json"}; });
    CHECK_THROWS_AS(http_generate(http_config(garbage.endpoint()), "P"), BackendError);
    MockGenerateServer missing([](std::size_t, const std::string&) { return MockGenerateServer::Reply{200, R"({"done":true})"}; });
    CHECK_THROWS_AS(http_generate(http_config(missing.endpoint()), "P"), BackendError);
}

TEST_CASE("unreachable endpoint is a backend error") {
    EnvGuard env(kEndpointEnv);
    auto cfg = http_config("http://127.0.0.1:1");
    cfg.timeout_s = 1.0;
    cfg.max_attempts = 2;
    CHECK_THROWS_AS(http_generate(cfg, "P"), BackendError);
    CHECK_THROWS_AS(http_generate(http_config("https://example.invalid"), "P"), BackendError);
}

TEST_CASE("endpoint prefix paths are preserved") {
    EnvGuard env(kEndpointEnv);
    httplib::Server server;
    std::string path;
    server.Post(R"(/proxy/api/generate)", [&](const httplib::Request& req, httplib::Response& res) {
        path = req.path;
        res.set_content(R"({"response":"ok"})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    CHECK(http_generate(http_config("http://127.0.0.1:" + std::to_string(port) + "/proxy/"), "P") == "ok");
    server.stop();
    t.join();
    CHECK(path == "/proxy/api/generate");
}

TEST_CASE("environment variable overrides the endpoint") {
    EnvGuard env(kEndpointEnv);
    BackendConfig c;
    CHECK(c.with_env_overrides().endpoint == "http://localhost:11434");
    ::setenv(kEndpointEnv, "http://10.0.0.5:9999", 1);
    CHECK(c.with_env_overrides().endpoint == "http://10.0.0.5:9999");
}

TEST_CASE("backend config validation") {
    BackendConfig c;
    CHECK_NOTHROW(c.validate());
    c.temperature = 0.7;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = BackendConfig{};
    c.kind = BackendKind::oracle_noisy;
    c.noise = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = BackendConfig{};
    c.max_attempts = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = BackendConfig{};
    c.max_in_flight = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    for (auto k : {BackendKind::http, BackendKind::oracle_one_match, BackendKind::oracle_noisy}) {
        CHECK(backend_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(backend_kind_from_string("gpt"), std::invalid_argument);
}

TEST_CASE("exact oracle: one match suffices, otherwise majority") {
    OracleModel exact;
    Rng rng(1);
    const std::vector<std::string> with_match{"pin_reset", "card_lost", "pin_reset"};
    for (int i = 0; i < 100; ++i) CHECK(oracle_predict(exact, "card_lost", with_match, kVocab, rng) == "card_lost");
    const std::vector<std::string> all_wrong{"top_up", "top_up"};
    CHECK(oracle_predict(exact, "card_lost", all_wrong, kVocab, rng) == "top_up");
    const std::vector<std::string> tie{"top_up", "pin_reset", "pin_reset", "top_up"};
    CHECK(oracle_predict(exact, "card_lost", tie, kVocab, rng) == "pin_reset");
    CHECK_FALSE(oracle_predict(exact, "card_lost", std::vector<std::string>{}, kVocab, rng).has_value());
}

TEST_CASE("noisy oracle accuracy is binomial around 1 - rho") {
    OracleModel noisy{0.5};
    const std::vector<std::string> demos{"card_lost", "top_up"};
    const int trials = 10000;
    int correct = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(stream_seed(42, t, 3));
        auto p = oracle_predict(noisy, "card_lost", demos, kVocab, rng);
        REQUIRE(p.has_value());
        CHECK(std::find(kVocab.begin(), kVocab.end(), *p) != kVocab.end());
        correct += *p == "card_lost";
    }
    const double sigma = std::sqrt(0.25 / trials);
    CHECK(std::fabs(correct / double(trials) - 0.5) < 3 * sigma);
}

TEST_CASE("oracle predictor is deterministic per stream") {
    BackendConfig c;
    c.kind = BackendKind::oracle_noisy;
    c.noise = 0.3;
    auto a = make_predictor(c), b = make_predictor(c);
    PredictionRequest req;
    req.query_label = "card_lost";
    req.demo_labels = {"card_lost", "top_up"};
    req.vocabulary = kVocab;
    for (std::uint64_t s = 0; s < 50; ++s) {
        req.stream_seed = s;
        CHECK(a->predict(req).label == b->predict(req).label);
    }
    CHECK(a->concurrent());
}

TEST_CASE("success probability") {
    CHECK(success_probability(std::vector<double>{0.5, 0.5}) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(success_probability(std::vector<double>{0.3, 1.0, 0.2}) == 1.0);
    CHECK(success_probability(std::vector<double>{0.3, 0.2, 0.1}) == doctest::Approx(0.496).epsilon(1e-14));
    CHECK(success_probability(std::vector<double>{}) == 0.0);
    CHECK_THROWS_AS(success_probability(std::vector<double>{1.2}), std::invalid_argument);
}

TEST_CASE("exact oracle accuracy is the match indicator") {
    OracleModel exact;
    Rng rng(5);
    const std::vector<std::string> labels{"card_arrival", "card_lost", "pin_reset", "top_up"};
    std::uniform_int_distribution<std::size_t> pick(0, 3);
    for (int t = 0; t < 500; ++t) {
        std::vector<std::string> demos;
        std::vector<double> p;
        const std::string truth = labels[pick(rng)];
        for (int j = 0; j < 3; ++j) {
            demos.push_back(labels[pick(rng)]);
            p.push_back(demos.back() == truth ? 1.0 : 0.0);
        }
        const bool correct = oracle_predict(exact, truth, demos, kVocab, rng) == truth;
        const bool matched = success_probability(p) == 1.0;
        // Without a match the majority label is still wrong.
        CHECK(correct == matched);
    }
}

TEST_CASE("label parsing") {
    CHECK(parse_label("Intent: card_arrival", kVocab) == "card_arrival");
    CHECK(parse_label("The intent is CARD_ARRIVAL.", kVocab) == "card_arrival");
    CHECK_FALSE(parse_label("I am not sure", kVocab).has_value());
    CHECK(parse_label("Reasoning... Intent: pin reset\n", kVocab) == "pin_reset");
    CHECK(parse_label("Intent: x Intent: top-up!", kVocab) == "top_up");
    CHECK_FALSE(parse_label("card_lost or pin_reset", kVocab).has_value());
    CHECK_FALSE(parse_label("", kVocab).has_value());

    const std::vector<std::string> nested{"card", "card_arrival"};
    CHECK(parse_label("it is card arrival", nested) == "card_arrival");
    CHECK(parse_label("card", nested) == "card");

    for (const auto& l : kVocab) {
        auto once = parse_label(l, kVocab);
        REQUIRE(once.has_value());
        CHECK(parse_label(*once, kVocab) == once);
    }
}

}  // TEST_SUITE
