// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/synthetic.hpp"

#include <cstdio>
#include <random>
#include <stdexcept>

#include "metasel/common.hpp"

namespace metasel {

namespace {

std::string padded(std::size_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02zu", v);
    return buf;
}

std::string class_label(std::size_t c) { return "intent_" + padded(c); }
std::string class_token(std::size_t c, std::size_t w) { return "c" + padded(c) + "w" + padded(w); }
std::string noise_token(std::size_t w) { return "noise" + padded(w); }

std::string utterance(const SyntheticConfig& cfg, std::size_t c, Rng& rng) {
    std::uniform_int_distribution<std::size_t> len(cfg.min_tokens, cfg.max_tokens);
    std::uniform_int_distribution<std::size_t> own(0, cfg.class_vocab - 1);
    std::uniform_int_distribution<std::size_t> shared(0, cfg.shared_vocab - 1);
    std::bernoulli_distribution is_noise(cfg.noise_fraction);
    const std::size_t n = len(rng);
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) text.push_back(' ');
        text += is_noise(rng) ? noise_token(shared(rng)) : class_token(c, own(rng));
    }
    return text;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (n_classes < 1 || train_per_class < 1) throw std::invalid_argument("synthetic: need >= 1 class and example");
    if (class_vocab < 1 || shared_vocab < 1) throw std::invalid_argument("synthetic: vocabularies must be non-empty");
    if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) {
        throw std::invalid_argument("synthetic: noise_fraction must lie in [0, 1)");
    }
    if (min_tokens < 1 || min_tokens > max_tokens) throw std::invalid_argument("synthetic: need 1 <= min_tokens <= max_tokens");
}

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<Example> train;
    train.reserve(cfg.n_classes * cfg.train_per_class);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        for (std::size_t i = 0; i < cfg.train_per_class; ++i) {
            train.push_back({0, utterance(cfg, c, rng), class_label(c), std::nullopt});
        }
    }
    std::vector<Example> test;
    test.reserve(cfg.n_test);
    for (std::size_t i = 0; i < cfg.n_test; ++i) {
        const std::size_t c = i % cfg.n_classes;
        test.push_back({0, utterance(cfg, c, rng), class_label(c), std::nullopt});
    }
    return {Dataset("synthetic", std::move(train)), Dataset("synthetic_test", std::move(test))};
}

}  // namespace metasel
