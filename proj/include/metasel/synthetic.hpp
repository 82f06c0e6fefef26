// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "metasel/corpus.hpp"

namespace metasel {

/// Generated intent corpus with class-specific vocabulary. Each utterance is
/// a random-length bag of tokens; a token is drawn from the shared noise
/// vocabulary with probability `noise_fraction`, otherwise from the class's
/// own vocabulary.
struct SyntheticConfig {
    std::size_t n_classes = 10;
    std::size_t train_per_class = 100;
    std::size_t n_test = 1000;          // classes assigned round-robin
    std::size_t class_vocab = 20;
    std::size_t shared_vocab = 40;
    double noise_fraction = 0.3;
    std::size_t min_tokens = 4;
    std::size_t max_tokens = 12;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SyntheticCorpus {
    Dataset train;
    Dataset test;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg);

}  // namespace metasel
