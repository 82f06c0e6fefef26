// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

// Writes a generated class-vocabulary corpus as train/test files.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "metasel/corpus.hpp"
#include "metasel/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic intent corpus", "metasel-synth"};
    metasel::SyntheticConfig cfg;
    std::string out_dir = ".";
    std::string format = "jsonl";
    app.add_option("--output-dir", out_dir, "Directory for synthetic_train and synthetic_test files");
    app.add_option("--classes", cfg.n_classes, "Number of intent classes")->check(CLI::PositiveNumber);
    app.add_option("--train-per-class", cfg.train_per_class, "Training examples per class")->check(CLI::PositiveNumber);
    app.add_option("--test", cfg.n_test, "Test examples (classes round-robin)");
    app.add_option("--class-vocab", cfg.class_vocab, "Tokens owned by each class")->check(CLI::PositiveNumber);
    app.add_option("--shared-vocab", cfg.shared_vocab, "Shared noise tokens")->check(CLI::PositiveNumber);
    app.add_option("--noise", cfg.noise_fraction, "Probability that a token is shared noise");
    app.add_option("--min-tokens", cfg.min_tokens, "Shortest utterance in tokens");
    app.add_option("--max-tokens", cfg.max_tokens, "Longest utterance in tokens");
    app.add_option("--seed", cfg.seed, "Generator seed");
    app.add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        const auto corpus = metasel::make_synthetic_corpus(cfg);
        const auto fmt = format == "csv" ? metasel::DatasetFormat::csv : metasel::DatasetFormat::jsonl;
        const std::filesystem::path dir = out_dir;
        std::filesystem::create_directories(dir);
        metasel::save_dataset(corpus.train, dir / ("synthetic_train." + format), fmt);
        metasel::save_dataset(corpus.test, dir / ("synthetic_test." + format), fmt);
        std::cout << "wrote " << corpus.train.size() << " train and " << corpus.test.size() << " test examples to "
                  << dir.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "metasel-synth: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
