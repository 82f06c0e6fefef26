// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metasel {

struct Example {
    std::size_t id = 0;
    std::string text;
    std::string label;
    std::optional<std::string> rationale;

    bool operator==(const Example&) const = default;
};

/// A labeled utterance pool. Ids are always 0..N-1 in storage order and the
/// label vocabulary is the lexicographically sorted set of example labels.
class Dataset {
public:
    Dataset() = default;

    /// Takes ownership of `examples`, renumbering ids to their position.
    /// Throws DataError when a text is blank after trimming.
    Dataset(std::string name, std::vector<Example> examples);

    const std::string& name() const noexcept { return name_; }
    const std::vector<Example>& examples() const noexcept { return examples_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const Example& operator[](std::size_t id) const { return examples_.at(id); }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }

    /// Index of `label` in labels(), or nullopt when absent.
    std::optional<std::size_t> label_index(const std::string& label) const;

    /// Per-example label index into labels().
    const std::vector<std::size_t>& label_ids() const noexcept { return label_ids_; }

    /// Number of examples per label, aligned with labels().
    std::vector<std::size_t> label_counts() const;

    std::vector<std::string> texts() const;

    bool operator==(const Dataset&) const = default;

private:
    std::string name_;
    std::vector<Example> examples_;
    std::vector<std::string> labels_;
    std::vector<std::size_t> label_ids_;
};

enum class DatasetFormat { jsonl, csv };

/// Picks the format from a file extension (.csv, everything else jsonl).
DatasetFormat format_from_path(const std::filesystem::path& path);

/// JSONL: one {"text", "label", "rationale"?} object per line (blank lines
/// skipped). CSV: header row naming text,label[,rationale], RFC 4180 quoting.
/// Record errors name the 1-based line (JSONL) or data row (CSV).
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
Dataset load_dataset(const std::filesystem::path& path);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

struct MetaSplit {
    std::vector<std::size_t> query_ids;
    std::vector<std::size_t> candidate_ids;

    bool operator==(const MetaSplit&) const = default;
};

/// Uniform sampling without replacement, Q and C drawn independently (they
/// may overlap).
MetaSplit sample_meta_split(const Dataset& dataset, std::size_t n_queries,
                            std::size_t n_candidates, std::uint64_t seed);

struct ChallengeSubset {
    Dataset subset;                      // renumbered, ordered by ascending margin
    std::vector<std::size_t> source_ids; // id in the test set of each subset row
    std::vector<double> margins;         // NaN for rows filled at random
};

/// Precision-margin sampling: keeps the `size` test examples closest to a
/// TF-IDF centroid classifier's decision boundary.
ChallengeSubset challenge_subset(const Dataset& train, const Dataset& test,
                                 std::size_t size, std::uint64_t seed);

}  // namespace metasel
