// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace metasel {

/// The pinned 318-word English stop-word list (docs/stopwords.txt).
const std::unordered_set<std::string_view>& english_stop_words();

/// Lowercases ASCII, splits on anything that is not a letter or digit
/// (bytes >= 0x80 count as letters so UTF-8 words survive), keeps tokens of
/// at least two code points and drops stop words.
std::vector<std::string> tokenize(std::string_view text);

/// L2-normalized sparse vector with strictly increasing indices and strictly
/// positive values.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    bool empty() const noexcept { return indices.empty(); }
    std::size_t nnz() const noexcept { return indices.size(); }
    double norm() const noexcept;

    bool operator==(const SparseVector&) const = default;
};

double dot(const SparseVector& a, const SparseVector& b) noexcept;

/// cos(a, b) for already-normalized vectors, clamped to [0, 1].
double cosine(const SparseVector& a, const SparseVector& b) noexcept;

class Vectorizer {
public:
    Vectorizer() = default;

    /// Rebuilds a fitted vectorizer from its persisted vocabulary (ordered by
    /// column) and idf table.
    Vectorizer(std::vector<std::string> vocabulary, std::vector<double> idf, std::size_t n_docs);

    SparseVector transform(std::string_view text) const;

    /// Column of `token`, or -1 when out of vocabulary.
    std::int64_t column(std::string_view token) const;

    const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::size_t n_docs() const noexcept { return n_docs_; }
    std::size_t dimension() const noexcept { return vocabulary_.size(); }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept {
            return std::hash<std::string_view>{}(s);
        }
    };

    std::vector<std::string> vocabulary_;
    std::vector<double> idf_;
    std::size_t n_docs_ = 0;
    std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> columns_;
};

/// Smoothed idf: ln((1 + n_docs) / (1 + df)) + 1; raw term counts; columns
/// in lexicographic token order. Throws DataError when no text yields a token.
Vectorizer fit_vectorizer(std::span<const std::string> texts);

inline SparseVector transform(const Vectorizer& vec, std::string_view text) {
    return vec.transform(text);
}

/// Candidate embeddings in CSR layout, with a column-major posting index so a
/// query only touches the rows that share one of its terms.
class PoolMatrix {
public:
    PoolMatrix() = default;
    explicit PoolMatrix(std::span<const SparseVector> rows, std::size_t n_cols);

    static PoolMatrix build(const Vectorizer& vec, std::span<const std::string> texts);

    std::size_t rows() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    std::size_t cols() const noexcept { return n_cols_; }
    std::size_t nnz() const noexcept { return col_idx_.size(); }
    SparseVector row(std::size_t r) const;

    /// score[i] = cos(query, row i). Work is proportional to the postings of
    /// the query's terms.
    std::vector<double> cosine_to_pool(const SparseVector& query) const;
    void cosine_to_pool(const SparseVector& query, std::span<double> out) const;

    /// Versioned binary cache ("MSPOOL" magic); see docs/formats.md.
    void write(std::ostream& out) const;
    static PoolMatrix read(std::istream& in);

    bool operator==(const PoolMatrix& o) const {
        return n_cols_ == o.n_cols_ && row_ptr_ == o.row_ptr_ && col_idx_ == o.col_idx_ &&
               values_ == o.values_;
    }

private:
    void build_postings();

    std::size_t n_cols_ = 0;
    std::vector<std::uint64_t> row_ptr_;
    std::vector<std::uint32_t> col_idx_;
    std::vector<double> values_;

    std::vector<std::uint64_t> col_ptr_;
    std::vector<std::uint32_t> post_rows_;
    std::vector<double> post_values_;
};

inline std::vector<double> cosine_to_pool(const SparseVector& query, const PoolMatrix& pool) {
    return pool.cosine_to_pool(query);
}

}  // namespace metasel
