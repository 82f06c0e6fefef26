// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "metasel/common.hpp"

namespace metasel {

namespace {

bool is_word_byte(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char ascii_lower(char c) noexcept {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

/// Raw counts per column, sorted by column.
std::vector<std::pair<std::uint32_t, double>> term_counts(const std::vector<std::string>& tokens,
                                                          const Vectorizer& vec) {
    std::map<std::uint32_t, double> counts;
    for (const auto& tok : tokens) {
        auto col = vec.column(tok);
        if (col >= 0) counts[static_cast<std::uint32_t>(col)] += 1.0;
    }
    return {counts.begin(), counts.end()};
}

void normalize(SparseVector& v) {
    double sq = 0.0;
    for (double x : v.values) sq += x * x;
    if (sq <= 0.0) return;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v.values) x *= inv;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void write_array(std::ostream& out, const std::vector<T>& values) {
    write_pod<std::uint64_t>(out, values.size());
    if (!values.empty()) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(T)));
    }
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("pool cache: truncated stream");
    return value;
}

template <typename T>
std::vector<T> read_array(std::istream& in, std::uint64_t limit) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > limit) throw DataError("pool cache: array length out of range");
    std::vector<T> values(n);
    if (n != 0) {
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)));
        if (!in) throw DataError("pool cache: truncated stream");
    }
    return values;
}

constexpr char kPoolMagic[8] = {'M', 'S', 'P', 'O', 'O', 'L', '\0', '\0'};
constexpr std::uint32_t kPoolVersion = 1;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    const auto& stop = english_stop_words();
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            std::string tok(text.substr(i, j - i));
            std::transform(tok.begin(), tok.end(), tok.begin(), ascii_lower);
            if (utf8_length(tok) >= 2 && !stop.contains(tok)) tokens.push_back(std::move(tok));
        }
        i = j;
    }
    return tokens;
}

double SparseVector::norm() const noexcept {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    return std::sqrt(sq);
}

double dot(const SparseVector& a, const SparseVector& b) noexcept {
    double acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) {
            ++i;
        } else if (a.indices[i] > b.indices[j]) {
            ++j;
        } else {
            acc += a.values[i] * b.values[j];
            ++i;
            ++j;
        }
    }
    return acc;
}

double cosine(const SparseVector& a, const SparseVector& b) noexcept {
    return std::clamp(dot(a, b), 0.0, 1.0);
}

Vectorizer::Vectorizer(std::vector<std::string> vocabulary, std::vector<double> idf,
                       std::size_t n_docs)
    : vocabulary_(std::move(vocabulary)), idf_(std::move(idf)), n_docs_(n_docs) {
    if (vocabulary_.size() != idf_.size()) {
        throw DataError("vectorizer: vocabulary and idf sizes differ");
    }
    columns_.reserve(vocabulary_.size());
    for (std::size_t c = 0; c < vocabulary_.size(); ++c) {
        if (!std::isfinite(idf_[c]) || idf_[c] < 1.0) {
            throw DataError("vectorizer: idf weight below 1 for '" + vocabulary_[c] + "'");
        }
        if (!columns_.emplace(vocabulary_[c], static_cast<std::uint32_t>(c)).second) {
            throw DataError("vectorizer: duplicate token '" + vocabulary_[c] + "'");
        }
    }
}

std::int64_t Vectorizer::column(std::string_view token) const {
    auto it = columns_.find(token);
    return it == columns_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

SparseVector Vectorizer::transform(std::string_view text) const {
    SparseVector out;
    for (auto [col, count] : term_counts(tokenize(text), *this)) {
        out.indices.push_back(col);
        out.values.push_back(count * idf_[col]);
    }
    normalize(out);
    return out;
}

Vectorizer fit_vectorizer(std::span<const std::string> texts) {
    std::map<std::string, std::size_t> df;
    for (const auto& text : texts) {
        auto tokens = tokenize(text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& tok : tokens) ++df[std::move(tok)];
    }
    if (df.empty()) {
        throw DataError("fit_vectorizer: no text contains a usable token");
    }
    const double n_docs = static_cast<double>(texts.size());
    std::vector<std::string> vocabulary;
    std::vector<double> idf;
    vocabulary.reserve(df.size());
    idf.reserve(df.size());
    for (auto& [tok, count] : df) {
        vocabulary.push_back(tok);
        idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return Vectorizer(std::move(vocabulary), std::move(idf), texts.size());
}

PoolMatrix::PoolMatrix(std::span<const SparseVector> rows, std::size_t n_cols) : n_cols_(n_cols) {
    row_ptr_.reserve(rows.size() + 1);
    row_ptr_.push_back(0);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.indices.size(); ++i) {
            if (r.indices[i] >= n_cols) throw DataError("pool: column index out of range");
            col_idx_.push_back(r.indices[i]);
            values_.push_back(r.values[i]);
        }
        row_ptr_.push_back(col_idx_.size());
    }
    build_postings();
}

PoolMatrix PoolMatrix::build(const Vectorizer& vec, std::span<const std::string> texts) {
    std::vector<SparseVector> rows;
    rows.reserve(texts.size());
    for (const auto& t : texts) rows.push_back(vec.transform(t));
    return PoolMatrix(rows, vec.dimension());
}

void PoolMatrix::build_postings() {
    col_ptr_.assign(n_cols_ + 1, 0);
    for (auto c : col_idx_) ++col_ptr_[c + 1];
    std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
    post_rows_.resize(col_idx_.size());
    post_values_.resize(col_idx_.size());
    std::vector<std::uint64_t> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
    // Rows are visited in order, so each posting list is sorted by row.
    for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r) {
        for (auto p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
            auto slot = cursor[col_idx_[p]]++;
            post_rows_[slot] = static_cast<std::uint32_t>(r);
            post_values_[slot] = values_[p];
        }
    }
}

SparseVector PoolMatrix::row(std::size_t r) const {
    if (r >= rows()) throw std::out_of_range("PoolMatrix::row");
    SparseVector v;
    v.indices.assign(col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]),
                     col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]));
    v.values.assign(values_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]),
                    values_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]));
    return v;
}

std::vector<double> PoolMatrix::cosine_to_pool(const SparseVector& query) const {
    std::vector<double> out(rows());
    cosine_to_pool(query, out);
    return out;
}

void PoolMatrix::cosine_to_pool(const SparseVector& query, std::span<double> out) const {
    if (out.size() != rows()) throw std::invalid_argument("cosine_to_pool: output size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    // Query terms ascend, so each row accumulates in the same order as dot().
    for (std::size_t i = 0; i < query.indices.size(); ++i) {
        const auto c = query.indices[i];
        if (c >= n_cols_) continue;
        const double q = query.values[i];
        for (auto p = col_ptr_[c]; p < col_ptr_[c + 1]; ++p) {
            out[post_rows_[p]] += q * post_values_[p];
        }
    }
    for (double& s : out) s = std::min(s, 1.0);
}

void PoolMatrix::write(std::ostream& out) const {
    out.write(kPoolMagic, sizeof(kPoolMagic));
    write_pod<std::uint32_t>(out, kPoolVersion);
    write_pod<std::uint64_t>(out, n_cols_);
    write_array(out, row_ptr_);
    write_array(out, col_idx_);
    write_array(out, values_);
}

PoolMatrix PoolMatrix::read(std::istream& in) {
    char magic[sizeof(kPoolMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + sizeof(magic), kPoolMagic)) {
        throw DataError("pool cache: bad magic");
    }
    if (auto v = read_pod<std::uint32_t>(in); v != kPoolVersion) {
        throw DataError("pool cache: unsupported version " + std::to_string(v));
    }
    constexpr std::uint64_t kLimit = 1ULL << 36;
    PoolMatrix m;
    m.n_cols_ = read_pod<std::uint64_t>(in);
    m.row_ptr_ = read_array<std::uint64_t>(in, kLimit);
    m.col_idx_ = read_array<std::uint32_t>(in, kLimit);
    m.values_ = read_array<double>(in, kLimit);
    if (m.row_ptr_.empty() || m.row_ptr_.front() != 0 || m.row_ptr_.back() != m.col_idx_.size() ||
        m.col_idx_.size() != m.values_.size() ||
        !std::is_sorted(m.row_ptr_.begin(), m.row_ptr_.end())) {
        throw DataError("pool cache: inconsistent CSR arrays");
    }
    for (auto c : m.col_idx_) {
        if (c >= m.n_cols_) throw DataError("pool cache: column index out of range");
    }
    m.build_postings();
    return m;
}

}  // namespace metasel
