// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations the library is checked against.
// They favour obviousness over speed: dense vectors, long double sums and
// exhaustive enumeration.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline std::filesystem::path source_dir() { return METASEL_SOURCE_DIR; }

/// Stop-word list read from the documented text file, not the embedded table.
inline const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = [] {
        std::set<std::string> s;
        std::ifstream in(source_dir() / "docs" / "stopwords.txt");
        for (std::string w; in >> w;) s.insert(w);
        return s;
    }();
    return words;
}

inline bool word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline std::vector<std::string> tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::size_t cps = 0;
        for (unsigned char c : cur) cps += (c & 0xC0) != 0x80;
        if (cps >= 2 && !stop_words().count(cur)) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (word_byte(c)) {
            cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

/// Dense TF-IDF model: smoothed idf, raw tf, L2-normalized rows.
struct DenseTfidf {
    std::vector<std::string> vocab;
    std::map<std::string, std::size_t> column;
    std::vector<long double> idf;
    std::vector<std::vector<long double>> rows;

    explicit DenseTfidf(const std::vector<std::string>& docs) {
        std::map<std::string, std::size_t> df;
        for (const auto& d : docs) {
            std::set<std::string> seen;
            for (const auto& t : tokens(d)) seen.insert(t);
            for (const auto& t : seen) ++df[t];
        }
        for (const auto& [t, n] : df) {
            column[t] = vocab.size();
            vocab.push_back(t);
            idf.push_back(std::log((1.0L + docs.size()) / (1.0L + n)) + 1.0L);
        }
        for (const auto& d : docs) rows.push_back(embed(d));
    }

    std::vector<long double> embed(const std::string& text) const {
        std::vector<long double> v(vocab.size(), 0.0L);
        for (const auto& t : tokens(text)) {
            if (auto it = column.find(t); it != column.end()) v[it->second] += 1.0L;
        }
        long double norm = 0.0L;
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] *= idf[j];
            norm += v[j] * v[j];
        }
        if (norm > 0.0L) {
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
        }
        return v;
    }

    std::vector<double> cosine_to_rows(const std::string& query) const {
        const auto q = embed(query);
        std::vector<double> out;
        for (const auto& r : rows) {
            long double s = 0.0L;
            for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * q[j];
            out.push_back(static_cast<double>(s));
        }
        return out;
    }
};

/// ½‖θ‖² + C Σ wᵢ logloss(zᵢ) in long double, bias unpenalized.
inline long double logistic_objective(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                      const std::vector<double>& w, const std::vector<long double>& theta,
                                      long double bias, long double c) {
    long double reg = 0.0L;
    for (auto t : theta) reg += t * t;
    long double data = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double z = bias;
        for (std::size_t j = 0; j < theta.size(); ++j) z += theta[j] * x[i][j];
        // log(1 + e^{-z}) for a positive, log(1 + e^{z}) for a negative
        const long double m = y[i] ? -z : z;
        const long double sp = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
        data += w[i] * sp;
    }
    return 0.5L * reg + c * data;
}

/// Visits every k-subset of {0..n-1} in lexicographic order.
inline void for_each_subset(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& f) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    if (k > n) return;
    while (true) {
        f(idx);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

/// Indices sorted by score descending, ties by index: the full reference ranking.
inline std::vector<std::size_t> rank_all(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

/// P(at least one of k draws without replacement hits one of `good` among `n`).
inline double hypergeometric_hit(std::size_t n, std::size_t good, std::size_t k) {
    long double miss = 1.0L;
    for (std::size_t i = 0; i < k; ++i) miss *= static_cast<long double>(n - good - i) / static_cast<long double>(n - i);
    return static_cast<double>(1.0L - miss);
}

}  // namespace oracle
