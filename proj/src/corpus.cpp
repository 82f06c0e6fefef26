// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metasel/common.hpp"
#include "metasel/vectorize.hpp"

namespace metasel {

namespace {

using json = nlohmann::json;

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string strip_bom(std::string s) {
    if (s.size() >= 3 && s.compare(0, 3, "\xEF\xBB\xBF") == 0) s.erase(0, 3);
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return strip_bom(ss.str());
}

struct Record {
    std::string text;
    std::string label;
    std::optional<std::string> rationale;
};

void check_record(const Record& r, const std::string& where) {
    if (is_blank(r.text)) throw DataError(where + ": empty text");
    if (is_blank(r.label)) throw DataError(where + ": empty label");
}

std::vector<Record> parse_jsonl(const std::string& data) {
    std::vector<Record> out;
    std::istringstream lines(data);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) continue;
        const std::string where = "line " + std::to_string(lineno);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(where + ": invalid JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) throw DataError(where + ": record is not an object");
        Record r;
        for (const char* field : {"text", "label"}) {
            auto it = obj.find(field);
            if (it == obj.end()) throw DataError(where + ": missing field '" + field + "'");
            if (!it->is_string()) throw DataError(where + ": field '" + field + "' is not a string");
        }
        r.text = obj["text"].get<std::string>();
        r.label = obj["label"].get<std::string>();
        if (auto it = obj.find("rationale"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw DataError(where + ": field 'rationale' is not a string");
            r.rationale = it->get<std::string>();
        }
        check_record(r, where);
        out.push_back(std::move(r));
    }
    return out;
}

/// RFC 4180 records; quoted fields may contain separators, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv_records(const std::string& data) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const char c = data[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            field_started = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                records.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            field_started = false;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw DataError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
    }
    return records;
}

std::vector<Record> parse_csv(const std::string& data) {
    auto records = parse_csv_records(data);
    if (records.empty()) return {};
    const auto& header = records.front();
    auto column_of = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    auto text_col = column_of("text");
    auto label_col = column_of("label");
    auto rationale_col = column_of("rationale");
    if (!text_col || !label_col) throw DataError("csv: header must name 'text' and 'label' columns");

    std::vector<Record> out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = "row " + std::to_string(r);
        if (rec.size() <= std::max(*text_col, *label_col)) {
            throw DataError(where + ": missing field '" +
                            std::string(rec.size() <= *text_col ? "text" : "label") + "'");
        }
        Record out_rec{rec[*text_col], rec[*label_col], std::nullopt};
        if (rationale_col && *rationale_col < rec.size() && !rec[*rationale_col].empty()) {
            out_rec.rationale = rec[*rationale_col];
        }
        check_record(out_rec, where);
        out.push_back(std::move(out_rec));
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<Example> examples)
    : name_(std::move(name)), examples_(std::move(examples)) {
    std::set<std::string> labels;
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        auto& ex = examples_[i];
        ex.id = i;
        if (is_blank(ex.text)) throw DataError("example " + std::to_string(i) + ": empty text");
        if (ex.label.empty()) throw DataError("example " + std::to_string(i) + ": empty label");
        labels.insert(ex.label);
    }
    labels_.assign(labels.begin(), labels.end());
    label_ids_.reserve(examples_.size());
    for (const auto& ex : examples_) label_ids_.push_back(*label_index(ex.label));
}

std::optional<std::size_t> Dataset::label_index(const std::string& label) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::size_t> Dataset::label_counts() const {
    std::vector<std::size_t> counts(labels_.size(), 0);
    for (auto l : label_ids_) ++counts[l];
    return counts;
}

std::vector<std::string> Dataset::texts() const {
    std::vector<std::string> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.text);
    return out;
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
}

Dataset load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, format_from_path(path));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    const std::string data = read_file(path);
    auto records = format == DatasetFormat::csv ? parse_csv(data) : parse_jsonl(data);
    if (records.empty()) throw DataError("dataset file has no records: " + path.string());

    std::vector<Example> examples;
    examples.reserve(records.size());
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t duplicates = 0;
    for (auto& r : records) {
        if (!seen.emplace(r.text, r.label).second) ++duplicates;
        examples.push_back(Example{0, std::move(r.text), std::move(r.label), std::move(r.rationale)});
    }
    if (duplicates > 0) {
        std::clog << "metasel: " << path.string() << ": " << duplicates
                  << " duplicate (text, label) record(s) kept\n";
    }
    return Dataset(path.stem().string(), std::move(examples));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path.string());
    if (format == DatasetFormat::jsonl) {
        for (const auto& ex : dataset.examples()) {
            nlohmann::ordered_json obj;
            obj["text"] = ex.text;
            obj["label"] = ex.label;
            if (ex.rationale) obj["rationale"] = *ex.rationale;
            out << obj.dump() << '\n';
        }
    } else {
        const bool with_rationale = std::any_of(dataset.examples().begin(), dataset.examples().end(),
                                                [](const Example& e) { return e.rationale.has_value(); });
        out << (with_rationale ? "text,label,rationale\n" : "text,label\n");
        for (const auto& ex : dataset.examples()) {
            out << csv_escape(ex.text) << ',' << csv_escape(ex.label);
            if (with_rationale) out << ',' << csv_escape(ex.rationale.value_or(""));
            out << '\n';
        }
    }
    if (!out) throw DataError("failed writing dataset file: " + path.string());
}

MetaSplit sample_meta_split(const Dataset& dataset, std::size_t n_queries,
                            std::size_t n_candidates, std::uint64_t seed) {
    const std::size_t n = dataset.size();
    if (n_queries > n || n_candidates > n) {
        throw DataError("sample_meta_split: requested " + std::to_string(n_queries) + " queries and " +
                        std::to_string(n_candidates) + " candidates from a pool of " + std::to_string(n));
    }
    Rng rng(seed);
    auto draw = [&](std::size_t count) {
        std::vector<std::size_t> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(ids[i], ids[pick(rng)]);
        }
        ids.resize(count);
        return ids;
    };
    MetaSplit split;
    split.query_ids = draw(n_queries);
    split.candidate_ids = draw(n_candidates);
    return split;
}

ChallengeSubset challenge_subset(const Dataset& train, const Dataset& test, std::size_t size,
                                 std::uint64_t seed) {
    if (train.empty()) throw DataError("challenge_subset: empty training set");
    if (size > test.size()) {
        throw DataError("challenge_subset: size " + std::to_string(size) + " exceeds test set of " +
                        std::to_string(test.size()));
    }
    if (train.labels().size() < 2) {
        throw DataError("challenge_subset: margin is undefined with a single training class");
    }

    const auto texts = train.texts();
    const Vectorizer vec = fit_vectorizer(texts);
    const std::size_t n_classes = train.labels().size();
    const std::size_t dim = vec.dimension();

    std::vector<double> centroids(n_classes * dim, 0.0);
    const auto counts = train.label_counts();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto v = vec.transform(texts[i]);
        double* c = centroids.data() + train.label_ids()[i] * dim;
        for (std::size_t j = 0; j < v.nnz(); ++j) c[v.indices[j]] += v.values[j];
    }
    std::vector<double> centroid_norm(n_classes, 0.0);
    for (std::size_t k = 0; k < n_classes; ++k) {
        double* c = centroids.data() + k * dim;
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            c[j] /= static_cast<double>(counts[k]);
            sq += c[j] * c[j];
        }
        centroid_norm[k] = std::sqrt(sq);
    }

    std::vector<double> margins(test.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto v = vec.transform(test[i].text);
        if (v.empty()) continue;
        double best = -1.0, second = -1.0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            const double* c = centroids.data() + k * dim;
            double s = 0.0;
            for (std::size_t j = 0; j < v.nnz(); ++j) s += v.values[j] * c[v.indices[j]];
            s = centroid_norm[k] > 0.0 ? s / centroid_norm[k] : 0.0;
            if (s > best) {
                second = best;
                best = s;
            } else if (s > second) {
                second = s;
            }
        }
        margins[i] = best - second;
    }

    std::vector<std::size_t> finite, undefined;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        (std::isfinite(margins[i]) ? finite : undefined).push_back(i);
    }
    std::stable_sort(finite.begin(), finite.end(),
                     [&](std::size_t a, std::size_t b) { return margins[a] < margins[b]; });

    std::vector<std::size_t> chosen(finite.begin(),
                                    finite.begin() + static_cast<std::ptrdiff_t>(std::min(size, finite.size())));
    if (chosen.size() < size) {
        Rng rng(seed);
        std::shuffle(undefined.begin(), undefined.end(), rng);
        chosen.insert(chosen.end(), undefined.begin(),
                      undefined.begin() + static_cast<std::ptrdiff_t>(size - chosen.size()));
    }

    ChallengeSubset result;
    std::vector<Example> examples;
    examples.reserve(chosen.size());
    for (auto id : chosen) {
        examples.push_back(test[id]);
        result.source_ids.push_back(id);
        result.margins.push_back(margins[id]);
    }
    result.subset = Dataset(test.name() + "-challenge", std::move(examples));
    return result;
}

}  // namespace metasel
