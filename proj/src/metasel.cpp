// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/metasel.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metasel/common.hpp"

namespace metasel {

namespace {

using ojson = nlohmann::ordered_json;

constexpr char kBundleMagic[8] = {'M', 'S', 'E', 'L', 'B', 'N', 'D', 'L'};
constexpr std::uint32_t kBundleVersion = 1;

Feature parse_feature(const std::string& name) {
    if (name == feature_name(Feature::sim)) return Feature::sim;
    if (name == feature_name(Feature::len_ratio)) return Feature::len_ratio;
    throw DataError("unknown feature name '" + name + "'");
}

std::vector<std::string> feature_names(const FeatureOrder& order) {
    std::vector<std::string> names;
    for (auto f : order) names.emplace_back(feature_name(f));
    return names;
}

}  // namespace

std::string_view feature_name(Feature f) noexcept {
    return f == Feature::sim ? "tfidf_cosine" : "length_ratio";
}

std::array<double, FeatureVector::kDim> feature_row(const FeatureVector& f,
                                                    const FeatureOrder& order) noexcept {
    std::array<double, FeatureVector::kDim> row{};
    for (std::size_t i = 0; i < order.size(); ++i) {
        row[i] = order[i] == Feature::sim ? f.sim : f.len_ratio;
    }
    return row;
}

double length_ratio(std::string_view candidate, std::string_view query) noexcept {
    return static_cast<double>(utf8_length(candidate)) /
           static_cast<double>(std::max<std::size_t>(1, utf8_length(query)));
}

FeatureVector meta_features(const Example& query, const Example& candidate, const Vectorizer& vec) {
    return {cosine(vec.transform(candidate.text), vec.transform(query.text)),
            length_ratio(candidate.text, query.text)};
}

std::vector<MetaPair> build_meta_dataset(const Dataset& dataset, const MetaSplit& split,
                                         const Vectorizer& vec) {
    auto check = [&](std::size_t id) {
        if (id >= dataset.size()) throw DataError("meta split id " + std::to_string(id) + " out of range");
    };
    std::for_each(split.query_ids.begin(), split.query_ids.end(), check);
    std::for_each(split.candidate_ids.begin(), split.candidate_ids.end(), check);

    std::vector<SparseVector> cand_vecs;
    cand_vecs.reserve(split.candidate_ids.size());
    for (auto c : split.candidate_ids) cand_vecs.push_back(vec.transform(dataset[c].text));

    std::vector<MetaPair> pairs;
    pairs.reserve(split.query_ids.size() * split.candidate_ids.size());
    for (auto q : split.query_ids) {
        const auto& query = dataset[q];
        const auto qv = vec.transform(query.text);
        for (std::size_t j = 0; j < split.candidate_ids.size(); ++j) {
            const auto c = split.candidate_ids[j];
            const auto& cand = dataset[c];
            pairs.push_back(MetaPair{q, c, {cosine(cand_vecs[j], qv), length_ratio(cand.text, query.text)},
                                     dataset.label_ids()[q] == dataset.label_ids()[c] ? 1 : 0});
        }
    }
    return pairs;
}

MetaSelModel MetaSelModel::from_parts(const Dataset& train, LinearScorer scorer, FeatureOrder order) {
    if (scorer.dim() != FeatureVector::kDim) throw std::invalid_argument("scorer must be 2-dimensional");
    MetaSelModel m;
    const auto texts = train.texts();
    m.vectorizer = fit_vectorizer(texts);
    m.pool = PoolMatrix::build(m.vectorizer, texts);
    if (scorer.feature_names.empty()) scorer.feature_names = feature_names(order);
    m.scorer = std::move(scorer);
    m.pool_examples = train;
    m.meta_config.feature_order = order;
    return m;
}

double MetaSelModel::weight(Feature f) const {
    for (std::size_t i = 0; i < meta_config.feature_order.size(); ++i) {
        if (meta_config.feature_order[i] == f) return scorer.theta.at(i);
    }
    throw std::logic_error("feature missing from order");
}

std::vector<double> MetaSelModel::linear_scores(std::string_view query_text) const {
    const auto qv = vectorizer.transform(query_text);
    std::vector<double> z(pool.rows());
    pool.cosine_to_pool(qv, z);

    const std::size_t sim_col = meta_config.feature_order[0] == Feature::sim ? 0 : 1;
    const double inv_qlen = 1.0 / static_cast<double>(std::max<std::size_t>(1, utf8_length(query_text)));
    const auto& theta = scorer.theta;
    const auto& examples = pool_examples.examples();
    for (std::size_t i = 0; i < z.size(); ++i) {
        std::array<double, 2> f{};
        f[sim_col] = z[i];
        f[1 - sim_col] = static_cast<double>(utf8_length(examples[i].text)) * inv_qlen;
        // Same accumulation order as LinearScorer::linear_score.
        double s = scorer.bias;
        s += theta[0] * f[0];
        s += theta[1] * f[1];
        z[i] = s;
    }
    return z;
}

MetaSelModel train_metasel(const Dataset& train, const MetaConfig& meta_cfg,
                           const TrainConfig& train_cfg, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    if (train.labels().size() < 2) throw Error("train_metasel: training set needs at least two classes");
    train_cfg.validate();

    MetaSelModel m;
    const auto texts = train.texts();
    m.vectorizer = fit_vectorizer(texts);
    m.pool = PoolMatrix::build(m.vectorizer, texts);

    const auto split = sample_meta_split(train, meta_cfg.n_queries, meta_cfg.n_candidates, seed);
    // Pool rows are φ(text) for the same vectorizer, so pair features reuse them.
    FeatureMatrix x(FeatureVector::kDim);
    x.reserve(split.query_ids.size() * split.candidate_ids.size());
    std::vector<int> labels;
    labels.reserve(split.query_ids.size() * split.candidate_ids.size());
    std::vector<SparseVector> cand_rows;
    for (auto c : split.candidate_ids) cand_rows.push_back(m.pool.row(c));
    for (auto q : split.query_ids) {
        const auto qv = m.pool.row(q);
        for (std::size_t j = 0; j < split.candidate_ids.size(); ++j) {
            const auto c = split.candidate_ids[j];
            const FeatureVector f{cosine(cand_rows[j], qv), length_ratio(train[c].text, train[q].text)};
            x.push_row(feature_row(f, meta_cfg.feature_order));
            labels.push_back(train.label_ids()[q] == train.label_ids()[c] ? 1 : 0);
        }
    }
    const auto weights = balanced_weights(labels);
    m.scorer = fit_logistic(x, labels, weights, train_cfg, seed, feature_names(meta_cfg.feature_order));
    m.pool_examples = train;
    m.meta_config = meta_cfg;
    m.train_config = train_cfg;
    m.seed = seed;
    m.meta_pairs = labels.size();
    m.offline_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k,
                                       std::span<const std::uint8_t> excluded) {
    std::vector<std::size_t> idx;
    idx.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (excluded.empty() || !excluded[i]) idx.push_back(i);
    }
    if (k > idx.size()) throw std::invalid_argument("top_k: k exceeds the number of eligible candidates");
    auto better = [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

SelectionResult select(const MetaSelModel& model, std::string_view query_text, std::size_t k,
                       const SelectOptions& options) {
    const std::size_t n = model.pool.rows();
    if (k < 1 || k > n) {
        throw std::invalid_argument("select: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto z = model.linear_scores(query_text);

    std::vector<std::uint8_t> excluded;
    if (options.exclude_exact_match) {
        excluded.resize(n);
        for (std::size_t i = 0; i < n; ++i) excluded[i] = model.pool_examples[i].text == query_text;
    }
    auto ids = top_k_indices(z, k, excluded);
    SelectionResult r;
    r.scores.reserve(k);
    for (auto i : ids) r.scores.push_back(sigmoid(z[i]));
    r.demo_ids = std::move(ids);
    r.selection_latency = std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::steady_clock::now() - start);
    return r;
}

std::string serialize_model(const MetaSelModel& m) {
    ojson j;
    j["format"] = "metasel-model";
    j["version"] = kBundleVersion;
    ojson train_meta;
    train_meta["seed"] = m.seed;
    train_meta["meta_pairs"] = m.meta_pairs;
    train_meta["n_queries"] = m.meta_config.n_queries;
    train_meta["n_candidates"] = m.meta_config.n_candidates;
    j["scorer"] = scorer_to_json(m.scorer, train_meta);
    j["train_config"] = {{"max_iters", m.train_config.max_iters},
                         {"grad_tol", m.train_config.grad_tol},
                         {"C", m.train_config.reg_inverse_strength},
                         {"bias_penalized", m.train_config.bias_penalized}};
    j["vectorizer"] = {{"n_docs", m.vectorizer.n_docs()},
                       {"vocabulary", m.vectorizer.vocabulary()},
                       {"idf", m.vectorizer.idf()}};
    ojson pool = ojson::object();
    pool["name"] = m.pool_examples.name();
    ojson texts = ojson::array(), labels = ojson::array(), rationales = ojson::array();
    for (const auto& ex : m.pool_examples.examples()) {
        texts.push_back(ex.text);
        labels.push_back(ex.label);
        rationales.push_back(ex.rationale ? ojson(*ex.rationale) : ojson(nullptr));
    }
    pool["texts"] = std::move(texts);
    pool["labels"] = std::move(labels);
    pool["rationales"] = std::move(rationales);
    j["pool"] = std::move(pool);

    const std::string header = j.dump();
    std::ostringstream out(std::ios::binary);
    out.write(kBundleMagic, sizeof(kBundleMagic));
    const std::uint32_t version = kBundleVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    m.pool.write(out);
    return out.str();
}

MetaSelModel deserialize_model(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    char magic[sizeof(kBundleMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + sizeof(magic), kBundleMagic)) {
        throw DataError("model bundle: bad magic");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kBundleVersion) throw DataError("model bundle: unsupported version");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > bytes.size()) throw DataError("model bundle: truncated header");
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("model bundle: truncated header");

    MetaSelModel m;
    try {
        const auto j = nlohmann::json::parse(header);
        const auto& sj = j.at("scorer");
        m.scorer = scorer_from_json(sj);
        const auto& meta = sj.at("train_meta");
        m.seed = meta.at("seed").get<std::uint64_t>();
        m.meta_pairs = meta.at("meta_pairs").get<std::size_t>();
        m.meta_config.n_queries = meta.at("n_queries").get<std::size_t>();
        m.meta_config.n_candidates = meta.at("n_candidates").get<std::size_t>();
        if (m.scorer.feature_names.size() != FeatureVector::kDim) {
            throw DataError("model bundle: scorer must have two named features");
        }
        for (std::size_t i = 0; i < FeatureVector::kDim; ++i) {
            m.meta_config.feature_order[i] = parse_feature(m.scorer.feature_names[i]);
        }
        if (m.meta_config.feature_order[0] == m.meta_config.feature_order[1]) {
            throw DataError("model bundle: duplicate feature names");
        }
        const auto& tc = j.at("train_config");
        m.train_config.max_iters = tc.at("max_iters").get<int>();
        m.train_config.grad_tol = tc.at("grad_tol").get<double>();
        m.train_config.reg_inverse_strength = tc.at("C").get<double>();
        m.train_config.bias_penalized = tc.at("bias_penalized").get<bool>();
        const auto& vj = j.at("vectorizer");
        m.vectorizer = Vectorizer(vj.at("vocabulary").get<std::vector<std::string>>(),
                                  vj.at("idf").get<std::vector<double>>(), vj.at("n_docs").get<std::size_t>());
        const auto& pj = j.at("pool");
        const auto texts = pj.at("texts").get<std::vector<std::string>>();
        const auto labels = pj.at("labels").get<std::vector<std::string>>();
        const auto& rationales = pj.at("rationales");
        if (texts.size() != labels.size() || rationales.size() != texts.size()) {
            throw DataError("model bundle: pool arrays differ in length");
        }
        std::vector<Example> examples;
        examples.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            std::optional<std::string> rationale;
            if (!rationales[i].is_null()) rationale = rationales[i].get<std::string>();
            examples.push_back(Example{i, texts[i], labels[i], std::move(rationale)});
        }
        m.pool_examples = Dataset(pj.at("name").get<std::string>(), std::move(examples));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model bundle: ") + e.what());
    }
    m.pool = PoolMatrix::read(in);
    if (m.pool.rows() != m.pool_examples.size() || m.pool.cols() != m.vectorizer.dimension()) {
        throw DataError("model bundle: pool cache does not match pool examples");
    }
    return m;
}

void save_model(const MetaSelModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model bundle: " + path.string());
    const auto bytes = serialize_model(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing model bundle: " + path.string());
}

MetaSelModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model bundle: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace metasel
