// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace metasel {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<SelectorKind, 12> kAllKinds = {
    SelectorKind::random,      SelectorKind::icl,       SelectorKind::zero_shot_cot,
    SelectorKind::few_shot_cot, SelectorKind::diversity, SelectorKind::uncertainty,
    SelectorKind::influence,   SelectorKind::ts_bandit, SelectorKind::rdes,
    SelectorKind::reinforce,   SelectorKind::a2c,       SelectorKind::meta_sel,
};

// Salts separating the per-query random streams of different consumers.
constexpr std::uint64_t kRandomSalt = 0x52414e44;   // "RAND"
constexpr std::uint64_t kBanditSalt = 0x42414e44;   // "BAND"
constexpr std::uint64_t kQSalt = 0x514c524e;        // "QLRN"
constexpr std::uint64_t kA2CSalt = 0x41324320;      // "A2C "

void check_k(std::size_t k, std::size_t n, const char* who) {
    if (k > n) {
        throw std::invalid_argument(std::string(who) + ": k=" + std::to_string(k) +
                                    " exceeds pool size " + std::to_string(n));
    }
}

/// First `k` entries of a uniformly random permutation of 0..n-1.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(k);
    return ids;
}

SelectionResult ranked(std::span<const double> scores, std::size_t k) {
    SelectionResult r;
    r.demo_ids = top_k_indices(scores, k);
    for (auto i : r.demo_ids) r.scores.push_back(scores[i]);
    return r;
}

// --- K-Means over sparse unit rows with dense centroids ----------------------

struct Clustering {
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
};

double dot_dense(const SparseVector& x, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.nnz(); ++j) s += x.values[j] * c[x.indices[j]];
    return s;
}

double squared_norm(const std::vector<double>& c) {
    double s = 0.0;
    for (double v : c) s += v * v;
    return s;
}

double sq_distance(const SparseVector& x, double x_sq, const std::vector<double>& c, double c_sq) {
    return std::max(0.0, x_sq - 2.0 * dot_dense(x, c) + c_sq);
}

std::vector<double> densify(const SparseVector& x, std::size_t dim) {
    std::vector<double> d(dim, 0.0);
    for (std::size_t j = 0; j < x.nnz(); ++j) d[x.indices[j]] = x.values[j];
    return d;
}

Clustering lloyd(const std::vector<SparseVector>& rows, const std::vector<double>& row_sq, std::size_t dim,
                 std::size_t k, int max_iters, Rng& rng) {
    const std::size_t n = rows.size();
    Clustering cl;
    // k-means++ seeding
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    cl.centroids.push_back(densify(rows[first(rng)], dim));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = sq_distance(rows[i], row_sq[i], cl.centroids[0], squared_norm(cl.centroids[0]));
    }
    while (cl.centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc >= target) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] <= 0.0) --pick;  // guard against rounding at the tail
        } else {
            pick = first(rng);
        }
        cl.centroids.push_back(densify(rows[pick], dim));
        const double c_sq = squared_norm(cl.centroids.back());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_distance(rows[i], row_sq[i], cl.centroids.back(), c_sq));
        }
    }

    cl.assignment.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<double> dist(n, 0.0);
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> c_sq(k);
        for (std::size_t j = 0; j < k; ++j) c_sq[j] = squared_norm(cl.centroids[j]);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double d = sq_distance(rows[i], row_sq[i], cl.centroids[j], c_sq[j]);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            dist[i] = best_d;
            if (cl.assignment[i] != best) {
                cl.assignment[i] = best;
                changed = true;
            }
        }
        if (!changed && it > 0) break;

        std::vector<std::size_t> counts(k, 0);
        for (auto& c : cl.centroids) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = cl.centroids[cl.assignment[i]];
            for (std::size_t j = 0; j < rows[i].nnz(); ++j) c[rows[i].indices[j]] += rows[i].values[j];
            ++counts[cl.assignment[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                // Re-seed an empty cluster at the worst-served point.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (dist[i] > dist[far]) far = i;
                }
                cl.centroids[j] = densify(rows[far], dim);
                dist[far] = 0.0;
                continue;
            }
            for (double& v : cl.centroids[j]) v /= static_cast<double>(counts[j]);
        }
    }

    cl.inertia = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double c_sq = squared_norm(cl.centroids[j]);
        for (std::size_t i = 0; i < n; ++i) {
            if (cl.assignment[i] == j) cl.inertia += sq_distance(rows[i], row_sq[i], cl.centroids[j], c_sq);
        }
    }
    return cl;
}

std::size_t count_distinct(const std::vector<SparseVector>& rows) {
    auto less = [](const SparseVector* a, const SparseVector* b) {
        return std::tie(a->indices, a->values) < std::tie(b->indices, b->values);
    };
    std::set<const SparseVector*, decltype(less)> seen(less);
    for (const auto& r : rows) seen.insert(&r);
    return seen.size();
}

// --- Selector implementations ----------------------------------------------

class RandomSelector final : public Selector {
public:
    RandomSelector(SelectorKind kind, std::size_t n, std::uint64_t seed) : kind_(kind), n_(n), seed_(seed) {}
    SelectorKind kind() const noexcept override { return kind_; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        return random_select(n_, k, seed_, q.index);
    }

private:
    SelectorKind kind_;
    std::size_t n_;
    std::uint64_t seed_;
};

class ZeroShotSelector final : public Selector {
public:
    SelectorKind kind() const noexcept override { return SelectorKind::zero_shot_cot; }
    SelectionResult select(const QueryContext&, std::size_t) override { return {}; }
};

class DiversitySelector final : public Selector {
public:
    DiversitySelector(std::shared_ptr<const CandidatePool> pool, std::uint64_t seed, KMeansConfig cfg)
        : pool_(std::move(pool)), seed_(seed), cfg_(cfg) {}
    SelectorKind kind() const noexcept override { return SelectorKind::diversity; }
    SelectionResult select(const QueryContext&, std::size_t k) override {
        auto it = cache_.find(k);
        if (it == cache_.end()) it = cache_.emplace(k, diversity_select(*pool_, k, seed_, cfg_)).first;
        return it->second;
    }

private:
    std::shared_ptr<const CandidatePool> pool_;
    std::uint64_t seed_;
    KMeansConfig cfg_;
    std::map<std::size_t, SelectionResult> cache_;
};

class UncertaintySelector final : public Selector {
public:
    UncertaintySelector(std::shared_ptr<const CandidatePool> pool, std::size_t m) : pool_(std::move(pool)), m_(m) {}
    SelectorKind kind() const noexcept override { return SelectorKind::uncertainty; }
    SelectionResult select(const QueryContext&, std::size_t k) override {
        check_k(k, pool_->size(), "uncertainty_select");
        if (entropy_.empty()) entropy_ = neighbor_label_entropy(*pool_, m_);
        return ranked(entropy_, k);
    }

private:
    std::shared_ptr<const CandidatePool> pool_;
    std::size_t m_;
    std::vector<double> entropy_;
};

class InfluenceSelector final : public Selector {
public:
    explicit InfluenceSelector(std::shared_ptr<const CandidatePool> pool) : pool_(std::move(pool)) {}
    SelectorKind kind() const noexcept override { return SelectorKind::influence; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        return influence_select(*pool_, q.text, k);
    }

private:
    std::shared_ptr<const CandidatePool> pool_;
};

class BanditSelector final : public Selector {
public:
    BanditSelector(std::size_t n, std::uint64_t seed) : state_(n), seed_(seed) {}
    SelectorKind kind() const noexcept override { return SelectorKind::ts_bandit; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        Rng rng(stream_seed(seed_, q.index, kBanditSalt));
        return bandit_step(state_, k, rng);
    }
    void update(const QueryContext&, const SelectionResult& sel, int reward) override {
        bandit_update(state_, sel.demo_ids, reward);
    }
    ojson export_state() const override { return {{"alpha", state_.alpha}, {"beta", state_.beta}}; }

private:
    BanditState state_;
    std::uint64_t seed_;
};

class QSelector final : public Selector {
public:
    QSelector(SelectorKind kind, std::shared_ptr<const CandidatePool> pool, QConfig cfg, std::uint64_t seed)
        : kind_(kind), pool_(std::move(pool)), state_(pool_->size(), cfg), seed_(seed) {}
    SelectorKind kind() const noexcept override { return kind_; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        Rng rng(stream_seed(seed_, q.index, kQSalt));
        return q_select(state_, k, rng);
    }
    void update(const QueryContext&, const SelectionResult& sel, int reward) override {
        q_update(state_, *pool_, sel.demo_ids, reward);
    }
    ojson export_state() const override {
        return {{"q", state_.q}, {"step", state_.step}, {"epsilon", state_.epsilon()}};
    }

private:
    SelectorKind kind_;
    std::shared_ptr<const CandidatePool> pool_;
    QState state_;
    std::uint64_t seed_;
};

class A2CSelector final : public Selector {
public:
    A2CSelector(std::shared_ptr<const CandidatePool> pool, A2CConfig cfg, std::uint64_t seed)
        : pool_(std::move(pool)), seed_(seed) {
        state_.config = cfg;
    }
    SelectorKind kind() const noexcept override { return SelectorKind::a2c; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        features_ = query_features(*pool_, q.text);
        features_for_ = q.index;
        Rng rng(stream_seed(seed_, q.index, kA2CSalt));
        return a2c_step(state_, features_, k, rng);
    }
    void update(const QueryContext& q, const SelectionResult& sel, int reward) override {
        if (features_for_ != q.index || features_.empty()) features_ = query_features(*pool_, q.text);
        a2c_update(state_, features_, sel.demo_ids, static_cast<double>(reward));
    }
    ojson export_state() const override {
        return {{"actor", state_.actor}, {"critic", state_.critic}, {"updates", state_.updates}};
    }

private:
    std::shared_ptr<const CandidatePool> pool_;
    ActorCriticState state_;
    std::uint64_t seed_;
    std::vector<FeatureVector> features_;
    std::size_t features_for_ = std::numeric_limits<std::size_t>::max();
};

class MetaSelector final : public Selector {
public:
    MetaSelector(const CandidatePool& pool, const SelectorParams& params, std::uint64_t seed)
        : options_(params.select) {
        if (params.fixed_scorer) {
            model_ = MetaSelModel::from_parts(pool.examples, *params.fixed_scorer, params.meta.feature_order);
        } else {
            // Small pools cap the meta-split at the pool size.
            MetaConfig meta = params.meta;
            meta.n_queries = std::min(meta.n_queries, pool.size());
            meta.n_candidates = std::min(meta.n_candidates, pool.size());
            model_ = train_metasel(pool.examples, meta, params.train, seed);
        }
    }
    SelectorKind kind() const noexcept override { return SelectorKind::meta_sel; }
    SelectionResult select(const QueryContext& q, std::size_t k) override {
        return metasel::select(model_, q.text, k, options_);
    }
    ojson export_state() const override { return scorer_to_json(model_.scorer); }
    const MetaSelModel* model() const noexcept override { return &model_; }

private:
    MetaSelModel model_;
    SelectOptions options_;
};

ojson q_to_json(const QConfig& c) {
    return {{"learning_rate", c.learning_rate},     {"discount", c.discount},
            {"epsilon_max", c.epsilon_max},         {"epsilon_min", c.epsilon_min},
            {"epsilon_decay", c.epsilon_decay},     {"diversity_weight", c.diversity_weight},
            {"diversity_threshold", c.diversity_threshold}};
}

QConfig q_from_json(const nlohmann::json& j, QConfig c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.discount = j.value("discount", c.discount);
    c.epsilon_max = j.value("epsilon_max", c.epsilon_max);
    c.epsilon_min = j.value("epsilon_min", c.epsilon_min);
    c.epsilon_decay = j.value("epsilon_decay", c.epsilon_decay);
    c.diversity_weight = j.value("diversity_weight", c.diversity_weight);
    c.diversity_threshold = j.value("diversity_threshold", c.diversity_threshold);
    if (!(c.epsilon_min >= 0.0 && c.epsilon_min <= c.epsilon_max && c.epsilon_max <= 1.0)) {
        throw std::invalid_argument("q-learning: need 0 <= epsilon_min <= epsilon_max <= 1");
    }
    if (!(c.learning_rate > 0.0) || c.discount < 0.0 || c.discount >= 1.0 || c.epsilon_decay < 0.0) {
        throw std::invalid_argument("q-learning: invalid learning rate, discount or decay");
    }
    return c;
}

}  // namespace

std::string_view to_string(SelectorKind kind) noexcept {
    switch (kind) {
    case SelectorKind::random: return "random";
    case SelectorKind::icl: return "icl";
    case SelectorKind::zero_shot_cot: return "zero_shot_cot";
    case SelectorKind::few_shot_cot: return "few_shot_cot";
    case SelectorKind::diversity: return "diversity";
    case SelectorKind::uncertainty: return "uncertainty";
    case SelectorKind::influence: return "influence";
    case SelectorKind::ts_bandit: return "ts_bandit";
    case SelectorKind::rdes: return "rdes";
    case SelectorKind::reinforce: return "reinforce";
    case SelectorKind::a2c: return "a2c";
    case SelectorKind::meta_sel: return "meta_sel";
    }
    return "random";
}

SelectorKind selector_kind_from_string(std::string_view name) {
    for (auto k : kAllKinds) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown selector '" + std::string(name) + "'");
}

std::span<const SelectorKind> all_selector_kinds() noexcept { return kAllKinds; }

bool is_online(SelectorKind kind) noexcept {
    return kind == SelectorKind::ts_bandit || kind == SelectorKind::rdes || kind == SelectorKind::reinforce ||
           kind == SelectorKind::a2c;
}

PromptMode prompt_mode_for(SelectorKind kind) noexcept {
    switch (kind) {
    case SelectorKind::zero_shot_cot: return PromptMode::zero_shot_cot;
    case SelectorKind::few_shot_cot: return PromptMode::few_shot_cot_passthrough;
    default: return PromptMode::plain_icl;
    }
}

std::shared_ptr<const CandidatePool> CandidatePool::build(const Dataset& train) {
    auto pool = std::make_shared<CandidatePool>();
    pool->examples = train;
    const auto texts = train.texts();
    pool->vectorizer = fit_vectorizer(texts);
    pool->matrix = PoolMatrix::build(pool->vectorizer, texts);
    const auto counts = train.label_counts();
    const double n = static_cast<double>(train.size());
    pool->label_prior.reserve(train.size());
    for (auto l : train.label_ids()) pool->label_prior.push_back(static_cast<double>(counts[l]) / n);
    return pool;
}

std::vector<FeatureVector> query_features(const CandidatePool& pool, std::string_view query_text) {
    const auto sims = pool.matrix.cosine_to_pool(pool.vectorizer.transform(query_text));
    std::vector<FeatureVector> out;
    out.reserve(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        out.push_back({sims[i], length_ratio(pool.examples[i].text, query_text)});
    }
    return out;
}

SelectionResult random_select(std::size_t pool_size, std::size_t k, std::uint64_t seed,
                              std::size_t query_index) {
    check_k(k, pool_size, "random_select");
    Rng rng(stream_seed(seed, query_index, kRandomSalt));
    SelectionResult r;
    r.demo_ids = sample_without_replacement(pool_size, k, rng);
    return r;
}

SelectionResult diversity_select(const CandidatePool& pool, std::size_t k, std::uint64_t seed,
                                 const KMeansConfig& cfg) {
    const std::size_t n = pool.size();
    check_k(k, n, "diversity_select");
    SelectionResult r;
    if (k == 0) return r;

    std::vector<SparseVector> rows;
    rows.reserve(n);
    std::vector<double> row_sq;
    for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(pool.matrix.row(i));
        row_sq.push_back(rows.back().empty() ? 0.0 : 1.0);
    }
    const std::size_t clusters = std::min(k, count_distinct(rows));
    const std::size_t dim = pool.matrix.cols();

    Rng rng(seed);
    Clustering best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, cfg.restarts); ++restart) {
        auto cl = lloyd(rows, row_sq, dim, clusters, std::max(1, cfg.max_iters), rng);
        if (cl.inertia < best.inertia) best = std::move(cl);
    }

    std::vector<char> used(n, 0);
    std::vector<std::pair<std::size_t, double>> picks;
    for (const auto& c : best.centroids) {
        const double c_norm = std::sqrt(squared_norm(c));
        std::size_t arg = n;
        double arg_cos = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double cs = c_norm > 0.0 ? dot_dense(rows[i], c) / c_norm : 0.0;
            if (cs > arg_cos) {
                arg_cos = cs;
                arg = i;
            }
        }
        used[arg] = 1;
        picks.emplace_back(arg, std::clamp(arg_cos, 0.0, 1.0));
    }
    // Farthest-first padding when there were fewer distinct vectors than k.
    while (picks.size() < k) {
        std::size_t arg = n;
        double arg_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double nearest = std::numeric_limits<double>::infinity();
            for (auto [p, _] : picks) nearest = std::min(nearest, 1.0 - cosine(rows[i], rows[p]));
            if (nearest > arg_d) {
                arg_d = nearest;
                arg = i;
            }
        }
        used[arg] = 1;
        picks.emplace_back(arg, 0.0);
    }
    std::stable_sort(picks.begin(), picks.end(), [](const auto& a, const auto& b) {
        return a.second > b.second || (a.second == b.second && a.first < b.first);
    });
    for (auto [id, s] : picks) {
        r.demo_ids.push_back(id);
        r.scores.push_back(s);
    }
    return r;
}

std::vector<double> neighbor_label_entropy(const CandidatePool& pool, std::size_t m_neighbors) {
    const std::size_t n = pool.size();
    const std::size_t m = std::min(m_neighbors, n == 0 ? 0 : n - 1);
    const std::size_t n_labels = pool.examples.labels().size();
    const auto& label_ids = pool.examples.label_ids();

    std::vector<double> entropy(n, 0.0);
    std::vector<double> sims(n);
    std::vector<std::uint8_t> self(n, 0);
    std::vector<double> mass(n_labels);
    for (std::size_t c = 0; c < n; ++c) {
        pool.matrix.cosine_to_pool(pool.matrix.row(c), sims);
        self[c] = 1;
        const auto neighbors = top_k_indices(sims, m, self);
        self[c] = 0;
        std::fill(mass.begin(), mass.end(), 0.0);
        double total = 0.0;
        for (auto j : neighbors) {
            mass[label_ids[j]] += sims[j];
            total += sims[j];
        }
        if (total <= 0.0) continue;
        double h = 0.0;
        for (double w : mass) {
            if (w > 0.0) {
                const double p = w / total;
                h -= p * std::log(p);
            }
        }
        entropy[c] = std::max(0.0, h);
    }
    return entropy;
}

SelectionResult uncertainty_select(const CandidatePool& pool, std::size_t k, std::size_t m_neighbors) {
    check_k(k, pool.size(), "uncertainty_select");
    return ranked(neighbor_label_entropy(pool, m_neighbors), k);
}

SelectionResult influence_select(const CandidatePool& pool, std::string_view query_text, std::size_t k) {
    check_k(k, pool.size(), "influence_select");
    auto scores = pool.matrix.cosine_to_pool(pool.vectorizer.transform(query_text));
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] *= pool.label_prior[i];
    return ranked(scores, k);
}

SelectionResult bandit_step(const BanditState& state, std::size_t k, Rng& rng) {
    const std::size_t n = state.alpha.size();
    check_k(k, n, "bandit_step");
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::gamma_distribution<double> ga(state.alpha[i], 1.0), gb(state.beta[i], 1.0);
        const double x = ga(rng), y = gb(rng);
        draws[i] = x + y > 0.0 ? x / (x + y) : 0.5;
    }
    return ranked(draws, k);
}

void bandit_update(BanditState& state, std::span<const std::size_t> selected_ids, int reward) {
    for (auto id : selected_ids) {
        if (id >= state.alpha.size()) throw std::out_of_range("bandit_update: arm out of range");
        (reward ? state.alpha : state.beta)[id] += 1.0;
    }
}

double QState::epsilon() const noexcept {
    return config.epsilon_min +
           (config.epsilon_max - config.epsilon_min) * std::exp(-config.epsilon_decay * static_cast<double>(step));
}

double diversity_fraction(const CandidatePool& pool, std::span<const std::size_t> ids, double threshold) {
    if (ids.size() < 2) return 0.0;
    std::vector<SparseVector> rows;
    for (auto id : ids) rows.push_back(pool.matrix.row(id));
    std::size_t pairs = 0, diverse = 0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            ++pairs;
            if (cosine(rows[a], rows[b]) < threshold) ++diverse;
        }
    }
    return static_cast<double>(diverse) / static_cast<double>(pairs);
}

SelectionResult q_select(const QState& state, std::size_t k, Rng& rng) {
    const std::size_t n = state.q.size();
    check_k(k, n, "q_select");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < state.epsilon()) {
        auto ids = sample_without_replacement(n, k, rng);
        std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
            return state.q[a] > state.q[b] || (state.q[a] == state.q[b] && a < b);
        });
        SelectionResult r;
        for (auto i : ids) r.scores.push_back(state.q[i]);
        r.demo_ids = std::move(ids);
        return r;
    }
    return ranked(state.q, k);
}

double q_update(QState& state, const CandidatePool& pool, std::span<const std::size_t> selected_ids,
                int accuracy_reward) {
    double r = static_cast<double>(accuracy_reward);
    if (state.config.diversity_weight != 0.0) {
        r += state.config.diversity_weight * diversity_fraction(pool, selected_ids, state.config.diversity_threshold);
    }
    const double max_q = state.q.empty() ? 0.0 : *std::max_element(state.q.begin(), state.q.end());
    for (auto id : selected_ids) {
        auto& q = state.q.at(id);
        q += state.config.learning_rate * (r + state.config.discount * max_q - q);
    }
    ++state.step;
    return r;
}

std::vector<double> ActorCriticState::policy(std::span<const FeatureVector> features) const {
    std::vector<double> p(features.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < features.size(); ++i) {
        p[i] = actor[0] * features[i].sim + actor[1] * features[i].len_ratio;
        mx = std::max(mx, p[i]);
    }
    double total = 0.0;
    for (double& v : p) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

double ActorCriticState::value(std::span<const FeatureVector> features, std::span<const std::size_t> ids) const {
    if (ids.empty()) return critic[2];
    double ms = 0.0, ml = 0.0;
    for (auto id : ids) {
        ms += features[id].sim;
        ml += features[id].len_ratio;
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    return critic[0] * ms * inv + critic[1] * ml * inv + critic[2];
}

SelectionResult a2c_step(const ActorCriticState& state, std::span<const FeatureVector> features,
                         std::size_t k, Rng& rng) {
    const std::size_t n = features.size();
    check_k(k, n, "a2c_step");
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        logits[i] = state.actor[0] * features[i].sim + state.actor[1] * features[i].len_ratio;
    }
    std::vector<char> taken(n, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SelectionResult r;
    std::vector<double> w(n);
    for (std::size_t step = 0; step < k; ++step) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) mx = std::max(mx, logits[i]);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = taken[i] ? 0.0 : std::exp(logits[i] - mx);
            total += w[i];
        }
        const double target = u(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            pick = i;  // last eligible index absorbs rounding at the tail
            acc += w[i];
            if (acc > target) break;
        }
        taken[pick] = 1;
        r.demo_ids.push_back(pick);
    }
    return r;
}

SelectionResult a2c_step(const ActorCriticState& state, const CandidatePool& pool,
                         std::string_view query_text, std::size_t k, Rng& rng) {
    const auto features = query_features(pool, query_text);
    return a2c_step(state, features, k, rng);
}

double a2c_update(ActorCriticState& state, std::span<const FeatureVector> features,
                  std::span<const std::size_t> selected_ids, double reward) {
    const std::size_t n = features.size();
    for (auto id : selected_ids) {
        if (id >= n) throw std::out_of_range("a2c_update: candidate out of range");
    }
    const double v = state.value(features, selected_ids);
    const double advantage = reward - v;

    // ∇ log π of the sampling sequence: Σ_j (f_{s_j} − E_{π_j}[f]) over shrinking remainders.
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        logits[i] = state.actor[0] * features[i].sim + state.actor[1] * features[i].len_ratio;
    }
    std::vector<char> taken(n, 0);
    std::array<double, 2> grad_logp{0.0, 0.0};
    for (auto s : selected_ids) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) mx = std::max(mx, logits[i]);
        }
        double total = 0.0, es = 0.0, el = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double w = std::exp(logits[i] - mx);
            total += w;
            es += w * features[i].sim;
            el += w * features[i].len_ratio;
        }
        grad_logp[0] += features[s].sim - es / total;
        grad_logp[1] += features[s].len_ratio - el / total;
        taken[s] = 1;
    }

    // ∇H of the full-pool policy: dH/dl_c = −π_c (ln π_c + H).
    const auto pi = state.policy(features);
    double h = 0.0;
    for (double p : pi) {
        if (p > 0.0) h -= p * std::log(p);
    }
    std::array<double, 2> grad_h{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        if (pi[i] <= 0.0) continue;
        const double g = -pi[i] * (std::log(pi[i]) + h);
        grad_h[0] += g * features[i].sim;
        grad_h[1] += g * features[i].len_ratio;
    }

    for (std::size_t j = 0; j < 2; ++j) {
        state.actor[j] += state.config.actor_lr * (advantage * grad_logp[j] + state.config.entropy_coef * grad_h[j]);
    }

    double ms = 0.0, ml = 0.0;
    for (auto id : selected_ids) {
        ms += features[id].sim;
        ml += features[id].len_ratio;
    }
    if (!selected_ids.empty()) {
        ms /= static_cast<double>(selected_ids.size());
        ml /= static_cast<double>(selected_ids.size());
    }
    const double step = state.config.critic_lr * (reward - v);
    state.critic[0] += step * ms;
    state.critic[1] += step * ml;
    state.critic[2] += step;
    ++state.updates;
    return advantage;
}

ojson SelectorParams::to_json() const {
    ojson j;
    j["uncertainty_neighbors"] = uncertainty_neighbors;
    j["kmeans"] = {{"max_iters", kmeans.max_iters}, {"restarts", kmeans.restarts}};
    j["rdes"] = q_to_json(rdes);
    j["reinforce"] = q_to_json(reinforce);
    j["a2c"] = {{"actor_lr", a2c.actor_lr}, {"critic_lr", a2c.critic_lr}, {"entropy_coef", a2c.entropy_coef}};
    ojson order = ojson::array();
    for (auto f : meta.feature_order) order.push_back(std::string(feature_name(f)));
    j["meta"] = {{"n_queries", meta.n_queries}, {"n_candidates", meta.n_candidates}, {"feature_order", order}};
    j["train"] = {{"max_iters", train.max_iters},
                  {"grad_tol", train.grad_tol},
                  {"C", train.reg_inverse_strength},
                  {"bias_penalized", train.bias_penalized}};
    j["exclude_exact_match"] = select.exclude_exact_match;
    if (fixed_scorer) j["fixed_scorer"] = {{"theta", fixed_scorer->theta}, {"bias", fixed_scorer->bias}};
    return j;
}

SelectorParams SelectorParams::from_json(const nlohmann::json& j) {
    SelectorParams p;
    if (!j.is_object()) return p;
    try {
        p.uncertainty_neighbors = j.value("uncertainty_neighbors", p.uncertainty_neighbors);
        if (auto it = j.find("kmeans"); it != j.end()) {
            p.kmeans.max_iters = it->value("max_iters", p.kmeans.max_iters);
            p.kmeans.restarts = it->value("restarts", p.kmeans.restarts);
        }
        if (auto it = j.find("rdes"); it != j.end()) p.rdes = q_from_json(*it, p.rdes);
        if (auto it = j.find("reinforce"); it != j.end()) p.reinforce = q_from_json(*it, p.reinforce);
        if (auto it = j.find("a2c"); it != j.end()) {
            p.a2c.actor_lr = it->value("actor_lr", p.a2c.actor_lr);
            p.a2c.critic_lr = it->value("critic_lr", p.a2c.critic_lr);
            p.a2c.entropy_coef = it->value("entropy_coef", p.a2c.entropy_coef);
        }
        if (auto it = j.find("meta"); it != j.end()) {
            p.meta.n_queries = it->value("n_queries", p.meta.n_queries);
            p.meta.n_candidates = it->value("n_candidates", p.meta.n_candidates);
            if (auto fo = it->find("feature_order"); fo != it->end()) {
                const auto names = fo->get<std::vector<std::string>>();
                if (names.size() != 2) throw std::invalid_argument("meta.feature_order needs two names");
                for (std::size_t i = 0; i < 2; ++i) {
                    if (names[i] == feature_name(Feature::sim)) p.meta.feature_order[i] = Feature::sim;
                    else if (names[i] == feature_name(Feature::len_ratio)) p.meta.feature_order[i] = Feature::len_ratio;
                    else throw std::invalid_argument("unknown feature '" + names[i] + "'");
                }
                if (p.meta.feature_order[0] == p.meta.feature_order[1]) {
                    throw std::invalid_argument("meta.feature_order repeats a feature");
                }
            }
        }
        if (auto it = j.find("train"); it != j.end()) {
            p.train.max_iters = it->value("max_iters", p.train.max_iters);
            p.train.grad_tol = it->value("grad_tol", p.train.grad_tol);
            p.train.reg_inverse_strength = it->value("C", p.train.reg_inverse_strength);
            p.train.bias_penalized = it->value("bias_penalized", p.train.bias_penalized);
            p.train.validate();
        }
        p.select.exclude_exact_match = j.value("exclude_exact_match", false);
        if (auto it = j.find("fixed_scorer"); it != j.end() && !it->is_null()) {
            LinearScorer s;
            s.theta = it->at("theta").get<std::vector<double>>();
            s.bias = it->value("bias", 0.0);
            if (s.theta.size() != 2) throw std::invalid_argument("fixed_scorer.theta needs two weights");
            p.fixed_scorer = std::move(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("selector params: ") + e.what());
    }
    if (p.uncertainty_neighbors < 1) throw std::invalid_argument("uncertainty_neighbors must be >= 1");
    if (p.kmeans.max_iters < 1 || p.kmeans.restarts < 1) throw std::invalid_argument("kmeans: iterations and restarts must be >= 1");
    if (!(p.a2c.actor_lr > 0.0) || !(p.a2c.critic_lr > 0.0) || p.a2c.entropy_coef < 0.0) {
        throw std::invalid_argument("a2c: learning rates must be > 0 and entropy_coef >= 0");
    }
    return p;
}

std::unique_ptr<Selector> make_selector(SelectorKind kind, const SelectorParams& params,
                                        std::shared_ptr<const CandidatePool> pool, std::uint64_t seed) {
    if (!pool) throw std::invalid_argument("make_selector: null pool");
    switch (kind) {
    case SelectorKind::random:
    case SelectorKind::icl:
    case SelectorKind::few_shot_cot: return std::make_unique<RandomSelector>(kind, pool->size(), seed);
    case SelectorKind::zero_shot_cot: return std::make_unique<ZeroShotSelector>();
    case SelectorKind::diversity: return std::make_unique<DiversitySelector>(pool, seed, params.kmeans);
    case SelectorKind::uncertainty: return std::make_unique<UncertaintySelector>(pool, params.uncertainty_neighbors);
    case SelectorKind::influence: return std::make_unique<InfluenceSelector>(pool);
    case SelectorKind::ts_bandit: return std::make_unique<BanditSelector>(pool->size(), seed);
    case SelectorKind::rdes: return std::make_unique<QSelector>(kind, pool, params.rdes, seed);
    case SelectorKind::reinforce: return std::make_unique<QSelector>(kind, pool, params.reinforce, seed);
    case SelectorKind::a2c: return std::make_unique<A2CSelector>(pool, params.a2c, seed);
    case SelectorKind::meta_sel: return std::make_unique<MetaSelector>(*pool, params, seed);
    }
    throw std::invalid_argument("make_selector: unknown kind");
}

}  // namespace metasel
