// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "metasel/common.hpp"

namespace metasel {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPredictSalt = 0x4f52434c;  // "ORCL"

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

ojson backend_to_json(const BackendConfig& b) {
    return {{"kind", std::string(to_string(b.kind))},
            {"endpoint", b.endpoint},
            {"model", b.model},
            {"temperature", b.temperature},
            {"timeout_s", b.timeout_s},
            {"max_attempts", b.max_attempts},
            {"backoff_s", b.backoff_s},
            {"noise", b.noise},
            {"max_in_flight", b.max_in_flight}};
}

BackendConfig backend_from_json(const nlohmann::json& j) {
    BackendConfig b;
    if (auto it = j.find("kind"); it != j.end()) b.kind = backend_kind_from_string(it->get<std::string>());
    b.endpoint = j.value("endpoint", b.endpoint);
    b.model = j.value("model", b.model);
    b.temperature = j.value("temperature", b.temperature);
    b.timeout_s = j.value("timeout_s", b.timeout_s);
    b.max_attempts = j.value("max_attempts", b.max_attempts);
    b.backoff_s = j.value("backoff_s", b.backoff_s);
    b.noise = j.value("noise", b.noise);
    b.max_in_flight = j.value("max_in_flight", b.max_in_flight);
    return b;
}

ojson trace_to_json(const QueryTrace& t) {
    return {{"query_id", t.query_id},
            {"query_label", t.query_label},
            {"demo_ids", t.demo_ids},
            {"scores", t.scores},
            {"predicted", t.predicted ? ojson(*t.predicted) : ojson(nullptr)},
            {"correct", t.correct},
            {"matches", t.matches}};
}

QueryTrace trace_from_json(const nlohmann::json& j) {
    QueryTrace t;
    t.query_id = j.at("query_id").get<std::size_t>();
    t.query_label = j.at("query_label").get<std::string>();
    t.demo_ids = j.at("demo_ids").get<std::vector<std::size_t>>();
    t.scores = j.at("scores").get<std::vector<double>>();
    if (!j.at("predicted").is_null()) t.predicted = j.at("predicted").get<std::string>();
    t.correct = j.at("correct").get<bool>();
    t.matches = j.at("matches").get<std::size_t>();
    return t;
}

/// Per-seed progress file so an interrupted run restarts where it stopped.
class Checkpoint {
public:
    Checkpoint() = default;
    Checkpoint(fs::path path, std::string config_hash) : path_(std::move(path)), hash_(std::move(config_hash)) {}

    bool enabled() const noexcept { return !path_.empty(); }

    std::vector<QueryTrace> load() const {
        if (!enabled() || !fs::exists(path_)) return {};
        std::ifstream in(path_);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("corrupt checkpoint " + path_.string() + ": " + e.what());
        }
        if (j.value("config_hash", "") != hash_) {
            std::clog << "metasel: ignoring checkpoint from a different config: " << path_ << "\n";
            return {};
        }
        std::vector<QueryTrace> done;
        for (const auto& q : j.at("queries")) done.push_back(trace_from_json(q));
        return done;
    }

    void save(std::span<const QueryTrace> done) const {
        if (!enabled()) return;
        ojson j;
        j["config_hash"] = hash_;
        j["queries"] = ojson::array();
        for (const auto& t : done) j["queries"].push_back(trace_to_json(t));
        const auto tmp = fs::path(path_).concat(".tmp");
        write_text(tmp, j.dump());
        fs::rename(tmp, path_);
    }

private:
    fs::path path_;
    std::string hash_;
};

SeedResult run_seed(const RunConfig& cfg, std::shared_ptr<const CandidatePool> pool, const Dataset& queries,
                    Predictor& predictor, std::uint64_t seed, const Checkpoint& checkpoint) {
    using clock = std::chrono::steady_clock;
    SeedResult res;
    res.seed = seed;

    const auto t0 = clock::now();
    auto selector = make_selector(cfg.selector, cfg.params, pool, seed);
    res.offline_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    const auto mode = cfg.effective_prompt_mode();
    const auto& vocab = pool->examples.labels();
    const bool online = is_online(cfg.selector);
    const std::size_t n = cfg.max_queries ? std::min(cfg.max_queries, queries.size()) : queries.size();
    const std::size_t window = (!online && predictor.concurrent()) ? std::max<std::size_t>(1, cfg.backend.max_in_flight) : 1;
    const std::size_t k = cfg.selector == SelectorKind::zero_shot_cot ? 0 : cfg.k;

    std::vector<QueryTrace> done = checkpoint.load();
    if (done.size() > n) done.resize(n);
    for (std::size_t i = 0; i < done.size(); ++i) {
        if (done[i].query_id != i) throw Error("checkpoint out of order at query " + std::to_string(i));
        if (!online) continue;
        // Replay: re-deriving the selection keeps the learner's state identical
        // to the interrupted run without calling the backend again.
        const QueryContext q{queries[i].text, i};
        auto sel = selector->select(q, k);
        if (sel.demo_ids != done[i].demo_ids) throw Error("checkpoint replay diverged at query " + std::to_string(i));
        selector->update(q, sel, done[i].correct ? 1 : 0);
    }

    double latency_ms = 0.0;
    std::size_t timed = 0;
    std::size_t last_saved = done.size();
    while (done.size() < n) {
        const std::size_t begin = done.size();
        const std::size_t end = std::min(n, begin + window);
        std::vector<SelectionResult> sels;
        std::vector<std::string> prompts;
        std::vector<PredictionRequest> reqs;
        for (std::size_t i = begin; i < end; ++i) {
            const QueryContext q{queries[i].text, i};
            const auto s0 = clock::now();
            auto sel = selector->select(q, k);
            const auto dt = clock::now() - s0;
            sel.selection_latency = std::chrono::duration_cast<std::chrono::nanoseconds>(dt);
            latency_ms += std::chrono::duration<double, std::milli>(dt).count();
            ++timed;
            sels.push_back(std::move(sel));
        }
        for (std::size_t i = begin; i < end; ++i) {
            std::vector<const Example*> demos;
            for (auto id : sels[i - begin].demo_ids) demos.push_back(&pool->examples[id]);
            prompts.push_back(build_prompt(queries[i].text, demos, vocab, mode));
        }
        for (std::size_t i = begin; i < end; ++i) {
            PredictionRequest r;
            r.prompt = prompts[i - begin];
            r.query_label = queries[i].label;
            for (auto id : sels[i - begin].demo_ids) r.demo_labels.push_back(pool->examples[id].label);
            r.vocabulary = vocab;
            r.stream_seed = stream_seed(seed, i, kPredictSalt);
            reqs.push_back(std::move(r));
        }

        std::vector<Prediction> preds(reqs.size());
        try {
            if (reqs.size() == 1) {
                preds[0] = predictor.predict(reqs[0]);
            } else {
                std::vector<std::future<Prediction>> futures;
                for (const auto& r : reqs) {
                    futures.push_back(std::async(std::launch::async, [&predictor, &r] { return predictor.predict(r); }));
                }
                std::exception_ptr failure;
                for (std::size_t j = 0; j < futures.size(); ++j) {
                    try {
                        preds[j] = futures[j].get();
                    } catch (...) {
                        if (!failure) failure = std::current_exception();
                    }
                }
                if (failure) std::rethrow_exception(failure);
            }
        } catch (const BackendError&) {
            checkpoint.save(done);
            throw;
        }

        for (std::size_t i = begin; i < end; ++i) {
            auto& sel = sels[i - begin];
            QueryTrace t;
            t.query_id = i;
            t.query_label = queries[i].label;
            t.demo_ids = sel.demo_ids;
            t.scores = sel.scores;
            t.predicted = preds[i - begin].label;
            t.correct = t.predicted && *t.predicted == queries[i].label;
            for (auto id : sel.demo_ids) t.matches += pool->examples[id].label == queries[i].label;
            if (online) selector->update({queries[i].text, i}, sel, t.correct ? 1 : 0);
            done.push_back(std::move(t));
        }
        if (checkpoint.enabled() && done.size() - last_saved >= cfg.checkpoint_every) {
            checkpoint.save(done);
            last_saved = done.size();
        }
    }
    if (checkpoint.enabled() && last_saved != done.size()) checkpoint.save(done);

    double agreement = 0.0;
    for (const auto& t : done) {
        res.n_correct += t.correct;
        res.rejections += !t.predicted;
        if (cfg.k) agreement += static_cast<double>(t.matches) / static_cast<double>(cfg.k);
    }
    res.n_queries = done.size();
    res.accuracy = n ? static_cast<double>(res.n_correct) / static_cast<double>(n) : 0.0;
    res.agreement = n ? agreement / static_cast<double>(n) : 0.0;
    res.mean_latency_ms = timed ? latency_ms / static_cast<double>(timed) : 0.0;
    res.selector_state = selector->export_state();
    if (cfg.trace) res.trace = std::move(done);
    return res;
}

std::string describe_model(const RunConfig& cfg) {
    return cfg.backend.kind == BackendKind::http ? cfg.backend.model : std::string(to_string(cfg.backend.kind));
}

Report run_impl(const RunConfig& cfg, const Dataset& train, const Dataset& queries, const fs::path& checkpoint_dir) {
    cfg.validate();
    if (train.empty()) throw DataError("training pool is empty");
    if (queries.empty()) throw DataError("no evaluation queries");
    if (cfg.selector != SelectorKind::zero_shot_cot && cfg.k > train.size()) {
        throw std::invalid_argument("k=" + std::to_string(cfg.k) + " exceeds pool size " + std::to_string(train.size()));
    }

    Report rep;
    rep.method = std::string(to_string(cfg.selector));
    rep.dataset = cfg.dataset_name.empty() ? train.name() : cfg.dataset_name;
    rep.model = describe_model(cfg);
    rep.k = cfg.k;
    rep.config = cfg.to_json();

    auto pool = CandidatePool::build(train);
    auto predictor = make_predictor(cfg.backend);
    const std::string hash = hex64(fnv1a64(rep.config.dump()));

    for (auto seed : cfg.seeds) {
        Checkpoint cp;
        if (!checkpoint_dir.empty()) {
            cp = Checkpoint(checkpoint_dir / (rep.method + "_seed" + std::to_string(seed) + ".json"), hash);
        }
        rep.seeds.push_back(run_seed(cfg, pool, queries, *predictor, seed, cp));
    }

    std::vector<double> acc, agr, lat;
    for (const auto& s : rep.seeds) {
        acc.push_back(s.accuracy);
        agr.push_back(s.agreement);
        lat.push_back(s.mean_latency_ms);
        rep.rejections += s.rejections;
    }
    std::tie(rep.mean_accuracy, rep.std_accuracy) = mean_std(acc);
    rep.mean_agreement = mean_std(agr).first;
    rep.mean_latency_ms = mean_std(lat).first;
    return rep;
}

std::pair<Dataset, Dataset> load_inputs(const RunConfig& cfg) {
    if (cfg.train_path.empty() || cfg.test_path.empty()) throw std::invalid_argument("config needs train and test paths");
    auto train = load_dataset(cfg.train_path);
    auto test = load_dataset(cfg.test_path);
    if (cfg.challenge_size == 0) return {std::move(train), std::move(test)};
    std::size_t size = cfg.challenge_size;
    if (size > test.size()) {
        std::clog << "metasel: challenge size " << size << " exceeds test set (" << test.size()
                  << "); using the full test set\n";
        size = test.size();
    }
    auto ch = challenge_subset(train, test, size, cfg.challenge_seed);
    return {std::move(train), std::move(ch.subset)};
}

RunConfig with_dataset_name(RunConfig cfg) {
    if (cfg.dataset_name.empty()) cfg.dataset_name = cfg.train_path.stem().string();
    return cfg;
}

ojson manifest(const RunConfig& cfg, const std::string& started, std::span<const std::string> outputs) {
    ojson m;
    m["config_hash"] = hex64(fnv1a64(cfg.to_json().dump()));
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["git_revision"] = "unknown";
    m["version"] = "0.1.0";
    m["outputs"] = outputs;
    return m;
}

}  // namespace

void RunConfig::validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
    backend.validate();
    const auto mode = effective_prompt_mode();
    if ((mode == PromptMode::zero_shot_cot) != (selector == SelectorKind::zero_shot_cot)) {
        throw std::invalid_argument("zero_shot_cot prompt mode goes with the zero_shot_cot selector only");
    }
}

PromptMode RunConfig::effective_prompt_mode() const noexcept {
    return prompt_mode ? *prompt_mode : prompt_mode_for(selector);
}

ojson RunConfig::to_json() const {
    ojson j;
    j["train"] = train_path.generic_string();
    j["test"] = test_path.generic_string();
    j["dataset"] = dataset_name;
    j["selector"] = std::string(to_string(selector));
    j["selector_params"] = params.to_json();
    j["k"] = k;
    j["backend"] = backend_to_json(backend);
    j["prompt_mode"] = std::string(to_string(effective_prompt_mode()));
    j["seeds"] = seeds;
    j["challenge_size"] = challenge_size;
    j["challenge_seed"] = challenge_seed;
    j["output_dir"] = output_dir.generic_string();
    j["trace"] = trace;
    j["checkpoint_every"] = checkpoint_every;
    j["max_queries"] = max_queries;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
    RunConfig c;
    auto path_of = [&](const char* key) -> fs::path {
        auto it = j.find(key);
        if (it == j.end() || it->get<std::string>().empty()) return {};
        fs::path p = it->get<std::string>();
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    try {
        c.train_path = path_of("train");
        c.test_path = path_of("test");
        c.output_dir = path_of("output_dir");
        c.dataset_name = j.value("dataset", "");
        if (auto it = j.find("selector"); it != j.end()) c.selector = selector_kind_from_string(it->get<std::string>());
        if (auto it = j.find("selector_params"); it != j.end()) c.params = SelectorParams::from_json(*it);
        c.k = j.value("k", c.k);
        if (auto it = j.find("backend"); it != j.end()) c.backend = backend_from_json(*it);
        if (auto it = j.find("prompt_mode"); it != j.end() && !it->is_null()) {
            c.prompt_mode = prompt_mode_from_string(it->get<std::string>());
        }
        if (auto it = j.find("seeds"); it != j.end()) c.seeds = it->get<std::vector<std::uint64_t>>();
        c.challenge_size = j.value("challenge_size", c.challenge_size);
        c.challenge_seed = j.value("challenge_seed", c.challenge_seed);
        c.trace = j.value("trace", c.trace);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.max_queries = j.value("max_queries", c.max_queries);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

ojson Report::to_json(bool include_trace) const {
    ojson j;
    j["method"] = method;
    j["dataset"] = dataset;
    j["model"] = model;
    j["k"] = k;
    j["mean_accuracy"] = mean_accuracy;
    j["std_accuracy"] = std_accuracy;
    j["mean_agreement"] = mean_agreement;
    j["rejections"] = rejections;
    j["seeds"] = ojson::array();
    for (const auto& s : seeds) {
        ojson sj;
        sj["seed"] = s.seed;
        sj["n_queries"] = s.n_queries;
        sj["n_correct"] = s.n_correct;
        sj["accuracy"] = s.accuracy;
        sj["agreement"] = s.agreement;
        sj["rejections"] = s.rejections;
        sj["selector_state"] = s.selector_state;
        if (include_trace && !s.trace.empty()) {
            sj["trace"] = ojson::array();
            for (const auto& t : s.trace) sj["trace"].push_back(trace_to_json(t));
        }
        j["seeds"].push_back(std::move(sj));
    }
    j["config"] = config;
    return j;
}

ojson Report::timing_json() const {
    ojson j;
    j["method"] = method;
    j["dataset"] = dataset;
    j["mean_selection_latency_ms"] = mean_latency_ms;
    j["seeds"] = ojson::array();
    for (const auto& s : seeds) {
        j["seeds"].push_back({{"seed", s.seed},
                              {"mean_selection_latency_ms", s.mean_latency_ms},
                              {"offline_seconds", s.offline_seconds}});
    }
    return j;
}

std::string Report::to_csv(bool header) const {
    std::string out;
    if (header) out = "method,dataset,model,seed,k,accuracy,agreement,rejections\n";
    for (const auto& s : seeds) {
        out += csv_field(method) + ',' + csv_field(dataset) + ',' + csv_field(model) + ',' + std::to_string(s.seed) +
               ',' + std::to_string(k) + ',' + fmt(s.accuracy) + ',' + fmt(s.agreement) + ',' +
               std::to_string(s.rejections) + '\n';
    }
    return out;
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

Report run_experiment(const RunConfig& cfg, const Dataset& train, const Dataset& queries) {
    return run_impl(cfg, train, queries, {});
}

Report run_experiment(const RunConfig& cfg_in) {
    const auto started = utc_now();
    const RunConfig cfg = with_dataset_name(cfg_in);
    cfg.validate();
    auto [train, queries] = load_inputs(cfg);

    fs::path ckpt_dir;
    if (!cfg.output_dir.empty()) {
        ckpt_dir = cfg.output_dir / "checkpoints";
        fs::create_directories(ckpt_dir);
    }
    Report rep = run_impl(cfg, train, queries, ckpt_dir);
    if (!cfg.output_dir.empty()) {
        write_text(cfg.output_dir / "report.json", rep.to_json().dump(2) + "\n");
        write_text(cfg.output_dir / "timing.json", rep.timing_json().dump(2) + "\n");
        write_text(cfg.output_dir / "results.csv", rep.to_csv());
        const std::vector<std::string> outputs{"report.json", "timing.json", "results.csv"};
        write_text(cfg.output_dir / "manifest.json", manifest(cfg, started, outputs).dump(2) + "\n");
        fs::remove_all(ckpt_dir);
    }
    return rep;
}

double label_agreement_at_k(SelectorKind kind, const SelectorParams& params, const Dataset& train,
                            const Dataset& queries, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (queries.empty()) return 0.0;
    auto pool = CandidatePool::build(train);
    auto selector = make_selector(kind, params, pool, seed);
    double total = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const QueryContext q{queries[i].text, i};
        auto sel = selector->select(q, kind == SelectorKind::zero_shot_cot ? 0 : k);
        std::size_t matches = 0;
        for (auto id : sel.demo_ids) matches += pool->examples[id].label == queries[i].label;
        total += static_cast<double>(matches) / static_cast<double>(k);
        if (is_online(kind)) selector->update(q, sel, matches > 0 ? 1 : 0);
    }
    return total / static_cast<double>(queries.size());
}

std::vector<std::size_t> default_k_values() { return {3, 5, 10, 20}; }

std::vector<MetaSize> default_meta_sizes() {
    return {{"no_meta", 0, 0}, {"small", 20, 100}, {"default", 60, 300}, {"large", 120, 600}};
}

std::vector<AblationPoint> ablation_sweep(const RunConfig& cfg, const Dataset& train, const Dataset& queries,
                                          SweepKind sweep, std::span<const std::size_t> k_values,
                                          std::span<const MetaSize> meta_sizes) {
    std::vector<AblationPoint> points;
    if (sweep == SweepKind::k_values) {
        const auto defaults = default_k_values();
        if (k_values.empty()) k_values = defaults;
        for (auto k : k_values) {
            RunConfig c = cfg;
            c.k = k;
            points.push_back({"k=" + std::to_string(k), run_experiment(c, train, queries)});
        }
        return points;
    }
    const auto defaults = default_meta_sizes();
    if (meta_sizes.empty()) meta_sizes = defaults;
    for (const auto& size : meta_sizes) {
        RunConfig c = cfg;
        c.selector = SelectorKind::meta_sel;
        c.prompt_mode.reset();
        if (size.n_queries == 0 && size.n_candidates == 0) {
            LinearScorer s;
            s.theta.assign(FeatureVector::kDim, 0.0);
            for (std::size_t i = 0; i < FeatureVector::kDim; ++i) {
                if (c.params.meta.feature_order[i] == Feature::sim) s.theta[i] = 1.0;
                s.feature_names.emplace_back(feature_name(c.params.meta.feature_order[i]));
            }
            c.params.fixed_scorer = std::move(s);
        } else {
            c.params.fixed_scorer.reset();
            c.params.meta.n_queries = std::min(size.n_queries, train.size());
            c.params.meta.n_candidates = std::min(size.n_candidates, train.size());
        }
        points.push_back({size.name, run_experiment(c, train, queries)});
    }
    return points;
}

std::vector<AblationPoint> ablation_sweep(const RunConfig& cfg_in, SweepKind sweep,
                                          std::span<const std::size_t> k_values,
                                          std::span<const MetaSize> meta_sizes) {
    const auto started = utc_now();
    const RunConfig cfg = with_dataset_name(cfg_in);
    cfg.validate();
    auto [train, queries] = load_inputs(cfg);
    auto points = ablation_sweep(cfg, train, queries, sweep, k_values, meta_sizes);
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        ojson j;
        j["sweep"] = sweep == SweepKind::k_values ? "k_values" : "meta_sizes";
        j["points"] = ojson::array();
        for (const auto& p : points) j["points"].push_back({{"setting", p.setting}, {"report", p.report.to_json(false)}});
        write_text(cfg.output_dir / "ablation.json", j.dump(2) + "\n");
        write_text(cfg.output_dir / "ablation.csv", ablation_csv(points));
        const std::vector<std::string> outputs{"ablation.json", "ablation.csv"};
        write_text(cfg.output_dir / "manifest.json", manifest(cfg, started, outputs).dump(2) + "\n");
    }
    return points;
}

std::string ablation_csv(std::span<const AblationPoint> points) {
    std::string out = "setting,method,dataset,model,seed,k,accuracy,agreement,rejections\n";
    for (const auto& p : points) {
        const auto rows = p.report.to_csv(false);
        std::istringstream in(rows);
        for (std::string line; std::getline(in, line);) out += csv_field(p.setting) + ',' + line + '\n';
    }
    return out;
}

WeightRecord weight_record(const MetaSelModel& model, std::string dataset, std::uint64_t seed) {
    return {std::move(dataset), seed, model.weight(Feature::sim), model.weight(Feature::len_ratio), model.scorer.bias};
}

WeightTable export_weights(std::vector<WeightRecord> records) {
    WeightTable table;
    table.records = std::move(records);
    std::vector<std::string> order;
    std::map<std::string, std::vector<const WeightRecord*>> by_dataset;
    for (const auto& r : table.records) {
        if (!by_dataset.count(r.dataset)) order.push_back(r.dataset);
        by_dataset[r.dataset].push_back(&r);
    }
    for (const auto& name : order) {
        std::vector<double> ws, wl, b;
        for (const auto* r : by_dataset[name]) {
            ws.push_back(r->w_sim);
            wl.push_back(r->w_len);
            b.push_back(r->intercept);
        }
        WeightSummary s;
        s.dataset = name;
        std::tie(s.w_sim_mean, s.w_sim_std) = mean_std(ws);
        std::tie(s.w_len_mean, s.w_len_std) = mean_std(wl);
        std::tie(s.intercept_mean, s.intercept_std) = mean_std(b);
        table.summary.push_back(s);
    }
    return table;
}

WeightTable export_weights(std::span<const Dataset> datasets, std::span<const std::uint64_t> seeds,
                           const MetaConfig& meta_cfg, const TrainConfig& train_cfg) {
    std::vector<WeightRecord> records;
    for (const auto& ds : datasets) {
        MetaConfig m = meta_cfg;
        m.n_queries = std::min(m.n_queries, ds.size());
        m.n_candidates = std::min(m.n_candidates, ds.size());
        for (auto seed : seeds) records.push_back(weight_record(train_metasel(ds, m, train_cfg, seed), ds.name(), seed));
    }
    return export_weights(std::move(records));
}

ojson WeightTable::to_json() const {
    ojson j;
    j["records"] = ojson::array();
    for (const auto& r : records) {
        j["records"].push_back(
            {{"dataset", r.dataset}, {"seed", r.seed}, {"w_sim", r.w_sim}, {"w_len", r.w_len}, {"intercept", r.intercept}});
    }
    j["summary"] = ojson::array();
    for (const auto& s : summary) {
        j["summary"].push_back({{"dataset", s.dataset},
                                {"w_sim_mean", s.w_sim_mean},
                                {"w_sim_std", s.w_sim_std},
                                {"w_len_mean", s.w_len_mean},
                                {"w_len_std", s.w_len_std},
                                {"intercept_mean", s.intercept_mean},
                                {"intercept_std", s.intercept_std}});
    }
    return j;
}

std::string WeightTable::to_csv() const {
    std::string out = "dataset,seed,w_sim,w_len,intercept\n";
    for (const auto& r : records) {
        out += csv_field(r.dataset) + ',' + std::to_string(r.seed) + ',' + fmt(r.w_sim) + ',' + fmt(r.w_len) + ',' +
               fmt(r.intercept) + '\n';
    }
    for (const auto& s : summary) {
        out += csv_field(s.dataset) + ",mean," + fmt(s.w_sim_mean) + ',' + fmt(s.w_len_mean) + ',' +
               fmt(s.intercept_mean) + '\n';
        out += csv_field(s.dataset) + ",std," + fmt(s.w_sim_std) + ',' + fmt(s.w_len_std) + ',' +
               fmt(s.intercept_std) + '\n';
    }
    return out;
}

}  // namespace metasel
