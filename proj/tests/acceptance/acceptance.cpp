// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS, FAIL or SKIP line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metasel/bench.hpp"
#include "metasel/llm.hpp"
#include "metasel/metasel.hpp"
#include "metasel/optim.hpp"
#include "metasel/synthetic.hpp"
#include "metasel/vectorize.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace metasel;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kAgreementLift = 0.40;
constexpr double kAccuracyLift = 0.20;
constexpr double kRandomCalibrationTol = 0.03;
constexpr double kAblationSlack = 0.01;
constexpr double kSynthWsimMin = 1.0;
constexpr double kWlenMax = 0.5;
constexpr double kRealWsimMin = 3.0;
constexpr double kRealWsimMax = 30.0;
constexpr std::size_t kMetaPairs = 18000;
constexpr double kDenseTol = 1e-9;
constexpr double kLatencyMs = 50.0;
constexpr double kLiveParseRate = 0.80;

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const std::vector<std::uint64_t> kSeeds{42, 43, 44};

/// The 10-class, 100-per-class generated corpus with 30% shared noise tokens.
const SyntheticCorpus& synthetic() {
    static const SyntheticCorpus corpus = make_synthetic_corpus(SyntheticConfig{});
    return corpus;
}

RunConfig oracle_run(SelectorKind kind, std::size_t k) {
    RunConfig c;
    c.selector = kind;
    c.k = k;
    c.backend.kind = BackendKind::oracle_one_match;
    c.seeds = kSeeds;
    c.challenge_size = 0;
    c.dataset_name = "synthetic";
    return c;
}

Outcome ac1_gradient() {
    Rng rng(2026);
    std::uniform_int_distribution<int> n_dist(1, 50);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    const int problems = 120;
    for (int p = 0; p < problems; ++p) {
        const int n = n_dist(rng);
        FeatureMatrix x(2);
        std::vector<int> y;
        for (int i = 0; i < n; ++i) {
            const double row[2] = {unit(rng), 3.0 * unit(rng)};
            x.push_row(row);
            y.push_back(i == 0 ? 0 : i == 1 ? 1 : static_cast<int>(unit(rng) < 0.4));
        }
        if (n == 1) y[0] = static_cast<int>(unit(rng) < 0.5);
        std::vector<double> w(n);
        for (auto& wi : w) wi = 0.2 + unit(rng);
        TrainConfig cfg;
        cfg.reg_inverse_strength = std::exp(normal(rng));
        cfg.bias_penalized = p % 2 == 1;

        LinearScorer s;
        s.theta = {normal(rng) * 2.0, normal(rng) * 2.0};
        s.bias = normal(rng);
        const auto g = loss_and_gradient(s, x, y, w, cfg);

        auto loss_at = [&](std::size_t coord, double delta) {
            LinearScorer t = s;
            if (coord < 2) t.theta[coord] += delta;
            else t.bias += delta;
            return loss_and_gradient(t, x, y, w, cfg).loss;
        };
        for (std::size_t c = 0; c < 3; ++c) {
            const double fd = (loss_at(c, kFdStep) - loss_at(c, -kFdStep)) / (2.0 * kFdStep);
            const double analytic = c < 2 ? g.theta_grad[c] : g.bias_grad;
            worst = std::max(worst, std::fabs(analytic - fd) / std::max(1.0, std::fabs(fd)));
        }
    }
    const std::string d = std::to_string(problems) + " problems, worst relative error " + sci(worst);
    return worst <= kGradRelTol ? pass(d) : fail(d);
}

Outcome ac2_topk() {
    Rng rng(7);
    // A coarse grid makes ties common.
    std::uniform_int_distribution<int> grid(0, 10);
    std::size_t checked = 0;
    for (std::size_t n = 1; n <= 12; ++n) {
        for (std::size_t k = 1; k <= std::min<std::size_t>(3, n); ++k) {
            for (int trial = 0; trial < 20; ++trial) {
                std::vector<double> p(n);
                for (auto& v : p) v = grid(rng) / 10.0;
                // Products in canonical (descending) order make equal multisets compare equal.
                auto value = [&](const std::vector<std::size_t>& subset) {
                    std::vector<double> q;
                    for (auto i : subset) q.push_back(p[i]);
                    std::sort(q.rbegin(), q.rend());
                    return success_probability(q);
                };
                double best = -1.0;
                oracle::for_each_subset(n, k, [&](const std::vector<std::size_t>& s) { best = std::max(best, value(s)); });
                const auto chosen = top_k_indices(p, k);
                if (value(chosen) != best) {
                    return fail("n=" + std::to_string(n) + " k=" + std::to_string(k) + ": top-k " + num(value(chosen), 17) +
                                " < best " + num(best, 17));
                }
                ++checked;
            }
        }
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        LinearScorer s;
        s.theta = {normal(rng) * 4.0, normal(rng)};
        s.bias = normal(rng);
        const std::size_t n = 12;
        std::vector<double> lin, prob;
        for (std::size_t i = 0; i < n; ++i) {
            // Quantized features produce exact ties, broken by index in both rankings.
            const double f[2] = {std::round(unit(rng) * 8.0) / 8.0, std::round(unit(rng) * 4.0) / 2.0};
            lin.push_back(s.linear_score(f));
            prob.push_back(predict_proba(s, f));
        }
        if (oracle::rank_all(lin) != oracle::rank_all(prob)) return fail("probability and linear rankings differ");
        for (std::size_t k = 1; k <= 3; ++k) {
            const auto top = top_k_indices(prob, k);
            const auto ref = oracle::rank_all(lin);
            if (!std::equal(top.begin(), top.end(), ref.begin())) return fail("top_k_indices disagrees with full ranking");
        }
    }
    return pass(std::to_string(checked) + " pools enumerated, 200 ranking checks");
}

Outcome ac3_lift() {
    const auto& data = synthetic();
    double agree_meta = 0.0, agree_rand = 0.0;
    for (auto seed : kSeeds) {
        agree_meta += label_agreement_at_k(SelectorKind::meta_sel, {}, data.train, data.test, 5, seed);
        agree_rand += label_agreement_at_k(SelectorKind::random, {}, data.train, data.test, 5, seed);
    }
    agree_meta /= kSeeds.size();
    agree_rand /= kSeeds.size();
    const auto meta = run_experiment(oracle_run(SelectorKind::meta_sel, 5), data.train, data.test);
    const auto rand = run_experiment(oracle_run(SelectorKind::random, 5), data.train, data.test);
    const double agree_lift = agree_meta - agree_rand;
    const double acc_lift = meta.mean_accuracy - rand.mean_accuracy;
    const std::string d = "agreement@5 " + num(agree_meta) + " vs " + num(agree_rand) + " (lift " + num(agree_lift) +
                          "), accuracy " + num(meta.mean_accuracy) + " vs " + num(rand.mean_accuracy) + " (lift " +
                          num(acc_lift) + ")";
    return agree_lift >= kAgreementLift && acc_lift >= kAccuracyLift ? pass(d) : fail(d);
}

Outcome ac4_random_calibration() {
    const auto& data = synthetic();
    const auto rep = run_experiment(oracle_run(SelectorKind::random, 5), data.train, data.test);
    const double closed_form = 1.0 - std::pow(0.9, 5);
    const double diff = std::fabs(rep.mean_accuracy - closed_form);
    std::string d = "mean accuracy " + num(rep.mean_accuracy) + " over " + std::to_string(rep.seeds[0].n_queries) +
                    " queries x " + std::to_string(rep.seeds.size()) + " seeds, closed form " + num(closed_form) +
                    ", per seed";
    for (const auto& s : rep.seeds) d += " " + num(s.accuracy);
    return diff <= kRandomCalibrationTol ? pass(d) : fail(d);
}

Outcome ac5_ablation() {
    const auto& data = synthetic();
    const std::vector<std::size_t> ks{3, 5, 10, 20};
    const auto points = ablation_sweep(oracle_run(SelectorKind::meta_sel, 5), data.train, data.test, SweepKind::k_values, ks);
    std::string d = "accuracy over k:";
    bool ok = points.size() == ks.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
        d += " " + points[i].setting + "=" + num(points[i].report.mean_accuracy);
        if (i > 0 && points[i].report.mean_accuracy < points[i - 1].report.mean_accuracy - kAblationSlack) ok = false;
    }
    return ok ? pass(d) : fail(d);
}

Outcome ac6_weights() {
    const auto& data = synthetic();
    std::vector<Dataset> sets{Dataset("synthetic", data.train.examples())};
    const auto table = export_weights(sets, kSeeds);
    bool ok = table.records.size() == kSeeds.size();
    std::string d = "synthetic";
    for (const auto& r : table.records) {
        d += " [seed " + std::to_string(r.seed) + ": w_sim " + num(r.w_sim) + ", w_len " + num(r.w_len) + "]";
        ok = ok && r.w_sim > kSynthWsimMin && std::fabs(r.w_len) < kWlenMax;
    }

    // Real corpora are optional: METASEL_DATA_DIR may hold <name>_train.{jsonl,csv}.
    const char* dir = std::getenv("METASEL_DATA_DIR");
    std::vector<Dataset> real;
    if (dir) {
        for (const char* name : {"banking77", "clinc", "hwu64", "liu54"}) {
            for (const char* ext : {".jsonl", ".csv"}) {
                const auto p = std::filesystem::path(dir) / (std::string(name) + "_train" + ext);
                if (std::filesystem::exists(p)) {
                    real.push_back(load_dataset(p));
                    break;
                }
            }
        }
    }
    if (real.empty()) {
        d += "; real-data part skipped (no files in METASEL_DATA_DIR)";
    } else {
        const auto rt = export_weights(real, kSeeds);
        for (const auto& r : rt.records) {
            d += "; " + r.dataset + " seed " + std::to_string(r.seed) + ": w_sim " + num(r.w_sim) + ", w_len " + num(r.w_len);
            ok = ok && r.w_sim >= kRealWsimMin && r.w_sim <= kRealWsimMax && std::fabs(r.w_len) < kWlenMax;
        }
    }
    return ok ? pass(d) : fail(d);
}

Outcome ac7_determinism() {
    const auto& data = synthetic();
    const auto a = train_metasel(data.train, MetaConfig{}, TrainConfig{}, 42);
    const auto b = train_metasel(data.train, MetaConfig{}, TrainConfig{}, 42);
    const bool bundles_equal = serialize_model(a) == serialize_model(b);

    testing_support::TempDir dir;
    save_dataset(data.train, dir / "train.jsonl", DatasetFormat::jsonl);
    save_dataset(data.test, dir / "test.jsonl", DatasetFormat::jsonl);
    auto cfg = oracle_run(SelectorKind::meta_sel, 5);
    cfg.train_path = dir / "train.jsonl";
    cfg.test_path = dir / "test.jsonl";
    cfg.challenge_size = 300;
    cfg.output_dir = dir / "run";
    run_experiment(cfg);
    const auto first = testing_support::read_file(dir / "run" / "report.json");
    const auto first_csv = testing_support::read_file(dir / "run" / "results.csv");
    std::filesystem::remove_all(dir / "run");
    run_experiment(cfg);
    const bool reports_equal = !first.empty() && first == testing_support::read_file(dir / "run" / "report.json") &&
                               first_csv == testing_support::read_file(dir / "run" / "results.csv");

    const std::string d = "meta pairs " + std::to_string(a.meta_pairs) + ", bundles " +
                          (bundles_equal ? "identical" : "differ") + ", reports " + (reports_equal ? "identical" : "differ");
    return a.meta_pairs == kMetaPairs && bundles_equal && reports_equal ? pass(d) : fail(d);
}

Outcome ac8_dense() {
    Rng rng(99);
    const std::vector<std::string> words{"card", "lost", "pin",  "reset", "top",   "up",    "transfer", "fee",
                                         "the",  "my",   "is",   "atm",   "cash",  "limit", "refund",   "exchange",
                                         "rate", "a",    "über", "naïve", "x",     "2fa",   "BALANCE",  "Card"};
    std::uniform_int_distribution<std::size_t> n_docs(1, 50), n_words(0, 10), pick(0, words.size() - 1);
    double worst = 0.0;
    int corpora = 0;
    while (corpora < 100) {
        std::vector<std::string> docs(n_docs(rng));
        for (auto& d : docs) {
            const auto len = n_words(rng);
            for (std::size_t i = 0; i < len; ++i) d += (i ? (i % 3 ? " " : ", ") : "") + words[pick(rng)];
        }
        oracle::DenseTfidf dense(docs);
        if (dense.vocab.empty()) continue;
        const auto vec = fit_vectorizer(docs);
        const auto pool = PoolMatrix::build(vec, docs);
        for (int q = 0; q < 5; ++q) {
            std::string query;
            for (std::size_t i = 0, len = n_words(rng); i < len; ++i) query += (i ? " " : "") + words[pick(rng)];
            const auto got = cosine_to_pool(vec.transform(query), pool);
            const auto want = dense.cosine_to_rows(query);
            if (got.size() != want.size()) return fail("pool size mismatch");
            for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::fabs(got[i] - want[i]));
        }
        ++corpora;
    }
    const std::string d = "100 corpora, max abs difference " + sci(worst);
    return worst <= kDenseTol ? pass(d) : fail(d);
}

Outcome ac9_latency() {
    SyntheticConfig sc;
    sc.train_per_class = 1000;
    sc.n_test = 200;
    const auto data = make_synthetic_corpus(sc);
    const auto model = train_metasel(data.train, MetaConfig{}, TrainConfig{}, 42);
    if (model.pool.rows() != 10000) return fail("pool has " + std::to_string(model.pool.rows()) + " rows");
    double total_ms = 0.0;
    for (const auto& q : data.test.examples()) {
        const auto start = std::chrono::steady_clock::now();
        const auto res = select(model, q.text, 5);
        total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (res.demo_ids.size() != 5) return fail("short selection");
    }
    const double mean = total_ms / data.test.size();
    const std::string d = "10000-candidate pool, mean " + num(mean, 3) + " ms over " + std::to_string(data.test.size()) +
                          " queries";
    return mean < kLatencyMs ? pass(d) : fail(d);
}

/// Small hand-written intent pool for the live endpoint check.
std::pair<Dataset, Dataset> live_corpus() {
    const std::vector<std::pair<const char*, const char*>> train{
        {"When will my new card arrive?", "card_arrival"},
        {"My card still has not been delivered", "card_arrival"},
        {"How long does card delivery take?", "card_arrival"},
        {"Is there a way to track my card shipment?", "card_arrival"},
        {"I lost my card yesterday", "lost_card"},
        {"My card was stolen, please block it", "lost_card"},
        {"I can't find my bank card anywhere", "lost_card"},
        {"Someone took my wallet with my card", "lost_card"},
        {"How do I change my PIN?", "change_pin"},
        {"I want a new PIN for my card", "change_pin"},
        {"Can I reset my PIN at an ATM?", "change_pin"},
        {"I forgot my PIN and need to set another", "change_pin"},
        {"How do I add money to my account?", "top_up"},
        {"My top up did not go through", "top_up"},
        {"Can I top up with a bank transfer?", "top_up"},
        {"What is the limit for topping up?", "top_up"},
    };
    const std::vector<std::pair<const char*, const char*>> test{
        {"Where is my card? I ordered it two weeks ago", "card_arrival"},
        {"card not arrived yet", "card_arrival"},
        {"Has my replacement card been sent?", "card_arrival"},
        {"What is the delivery status of my card?", "card_arrival"},
        {"The card I ordered never came", "card_arrival"},
        {"Please freeze my card, I lost it", "lost_card"},
        {"My purse was stolen along with my card", "lost_card"},
        {"I misplaced my debit card", "lost_card"},
        {"I think I left my card at a shop", "lost_card"},
        {"Report a missing card", "lost_card"},
        {"How can I update my PIN number?", "change_pin"},
        {"Need to set a different PIN", "change_pin"},
        {"Where do I go to change the PIN code?", "change_pin"},
        {"Can my PIN be changed online?", "change_pin"},
        {"I would like to pick a new PIN", "change_pin"},
        {"How do I put funds on my card?", "top_up"},
        {"Top up failed, why?", "top_up"},
        {"Can I add cash to my balance?", "top_up"},
        {"Which cards can I use to top up?", "top_up"},
        {"My account top up is pending", "top_up"},
    };
    auto make = [](const char* name, const auto& rows) {
        std::vector<Example> ex;
        for (const auto& [text, label] : rows) ex.push_back({0, text, label, std::nullopt});
        return Dataset(name, std::move(ex));
    };
    return {make("live_train", train), make("live_test", test)};
}

Outcome ac10_live() {
    const char* endpoint = std::getenv(kEndpointEnv);
    if (!endpoint || !*endpoint) return skip(std::string(kEndpointEnv) + " not set");
    auto [train, test] = live_corpus();
    testing_support::TempDir dir;
    save_dataset(train, dir / "train.jsonl", DatasetFormat::jsonl);
    save_dataset(test, dir / "test.jsonl", DatasetFormat::jsonl);
    RunConfig cfg;
    cfg.train_path = dir / "train.jsonl";
    cfg.test_path = dir / "test.jsonl";
    cfg.selector = SelectorKind::meta_sel;
    cfg.params.meta.n_queries = 4;
    cfg.params.meta.n_candidates = 12;
    cfg.k = 3;
    cfg.backend.kind = BackendKind::http;
    cfg.backend = cfg.backend.with_env_overrides();
    if (const char* m = std::getenv("METASEL_LLM_MODEL"); m && *m) cfg.backend.model = m;
    cfg.seeds = {42};
    cfg.challenge_size = 0;
    cfg.max_queries = 20;
    cfg.output_dir = dir / "run";
    Report rep;
    try {
        rep = run_experiment(cfg);
    } catch (const std::exception& e) {
        return fail(std::string("run failed: ") + e.what());
    }
    const auto& s = rep.seeds.at(0);
    const double parse_rate = s.n_queries ? 1.0 - double(s.rejections) / s.n_queries : 0.0;
    bool well_formed = false;
    try {
        const auto j = nlohmann::json::parse(testing_support::read_file(dir / "run" / "report.json"));
        well_formed = j.at("method") == "meta_sel" && j.at("seeds").size() == 1 && j.at("mean_accuracy").is_number();
    } catch (const std::exception&) {
    }
    const std::string d = cfg.backend.model + " at " + cfg.backend.endpoint + ": " + std::to_string(s.n_queries) +
                          " queries, parse rate " + num(parse_rate) + ", accuracy " + num(s.accuracy) +
                          (well_formed ? ", report well-formed" : ", report malformed");
    return s.n_queries == 20 && parse_rate >= kLiveParseRate && well_formed ? pass(d) : fail(d);
}

struct Criterion {
    const char* id;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"AC-1", 5.0, ac1_gradient},          {"AC-2", 10.0, ac2_topk},    {"AC-3", 60.0, ac3_lift},
        {"AC-4", 30.0, ac4_random_calibration}, {"AC-5", 120.0, ac5_ablation}, {"AC-6", 30.0, ac6_weights},
        {"AC-7", 10.0, ac7_determinism},      {"AC-8", 10.0, ac8_dense},   {"AC-9", 60.0, ac9_latency},
        {"AC-10", 600.0, ac10_live},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.status == Status::pass && secs > c.budget_s) {
            o = fail(o.detail + "; over the " + num(c.budget_s, 0) + " s budget");
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        std::cout << c.id << " " << tag << " " << o.detail << " (" << num(secs, 2) << " s)" << std::endl;
        failures += o.status == Status::fail;
    }
    return failures == 0 ? 0 : 1;
}
