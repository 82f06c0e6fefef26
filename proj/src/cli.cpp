// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <utility>

#include <CLI11.hpp>

#include "metasel/bench.hpp"
#include "metasel/corpus.hpp"
#include "metasel/metasel.hpp"

namespace metasel {

namespace {

namespace fs = std::filesystem;

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

DatasetFormat parse_format(const std::string& name, const fs::path& path) {
    if (name == "auto") return format_from_path(path);
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "csv") return DatasetFormat::csv;
    throw std::invalid_argument("unknown format '" + name + "'");
}

/// Flags shared by bench and ablate; each one overrides the config file.
struct RunFlags {
    std::string config;
    std::string train, test, dataset, selector, params_json, backend, endpoint, model, prompt_mode;
    std::string output_dir;
    std::size_t k = 5, challenge_size = 1000, max_queries = 0, max_in_flight = 4;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    bool trace = false;

    CLI::Option* o_k = nullptr;
    CLI::Option* o_challenge = nullptr;
    CLI::Option* o_max_queries = nullptr;
    CLI::Option* o_in_flight = nullptr;
    CLI::Option* o_noise = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_seeds = nullptr;
    CLI::Option* o_trace = nullptr;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "Run config JSON; flags below override its values")->check(CLI::ExistingFile);
        app.add_option("--train", train, "Training pool (.jsonl or .csv)");
        app.add_option("--test", test, "Test set the challenge subset is drawn from");
        app.add_option("--dataset", dataset, "Dataset name used in reports (default: train file stem)");
        app.add_option("--selector", selector, "Selection method, e.g. meta_sel, random, diversity, ts_bandit");
        app.add_option("--selector-params", params_json, "Selector hyperparameters as a JSON object");
        o_k = app.add_option("--k", k, "Demonstrations per prompt")->check(CLI::PositiveNumber);
        app.add_option("--backend", backend, "http, oracle_one_match or oracle_noisy");
        app.add_option("--endpoint", endpoint, "HTTP endpoint base URL (also METASEL_LLM_ENDPOINT)");
        app.add_option("--model", model, "Model name sent to the HTTP endpoint");
        o_noise = app.add_option("--noise", noise, "Wrong-answer probability for oracle_noisy")->check(CLI::Range(0.0, 1.0));
        o_in_flight = app.add_option("--max-in-flight", max_in_flight, "Concurrent HTTP requests")->check(CLI::PositiveNumber);
        app.add_option("--prompt-mode", prompt_mode, "plain_icl, zero_shot_cot or few_shot_cot_passthrough");
        o_seeds = app.add_option("--seeds", seeds, "Seed list, comma separated")->delimiter(',');
        o_seed = app.add_option("--seed", seed, "Run a single seed (overrides --seeds)");
        o_challenge = app.add_option("--challenge-size", challenge_size, "Challenge subset size; 0 uses the test set as-is");
        o_max_queries = app.add_option("--max-queries", max_queries, "Stop after this many queries (0 = all)");
        app.add_option("--output-dir", output_dir, "Directory for report.json, results.csv, timing.json, manifest.json");
        o_trace = app.add_flag("--trace", trace, "Include a per-query trace in the report");
    }

    RunConfig resolve() const {
        RunConfig cfg = config.empty() ? RunConfig{} : RunConfig::from_file(config);
        if (!train.empty()) cfg.train_path = train;
        if (!test.empty()) cfg.test_path = test;
        if (!dataset.empty()) cfg.dataset_name = dataset;
        if (!selector.empty()) cfg.selector = selector_kind_from_string(selector);
        if (!params_json.empty()) cfg.params = SelectorParams::from_json(nlohmann::json::parse(params_json));
        if (o_k->count()) cfg.k = k;
        if (!backend.empty()) cfg.backend.kind = backend_kind_from_string(backend);
        if (!endpoint.empty()) cfg.backend.endpoint = endpoint;
        if (!model.empty()) cfg.backend.model = model;
        if (o_noise->count()) cfg.backend.noise = noise;
        if (o_in_flight->count()) cfg.backend.max_in_flight = max_in_flight;
        if (!prompt_mode.empty()) cfg.prompt_mode = prompt_mode_from_string(prompt_mode);
        if (o_seeds->count()) cfg.seeds = seeds;
        if (o_seed->count()) cfg.seeds = {seed};
        if (o_challenge->count()) cfg.challenge_size = challenge_size;
        if (o_max_queries->count()) cfg.max_queries = max_queries;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (o_trace->count()) cfg.trace = trace;
        cfg.validate();
        return cfg;
    }
};

void print_report(std::ostream& out, const Report& rep) {
    out << rep.method << " on " << rep.dataset << " (" << rep.model << ", k=" << rep.k << ")\n";
    for (const auto& s : rep.seeds) {
        out << "  seed " << s.seed << ": accuracy " << fmt6(s.accuracy) << ", agreement@k " << fmt6(s.agreement)
            << ", rejections " << s.rejections << ", selection " << fmt6(s.mean_latency_ms) << " ms/query\n";
    }
    out << "  mean accuracy " << fmt6(rep.mean_accuracy) << " +/- " << fmt6(rep.std_accuracy) << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Demonstration selection for few-shot intent classification", "metasel"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and optionally convert it");
    std::string ingest_input, ingest_output, ingest_format = "auto", ingest_out_format = "auto";
    std::uint64_t ingest_seed = 0;
    ingest->add_option("--input", ingest_input, "Dataset file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--format", ingest_format, "jsonl, csv or auto (by extension)");
    ingest->add_option("--output", ingest_output, "Write the validated dataset here");
    ingest->add_option("--output-format", ingest_out_format, "jsonl, csv or auto (by extension)");
    ingest->add_option("--seed", ingest_seed, "Accepted for uniformity; ingest is not random");

    // challenge
    auto* challenge = app.add_subcommand("challenge", "Write the precision-margin challenge subset");
    std::string ch_train, ch_test, ch_output;
    std::size_t ch_size = 1000;
    std::uint64_t ch_seed = 42;
    challenge->add_option("--train", ch_train, "Training set")->required()->check(CLI::ExistingFile);
    challenge->add_option("--test", ch_test, "Test set")->required()->check(CLI::ExistingFile);
    challenge->add_option("--size", ch_size, "Number of queries to keep")->check(CLI::PositiveNumber);
    challenge->add_option("--seed", ch_seed, "Seed for ordering queries without a margin");
    challenge->add_option("--output", ch_output, "Output dataset (.jsonl or .csv)")->required();

    // meta-train
    auto* train = app.add_subcommand("meta-train", "Train a Meta-Sel model bundle");
    std::string mt_train, mt_output;
    std::uint64_t mt_seed = 42;
    MetaConfig mt_meta;
    TrainConfig mt_cfg;
    train->add_option("--train", mt_train, "Training pool")->required()->check(CLI::ExistingFile);
    train->add_option("--output", mt_output, "Model bundle path")->required();
    train->add_option("--seed", mt_seed, "Meta-split seed");
    train->add_option("--n-queries", mt_meta.n_queries, "Meta-queries |Q|")->check(CLI::PositiveNumber);
    train->add_option("--n-candidates", mt_meta.n_candidates, "Meta-candidates |C|")->check(CLI::PositiveNumber);
    train->add_option("--C", mt_cfg.reg_inverse_strength, "Inverse L2 strength")->check(CLI::PositiveNumber);
    train->add_option("--max-iters", mt_cfg.max_iters, "Newton iteration cap")->check(CLI::PositiveNumber);

    // select
    auto* sel = app.add_subcommand("select", "Print the top-k demonstrations for a query");
    std::string sel_model, sel_query;
    std::size_t sel_k = 5;
    std::uint64_t sel_seed = 0;
    bool sel_exclude = false, sel_json = false;
    sel->add_option("--model", sel_model, "Model bundle")->required()->check(CLI::ExistingFile);
    sel->add_option("--query", sel_query, "Query utterance")->required();
    sel->add_option("--k", sel_k, "Number of demonstrations")->check(CLI::PositiveNumber);
    sel->add_option("--seed", sel_seed, "Accepted for uniformity; selection is deterministic");
    sel->add_flag("--exclude-exact", sel_exclude, "Skip pool entries whose text equals the query");
    sel->add_flag("--json", sel_json, "Emit JSON instead of tab-separated lines");

    // bench
    auto* bench = app.add_subcommand("bench", "Run an evaluation and write report files");
    RunFlags bench_flags;
    bench_flags.attach(*bench);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Run the k sweep or the meta-size sweep");
    RunFlags ablate_flags;
    ablate_flags.attach(*ablate);
    std::string sweep = "k";
    std::vector<std::size_t> k_values;
    ablate->add_option("--sweep", sweep, "k or meta")->check(CLI::IsMember({"k", "meta"}));
    ablate->add_option("--k-values", k_values, "k values for the k sweep")->delimiter(',');

    // export-weights
    auto* weights = app.add_subcommand("export-weights", "Tabulate learned Meta-Sel weights per dataset and seed");
    std::vector<std::string> ew_train, ew_models;
    std::vector<std::uint64_t> ew_seeds{42, 43, 44};
    std::uint64_t ew_seed = 0;
    std::string ew_output;
    bool ew_csv = false;
    MetaConfig ew_meta;
    auto* ew_train_opt = weights->add_option("--train", ew_train, "Training pool(s) to train on")->check(CLI::ExistingFile);
    weights->add_option("--models", ew_models, "Existing model bundles instead of training")->check(CLI::ExistingFile)
        ->excludes(ew_train_opt);
    auto* ew_seeds_opt = weights->add_option("--seeds", ew_seeds, "Seeds, comma separated")->delimiter(',');
    auto* ew_seed_opt = weights->add_option("--seed", ew_seed, "Single seed (overrides --seeds)");
    weights->add_option("--n-queries", ew_meta.n_queries, "Meta-queries |Q|")->check(CLI::PositiveNumber);
    weights->add_option("--n-candidates", ew_meta.n_candidates, "Meta-candidates |C|")->check(CLI::PositiveNumber);
    weights->add_option("--output", ew_output, "Write the table here instead of stdout");
    weights->add_flag("--csv", ew_csv, "CSV instead of JSON");
    (void)ew_seeds_opt;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) {
            const fs::path in = ingest_input;
            auto ds = load_dataset(in, parse_format(ingest_format, in));
            std::set<std::pair<std::string, std::string>> seen;
            std::size_t dups = 0;
            for (const auto& e : ds.examples()) dups += !seen.emplace(e.text, e.label).second;
            out << ds.name() << ": " << ds.size() << " examples, " << ds.labels().size() << " labels, " << dups
                << " duplicate pairs\n";
            if (!ingest_output.empty()) {
                const fs::path o = ingest_output;
                save_dataset(ds, o, parse_format(ingest_out_format, o));
                out << "wrote " << o.string() << "\n";
            }
        } else if (*challenge) {
            auto tr = load_dataset(ch_train);
            auto te = load_dataset(ch_test);
            auto ch = challenge_subset(tr, te, ch_size, ch_seed);
            save_dataset(ch.subset, ch_output, format_from_path(ch_output));
            out << "wrote " << ch.subset.size() << " queries to " << ch_output << "\n";
        } else if (*train) {
            auto ds = load_dataset(mt_train);
            auto model = train_metasel(ds, mt_meta, mt_cfg, mt_seed);
            save_model(model, mt_output);
            out << "meta pairs " << model.meta_pairs << ", w_sim " << fmt6(model.weight(Feature::sim)) << ", w_len "
                << fmt6(model.weight(Feature::len_ratio)) << ", bias " << fmt6(model.scorer.bias) << "\n";
            out << "offline time " << fmt6(model.offline_seconds) << " s, wrote " << mt_output << "\n";
        } else if (*sel) {
            auto model = load_model(sel_model);
            auto res = select(model, sel_query, sel_k, SelectOptions{sel_exclude});
            if (sel_json) {
                nlohmann::ordered_json j = nlohmann::ordered_json::array();
                for (std::size_t i = 0; i < res.demo_ids.size(); ++i) {
                    const auto& e = model.pool_examples[res.demo_ids[i]];
                    j.push_back({{"id", e.id}, {"score", res.scores[i]}, {"label", e.label}, {"text", e.text}});
                }
                out << j.dump(2) << "\n";
            } else {
                for (std::size_t i = 0; i < res.demo_ids.size(); ++i) {
                    const auto& e = model.pool_examples[res.demo_ids[i]];
                    out << e.id << '\t' << fmt6(res.scores[i]) << '\t' << e.label << '\t' << e.text << '\n';
                }
            }
        } else if (*bench) {
            auto rep = run_experiment(bench_flags.resolve());
            print_report(out, rep);
        } else if (*ablate) {
            auto cfg = ablate_flags.resolve();
            auto points = ablation_sweep(cfg, sweep == "k" ? SweepKind::k_values : SweepKind::meta_sizes, k_values);
            for (const auto& p : points) {
                out << p.setting << ": mean accuracy " << fmt6(p.report.mean_accuracy) << " +/- "
                    << fmt6(p.report.std_accuracy) << ", agreement@k " << fmt6(p.report.mean_agreement) << "\n";
            }
        } else if (*weights) {
            if (ew_seed_opt->count()) ew_seeds = {ew_seed};
            WeightTable table;
            if (!ew_models.empty()) {
                std::vector<WeightRecord> records;
                for (const auto& path : ew_models) {
                    auto model = load_model(path);
                    records.push_back(weight_record(model, model.pool_examples.name(), model.seed));
                }
                table = export_weights(std::move(records));
            } else {
                if (ew_train.empty()) throw std::invalid_argument("export-weights needs --train or --models");
                std::vector<Dataset> datasets;
                for (const auto& p : ew_train) datasets.push_back(load_dataset(p));
                table = export_weights(datasets, ew_seeds, ew_meta);
            }
            const std::string text = ew_csv ? table.to_csv() : table.to_json().dump(2) + "\n";
            if (ew_output.empty()) {
                out << text;
            } else {
                std::ofstream f(ew_output, std::ios::binary);
                if (!(f << text)) throw Error("cannot write " + ew_output);
                out << "wrote " << ew_output << "\n";
            }
        }
    } catch (const std::exception& e) {
        err << "metasel: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace metasel
