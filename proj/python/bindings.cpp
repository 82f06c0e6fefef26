// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metasel/bench.hpp"
#include "metasel/corpus.hpp"
#include "metasel/llm.hpp"
#include "metasel/metasel.hpp"
#include "metasel/optim.hpp"
#include "metasel/prompt.hpp"
#include "metasel/synthetic.hpp"
#include "metasel/vectorize.hpp"

namespace py = pybind11;
using namespace metasel;

namespace {

/// Fitted vectorizer plus the pool it was fitted on.
struct TextIndex {
    Vectorizer vectorizer;
    PoolMatrix pool;

    explicit TextIndex(const std::vector<std::string>& texts)
        : vectorizer(fit_vectorizer(texts)), pool(PoolMatrix::build(vectorizer, texts)) {}
};

Dataset make_dataset(const std::vector<std::string>& texts, const std::vector<std::string>& labels,
                     const std::string& name) {
    if (texts.size() != labels.size()) throw std::invalid_argument("texts and labels differ in length");
    std::vector<Example> ex;
    ex.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) ex.push_back({i, texts[i], labels[i], std::nullopt});
    return Dataset(name, std::move(ex));
}

py::tuple selection_tuple(const SelectionResult& r) { return py::make_tuple(r.demo_ids, r.scores); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Demonstration selection for few-shot intent classification";

    // Translators run newest first, so the base class is registered before its subclasses.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("texts"), py::arg("labels"), py::arg("name") = "dataset")
        .def_property_readonly("name", &Dataset::name)
        .def_property_readonly("labels", &Dataset::labels)
        .def_property_readonly("texts", &Dataset::texts)
        .def_property_readonly("example_labels", [](const Dataset& d) {
            std::vector<std::string> out;
            for (const auto& e : d.examples()) out.push_back(e.label);
            return out;
        })
        .def("__len__", &Dataset::size)
        .def("__getitem__", [](const Dataset& d, std::size_t i) {
            const auto& e = d[i];
            return py::make_tuple(e.id, e.text, e.label);
        });

    m.def("load_dataset", py::overload_cast<const std::filesystem::path&>(&load_dataset), py::arg("path"));
    m.def(
        "save_dataset",
        [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p, format_from_path(p)); },
        py::arg("dataset"), py::arg("path"));
    m.def(
        "sample_meta_split",
        [](const Dataset& d, std::size_t nq, std::size_t nc, std::uint64_t seed) {
            auto s = sample_meta_split(d, nq, nc, seed);
            return py::make_tuple(s.query_ids, s.candidate_ids);
        },
        py::arg("dataset"), py::arg("n_queries"), py::arg("n_candidates"), py::arg("seed"));
    m.def(
        "challenge_subset",
        [](const Dataset& train, const Dataset& test, std::size_t size, std::uint64_t seed) {
            return challenge_subset(train, test, size, seed).subset;
        },
        py::arg("train"), py::arg("test"), py::arg("size"), py::arg("seed"));
    m.def(
        "synthetic_corpus",
        [](std::size_t n_classes, std::size_t train_per_class, std::size_t n_test, double noise, std::uint64_t seed) {
            SyntheticConfig c;
            c.n_classes = n_classes;
            c.train_per_class = train_per_class;
            c.n_test = n_test;
            c.noise_fraction = noise;
            c.seed = seed;
            auto corpus = make_synthetic_corpus(c);
            return py::make_tuple(corpus.train, corpus.test);
        },
        py::arg("n_classes") = 10, py::arg("train_per_class") = 100, py::arg("n_test") = 1000,
        py::arg("noise") = 0.3, py::arg("seed") = 42);

    m.def("tokenize", &tokenize, py::arg("text"));
    py::class_<TextIndex>(m, "TextIndex")
        .def(py::init<const std::vector<std::string>&>(), py::arg("texts"))
        .def_property_readonly("vocabulary", [](const TextIndex& t) { return t.vectorizer.vocabulary(); })
        .def_property_readonly("idf", [](const TextIndex& t) { return t.vectorizer.idf(); })
        .def("transform", [](const TextIndex& t, std::string_view text) {
            auto v = t.vectorizer.transform(text);
            return py::make_tuple(v.indices, v.values);
        })
        .def("cosine", [](const TextIndex& t, std::string_view query) {
            return t.pool.cosine_to_pool(t.vectorizer.transform(query));
        }, py::arg("query"));

    m.def("sigmoid", &sigmoid, py::arg("z"));
    m.def(
        "fit_logistic",
        [](const std::vector<std::vector<double>>& x, const std::vector<int>& y, std::optional<std::vector<double>> w,
           double c, int max_iters) {
            if (x.empty()) throw std::invalid_argument("fit_logistic: no rows");
            FeatureMatrix fm(x.front().size());
            for (const auto& row : x) fm.push_row(row);
            const auto weights = w ? *w : balanced_weights(y);
            TrainConfig cfg;
            cfg.reg_inverse_strength = c;
            cfg.max_iters = max_iters;
            auto s = fit_logistic(fm, y, weights, cfg);
            py::dict info;
            info["iterations"] = s.info.iterations;
            info["converged"] = s.info.converged;
            info["final_objective"] = s.info.final_objective;
            info["final_grad_norm"] = s.info.final_grad_norm;
            return py::make_tuple(s.theta, s.bias, info);
        },
        py::arg("x"), py::arg("y"), py::arg("weights") = py::none(), py::arg("C") = 1.0, py::arg("max_iters") = 200);

    py::class_<MetaSelModel>(m, "MetaSelModel")
        .def_property_readonly("theta", [](const MetaSelModel& mm) { return mm.scorer.theta; })
        .def_property_readonly("bias", [](const MetaSelModel& mm) { return mm.scorer.bias; })
        .def_property_readonly("feature_names", [](const MetaSelModel& mm) { return mm.scorer.feature_names; })
        .def_property_readonly("meta_pairs", [](const MetaSelModel& mm) { return mm.meta_pairs; })
        .def_property_readonly("offline_seconds", [](const MetaSelModel& mm) { return mm.offline_seconds; })
        .def_property_readonly("pool", [](const MetaSelModel& mm) { return mm.pool_examples; })
        .def("weight", [](const MetaSelModel& mm, const std::string& name) {
            if (name == feature_name(Feature::sim)) return mm.weight(Feature::sim);
            if (name == feature_name(Feature::len_ratio)) return mm.weight(Feature::len_ratio);
            throw std::invalid_argument("unknown feature '" + name + "'");
        })
        .def(
            "select",
            [](const MetaSelModel& mm, std::string_view q, std::size_t k, bool exclude) {
                return selection_tuple(select(mm, q, k, SelectOptions{exclude}));
            },
            py::arg("query"), py::arg("k") = 5, py::arg("exclude_exact_match") = false)
        .def("save", [](const MetaSelModel& mm, const std::filesystem::path& p) { save_model(mm, p); })
        .def("to_bytes", [](const MetaSelModel& mm) { return py::bytes(serialize_model(mm)); });

    m.def(
        "train_metasel",
        [](const Dataset& train, std::size_t nq, std::size_t nc, std::uint64_t seed, double c) {
            MetaConfig meta;
            meta.n_queries = nq;
            meta.n_candidates = nc;
            TrainConfig tc;
            tc.reg_inverse_strength = c;
            return train_metasel(train, meta, tc, seed);
        },
        py::arg("train"), py::arg("n_queries") = 60, py::arg("n_candidates") = 300, py::arg("seed") = 42,
        py::arg("C") = 1.0);
    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_from_bytes", [](const py::bytes& b) { return deserialize_model(std::string(b)); });

    m.def(
        "build_prompt",
        [](std::string_view query, const std::vector<std::pair<std::string, std::string>>& demos,
           const std::vector<std::string>& labels, const std::string& mode) {
            std::vector<Example> ex;
            for (const auto& [t, l] : demos) ex.push_back({ex.size(), t, l, std::nullopt});
            std::vector<const Example*> ptrs;
            for (const auto& e : ex) ptrs.push_back(&e);
            return build_prompt(query, ptrs, labels, prompt_mode_from_string(mode));
        },
        py::arg("query"), py::arg("demos"), py::arg("labels"), py::arg("mode") = "plain_icl");
    m.def(
        "parse_label",
        [](std::string_view raw, const std::vector<std::string>& vocabulary) { return parse_label(raw, vocabulary); },
        py::arg("raw"), py::arg("vocabulary"));
    m.def(
        "success_probability", [](const std::vector<double>& p) { return success_probability(p); },
        py::arg("match_probs"));
    m.def("generate_request_body", &generate_request_body, py::arg("model"), py::arg("prompt"));

    m.def(
        "_run_experiment",
        [](const std::string& config_json, const Dataset& train, const Dataset& queries) {
            auto cfg = RunConfig::from_json(nlohmann::json::parse(config_json));
            Report rep;
            {
                py::gil_scoped_release release;
                rep = run_experiment(cfg, train, queries);
            }
            auto j = rep.to_json();
            j["mean_selection_latency_ms"] = rep.mean_latency_ms;
            return j.dump();
        },
        py::arg("config_json"), py::arg("train"), py::arg("queries"));
    m.def(
        "_run_experiment_file",
        [](const std::filesystem::path& path) {
            auto cfg = RunConfig::from_file(path);
            py::gil_scoped_release release;
            return run_experiment(cfg).to_json().dump();
        },
        py::arg("path"));
    m.def(
        "label_agreement_at_k",
        [](const std::string& kind, const Dataset& train, const Dataset& queries, std::size_t k, std::uint64_t seed) {
            return label_agreement_at_k(selector_kind_from_string(kind), {}, train, queries, k, seed);
        },
        py::arg("selector"), py::arg("train"), py::arg("queries"), py::arg("k") = 5, py::arg("seed") = 42);
    m.def("selector_kinds", [] {
        std::vector<std::string> out;
        for (auto k : all_selector_kinds()) out.emplace_back(to_string(k));
        return out;
    });
}
