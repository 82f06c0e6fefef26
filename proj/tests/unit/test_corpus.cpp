// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "metasel/common.hpp"
#include "metasel/corpus.hpp"
#include "metasel/vectorize.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace metasel;
using testing_support::TempDir;

namespace {

Dataset make(std::vector<std::pair<std::string, std::string>> rows, std::string name = "toy") {
    std::vector<Example> ex;
    for (auto& [t, l] : rows) ex.push_back({0, t, l, std::nullopt});
    return Dataset(std::move(name), std::move(ex));
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("jsonl load assigns ids in file order and sorts labels") {
    TempDir dir;
    auto p = dir.write("banking.jsonl",
                       "{\"text\":\"freeze my card\",\"label\":\"card_freeze\"}\n"
                       "{\"text\":\"lost card\",\"label\":\"card_lost\"}\n");
    auto ds = load_dataset(p);
    CHECK(ds.size() == 2);
    CHECK(ds.labels() == std::vector<std::string>{"card_freeze", "card_lost"});
    CHECK(ds[0].id == 0);
    CHECK(ds[1].id == 1);
    CHECK(ds[1].text == "lost card");
    CHECK(ds.name() == "banking");
}

TEST_CASE("label vocabulary is the sorted distinct label set") {
    auto ds = make({{"one", "zeta"}, {"two", "alpha"}, {"three", "zeta"}, {"four", "mid"}});
    CHECK(ds.labels() == std::vector<std::string>{"alpha", "mid", "zeta"});
    CHECK(ds.label_ids() == std::vector<std::size_t>{2, 0, 2, 1});
    CHECK(ds.label_counts() == std::vector<std::size_t>{1, 1, 2});
    CHECK(ds.label_index("mid") == 1);
    CHECK_FALSE(ds.label_index("none").has_value());
}

TEST_CASE("csv blank text names the data row") {
    TempDir dir;
    auto p = dir.write("d.csv", "text,label\nhello there,greet\n   ,greet\nbye now,farewell\n");
    try {
        load_dataset(p);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("jsonl missing field names the line") {
    TempDir dir;
    auto p = dir.write("d.jsonl", "{\"text\":\"a b\",\"label\":\"x\"}\n{\"text\":\"c d\"}\n");
    try {
        load_dataset(p);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("label") != std::string::npos);
    }
}

TEST_CASE("empty file is an error") {
    TempDir dir;
    CHECK_THROWS_AS(load_dataset(dir.write("e.jsonl", "")), DataError);
    CHECK_THROWS_AS(load_dataset(dir.write("e.csv", "text,label\n")), DataError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), DataError);
}

TEST_CASE("duplicate pairs are kept") {
    TempDir dir;
    auto p = dir.write("dup.jsonl",
                       "{\"text\":\"same\",\"label\":\"x\"}\n{\"text\":\"same\",\"label\":\"x\"}\n");
    CHECK(load_dataset(p).size() == 2);
}

TEST_CASE("csv quoting and rationale column") {
    TempDir dir;
    auto p = dir.write("q.csv",
                       "label,text,rationale\n"
                       "greet,\"hello, \"\"friend\"\"\",\n"
                       "bye,\"see\nyou\",because it ends\n");
    auto ds = load_dataset(p);
    REQUIRE(ds.size() == 2);
    CHECK(ds[0].text == "hello, \"friend\"");
    CHECK_FALSE(ds[0].rationale.has_value());
    CHECK(ds[1].text == "see\nyou");
    CHECK(ds[1].rationale == "because it ends");
}

TEST_CASE("load save load round-trip is identical in both formats") {
    TempDir dir;
    std::vector<Example> ex{{0, "hello, \"you\"", "greet", std::nullopt},
                            {0, "naïve café ☕", "order", std::string("mentions a drink")},
                            {0, "line\nbreak", "greet", std::nullopt}};
    Dataset ds("rt", ex);
    for (auto fmt : {DatasetFormat::jsonl, DatasetFormat::csv}) {
        const auto p = dir / (fmt == DatasetFormat::csv ? "rt.csv" : "rt.jsonl");
        save_dataset(ds, p, fmt);
        auto back = load_dataset(p, fmt);
        CHECK(back == ds);
        save_dataset(back, p, fmt);
        CHECK(load_dataset(p, fmt) == ds);
    }
}

TEST_CASE("meta split sizes, validity and determinism") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 1000; ++i) rows.push_back({"utterance number " + std::to_string(i), i % 2 ? "odd" : "even"});
    auto ds = make(rows);
    auto s = sample_meta_split(ds, 60, 300, 42);
    CHECK(s.query_ids.size() == 60);
    CHECK(s.candidate_ids.size() == 300);
    CHECK(s.query_ids.size() * s.candidate_ids.size() == 18000);
    CHECK(std::set<std::size_t>(s.query_ids.begin(), s.query_ids.end()).size() == 60);
    CHECK(std::set<std::size_t>(s.candidate_ids.begin(), s.candidate_ids.end()).size() == 300);
    for (auto id : s.query_ids) CHECK(id < ds.size());
    for (auto id : s.candidate_ids) CHECK(id < ds.size());
    CHECK(sample_meta_split(ds, 60, 300, 42) == s);
    CHECK_FALSE(sample_meta_split(ds, 60, 300, 43) == s);
}

TEST_CASE("meta split of the whole set is a permutation") {
    auto ds = make({{"aa", "x"}, {"bb", "y"}, {"cc", "x"}, {"dd", "y"}, {"ee", "x"}});
    auto s = sample_meta_split(ds, 5, 5, 7);
    auto q = s.query_ids, c = s.candidate_ids;
    std::sort(q.begin(), q.end());
    std::sort(c.begin(), c.end());
    CHECK(q == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(c == q);
    CHECK_THROWS_AS(sample_meta_split(ds, 6, 1, 7), DataError);
    CHECK_THROWS_AS(sample_meta_split(ds, 1, 6, 7), DataError);
}

TEST_CASE("challenge subset of the full test set returns all of it") {
    auto train = make({{"card freeze block", "card"}, {"freeze card now", "card"},
                       {"transfer money abroad", "transfer"}, {"send money transfer", "transfer"}});
    auto test = make({{"freeze my card", "card"}, {"money transfer please", "transfer"},
                      {"card transfer", "card"}, {"weather today", "card"}});
    auto ch = challenge_subset(train, test, test.size(), 1);
    CHECK(ch.subset.size() == test.size());
    auto ids = ch.source_ids;
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("equidistant point ranks first and margins match a dense oracle") {
    // Two classes with disjoint vocabularies; "alpha gamma" is equally close to both centroids.
    auto train = make({{"alpha beta", "a"}, {"alpha alpha beta", "a"}, {"gamma delta", "g"}, {"gamma gamma delta", "g"}});
    auto test = make({{"beta beta beta", "a"}, {"delta delta", "g"}, {"alpha gamma", "a"}, {"beta alpha", "a"}});

    oracle::DenseTfidf dense(train.texts());
    std::vector<std::vector<long double>> centroid(2, std::vector<long double>(dense.vocab.size(), 0.0L));
    for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = 0; j < dense.vocab.size(); ++j) centroid[train.label_ids()[i]][j] += dense.rows[i][j] / 2.0L;
    }
    std::vector<double> expected;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto q = dense.embed(test[i].text);
        std::vector<long double> cs;
        for (const auto& c : centroid) {
            long double dot = 0, nn = 0;
            for (std::size_t j = 0; j < c.size(); ++j) {
                dot += c[j] * q[j];
                nn += c[j] * c[j];
            }
            cs.push_back(dot / std::sqrt(nn));
        }
        expected.push_back(static_cast<double>(std::fabs(cs[0] - cs[1])));
    }
    CHECK(expected[2] == doctest::Approx(0.0).epsilon(1e-12));

    auto ch = challenge_subset(train, test, 2, 9);
    REQUIRE(ch.subset.size() == 2);
    CHECK(ch.source_ids[0] == 2);
    CHECK(ch.subset[0].text == "alpha gamma");
    CHECK(ch.subset[0].id == 0);
    for (std::size_t i = 0; i < ch.source_ids.size(); ++i) {
        CHECK(ch.margins[i] == doctest::Approx(expected[ch.source_ids[i]]).epsilon(1e-12));
    }
    // Margins are a prefix of the full sorted margin list.
    auto full = challenge_subset(train, test, test.size(), 9);
    for (std::size_t i = 0; i < ch.margins.size(); ++i) CHECK(ch.margins[i] == full.margins[i]);
    CHECK(std::is_sorted(full.margins.begin(), full.margins.end()));
}

TEST_CASE("challenge subset errors") {
    auto one_class = make({{"alpha beta", "a"}, {"gamma delta", "a"}});
    auto test = make({{"alpha", "a"}});
    CHECK_THROWS_AS(challenge_subset(one_class, test, 1, 0), DataError);
    auto two = make({{"alpha beta", "a"}, {"gamma delta", "b"}});
    CHECK_THROWS_AS(challenge_subset(two, test, 2, 0), DataError);
}

TEST_CASE("queries without known tokens fill the tail in seeded order") {
    auto train = make({{"alpha beta", "a"}, {"gamma delta", "b"}});
    auto test = make({{"alpha", "a"}, {"zzz qqq", "a"}, {"the of", "b"}, {"yyy", "b"}});
    auto c1 = challenge_subset(train, test, 4, 5);
    auto c2 = challenge_subset(train, test, 4, 5);
    CHECK(c1.source_ids == c2.source_ids);
    CHECK(c1.source_ids[0] == 0);
    CHECK(std::isfinite(c1.margins[0]));
    for (std::size_t i = 1; i < 4; ++i) CHECK(std::isnan(c1.margins[i]));
}

}  // TEST_SUITE
