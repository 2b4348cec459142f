// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"

#include "dscls/data.hpp"
#include "dscls/rng.hpp"
#include "test_util.hpp"

using namespace dscls;

namespace {

// Independent RFC 4180 writer: every field quoted, quotes doubled, CRLF records.
std::string quote_all(const std::vector<CsvRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += '"';
            for (char c : row[i]) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
        }
        out += "\r\n";
    }
    return out;
}

std::string random_field(CounterRng& rng) {
    static const std::vector<std::string> pieces = {"a", "b", ",", "\"", "\n", "\r\n", " ", "नमस्ते", "x,y", "\"\""};
    std::string s;
    const std::size_t n = rng.below(6);
    for (std::size_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
    return s;
}

std::vector<std::string> words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

} // namespace

TEST_CASE("task schemas") {
    CHECK(TaskSchema::subtask_b().classes == std::vector<std::string>{"non-hate", "hate"});
    CHECK(TaskSchema::subtask_c().classes == std::vector<std::string>{"individual", "organization", "community"});
    CHECK(TaskSchema::from_name("subtask-c") == TaskSchema::subtask_c());
    CHECK(TaskSchema::from_name("subtask_b") == TaskSchema::subtask_b());
    CHECK_THROWS_AS(TaskSchema::from_name("subtask_a"), DataError);
    const auto c = TaskSchema::subtask_c();
    CHECK(c.parse_label("organization") == 1);
    CHECK(c.parse_label("2") == 2);
    CHECK_FALSE(c.parse_label("3").has_value());
    CHECK_FALSE(c.parse_label("Organization").has_value());
}

TEST_CASE("labeled CSV loading") {
    const auto b = parse_labeled_csv("text,label\nएक,hate\nदो,non-hate\nतीन,hate\n", TaskSchema::subtask_b());
    REQUIRE(b.size() == 3);
    CHECK(b[0].label == 1);
    CHECK(b[1].label == 0);
    CHECK(b[2].label == 1);
    CHECK(b[1].text == "दो");

    CHECK_THROWS_WITH_AS(parse_labeled_csv("text,label\na,individual\nb,Org\n", TaskSchema::subtask_c()),
                         "unknown label 'Org' at row 2", DataError);
    CHECK_THROWS_WITH_AS(parse_labeled_csv("tweet,label\na,hate\n", TaskSchema::subtask_b()), "missing column 'text'",
                         DataError);
    CHECK_THROWS_WITH_AS(parse_labeled_csv("text,label\nab\xff,hate\n", TaskSchema::subtask_b()),
                         "malformed UTF-8 at byte offset 13", DataError);

    const auto custom = parse_labeled_csv("id,body,cls\n7,hello,1\n", TaskSchema::subtask_b(), "body", "cls");
    REQUIRE(custom.size() == 1);
    CHECK(custom[0] == LabeledExample{"hello", 1});
}

TEST_CASE("a quoted field with a comma and a newline is one value") {
    const auto rows = parse_csv("text,label\n\"hello, world\nsecond line\",hate\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1] == CsvRow{"hello, world\nsecond line", "hate"});
    const auto ex = parse_labeled_csv("text,label\r\n\"say \"\"hi\"\", ok\",hate\r\n", TaskSchema::subtask_b());
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].text == "say \"hi\", ok");
}

TEST_CASE("parse_csv agrees with an independent quoting writer") {
    CounterRng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t cols = 1 + rng.below(4);
        std::vector<CsvRow> rows(1 + rng.below(5));
        for (auto& row : rows) {
            for (std::size_t c = 0; c < cols; ++c) row.push_back(random_field(rng));
        }
        CHECK(parse_csv(quote_all(rows)) == rows);
        CHECK(parse_csv(format_csv(rows)) == rows);
    }
}

TEST_CASE("write then load is the identity") {
    CounterRng rng(32);
    const auto schema = TaskSchema::subtask_c();
    std::vector<LabeledExample> data;
    for (int i = 0; i < 100; ++i) data.push_back({random_field(rng) + "क", static_cast<int>(rng.below(3))});
    test::TempDir dir("data");
    write_csv(dir / "x.csv", data, schema);
    CHECK(load_csv(dir / "x.csv", schema) == data);
    CHECK(parse_labeled_csv(to_csv(data, schema), schema) == data);
}

TEST_CASE("text loading and prediction output") {
    test::TempDir dir("texts");
    test::spit(dir / "a.csv", "id,text\n1,\"a,b\"\n2,c\n");
    CHECK(load_texts(dir / "a.csv") == std::vector<std::string>{"a,b", "c"});
    test::spit(dir / "b.csv", "tweet\nx\ny\n");
    CHECK(load_texts(dir / "b.csv") == std::vector<std::string>{"x", "y"});
    const std::vector<Prediction> preds = {{"hate", 0.75}, {"non-hate", 2.0 / 3.0}};
    CHECK(predictions_csv(preds) == "index,predicted_label,confidence\n0,hate,0.750000\n1,non-hate,0.666667\n");
}

TEST_CASE("batches cover every example exactly once") {
    CounterRng rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = rng.below(200);
        const std::size_t bs = 1 + rng.below(20);
        const bool shuffle = rng.below(2) == 1;
        const auto idx = batch_indices(n, bs, shuffle, trial);
        std::vector<std::size_t> seen;
        for (std::size_t b = 0; b < idx.size(); ++b) {
            CHECK(idx[b].size() == (b + 1 == idx.size() ? n - bs * b : bs));
            seen.insert(seen.end(), idx[b].begin(), idx[b].end());
        }
        if (!shuffle) CHECK(std::is_sorted(seen.begin(), seen.end()));
        std::sort(seen.begin(), seen.end());
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        CHECK(seen == all);
    }
}

TEST_CASE("batch counts and seeding") {
    const auto big = batch_indices(19019, 16, true, 1);
    CHECK(big.size() == 1189);
    CHECK(big.back().size() == 11);
    const auto small = batch_indices(10, 64, true, 1);
    REQUIRE(small.size() == 1);
    CHECK(small[0].size() == 10);
    CHECK(batch_indices(50, 7, true, 9) == batch_indices(50, 7, true, 9));
    CHECK(batch_indices(50, 7, true, 9) != batch_indices(50, 7, true, 10));
    CHECK_THROWS_AS(batch_indices(5, 0, false, 0), DataError);

    std::vector<LabeledExample> data;
    for (int i = 0; i < 10; ++i) data.push_back({std::to_string(i), i % 2});
    const auto bs = batches(data, 4, true, 3);
    const auto idx = batch_indices(10, 4, true, 3);
    REQUIRE(bs.size() == idx.size());
    for (std::size_t b = 0; b < bs.size(); ++b) {
        for (std::size_t k = 0; k < bs[b].size(); ++k) CHECK(bs[b][k] == data[idx[b][k]]);
    }
}

TEST_CASE("shuffles are roughly uniform over positions") {
    const std::size_t n = 5;
    std::vector<std::vector<int>> counts(n, std::vector<int>(n, 0));
    const int trials = 20000;
    for (int s = 0; s < trials; ++s) {
        const auto p = permutation(n, static_cast<std::uint64_t>(s));
        for (std::size_t pos = 0; pos < n; ++pos) ++counts[pos][p[pos]];
    }
    for (const auto& row : counts) {
        for (int c : row) CHECK(std::abs(c - trials / 5) < 300);
    }
}

TEST_CASE("synthetic corpus balance and determinism") {
    const auto c = TaskSchema::subtask_c();
    const auto data = synth_corpus(c, 475, 5, 1.0);
    std::map<int, int> counts;
    for (const auto& ex : data) ++counts[ex.label];
    CHECK(counts == std::map<int, int>{{0, 159}, {1, 158}, {2, 158}});
    CHECK(synth_corpus(c, 475, 5, 0.5) == synth_corpus(c, 475, 5, 0.5));
    CHECK(synth_corpus(c, 475, 5, 0.5) != synth_corpus(c, 475, 6, 0.5));
    CHECK_THROWS_AS(synth_corpus(c, 2, 1, 0.5), DataError);
    CHECK_THROWS_AS(synth_corpus(c, 20, 1, 1.5), DataError);
    for (std::size_t n : {3u, 4u, 5u, 100u, 101u}) {
        std::map<int, int> k;
        for (const auto& ex : synth_corpus(c, n, 1, 0.3)) ++k[ex.label];
        int lo = 1 << 30, hi = 0;
        for (auto [label, count] : k) {
            lo = std::min(lo, count);
            hi = std::max(hi, count);
        }
        CHECK(k.size() == 3);
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("fully separable corpus is classified perfectly by marker presence") {
    const auto c = TaskSchema::subtask_c();
    std::map<std::string, int> owner;
    for (int k = 0; k < 3; ++k) {
        for (const auto& m : synth_markers(static_cast<std::size_t>(k))) owner[m] = k;
    }
    const auto data = synth_corpus(c, 32, 2, 1.0);
    for (const auto& ex : data) {
        std::vector<int> votes(3, 0);
        for (const auto& w : words(ex.text)) {
            if (auto it = owner.find(w); it != owner.end()) ++votes[static_cast<std::size_t>(it->second)];
        }
        const int pred = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        CHECK(votes[static_cast<std::size_t>(pred)] > 0);
        CHECK(pred == ex.label);
    }
}

TEST_CASE("zero separability gives chance accuracy to a bag-of-words classifier") {
    const auto c = TaskSchema::subtask_c();
    const auto data = synth_corpus(c, 3000, 3, 0.0);
    std::set<std::string> markers;
    for (int k = 0; k < 3; ++k) {
        for (const auto& m : synth_markers(static_cast<std::size_t>(k))) markers.insert(m);
    }
    // Naive Bayes fit on the first half, scored on the second.
    std::vector<std::map<std::string, double>> freq(3);
    std::vector<double> totals(3, 0.0);
    for (std::size_t i = 0; i < 1500; ++i) {
        for (const auto& w : words(data[i].text)) {
            CHECK_FALSE(markers.contains(w));
            freq[static_cast<std::size_t>(data[i].label)][w] += 1.0;
            totals[static_cast<std::size_t>(data[i].label)] += 1.0;
        }
    }
    int correct = 0;
    for (std::size_t i = 1500; i < 3000; ++i) {
        std::vector<double> score(3, 0.0);
        for (std::size_t k = 0; k < 3; ++k) {
            for (const auto& w : words(data[i].text)) score[k] += std::log((freq[k][w] + 1.0) / (totals[k] + 30.0));
        }
        correct += std::max_element(score.begin(), score.end()) - score.begin() == data[i].label;
    }
    CHECK(std::abs(correct / 1500.0 - 1.0 / 3.0) < 0.06);
}

TEST_CASE("dataset splits") {
    const auto data = synth_corpus(TaskSchema::subtask_b(), 100, 1, 0.5);
    SplitSpec spec;
    spec.train_count = 70;
    spec.valid_count = 20;
    spec.test_count = 10;
    spec.seed = 4;
    const auto s = split_dataset(data, spec);
    CHECK(s.train.size() == 70);
    CHECK(s.valid.size() == 20);
    CHECK(s.test.size() == 10);
    std::multiset<std::string> before, after;
    for (const auto& ex : data) before.insert(ex.text + "|" + std::to_string(ex.label));
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
        for (const auto& ex : *part) after.insert(ex.text + "|" + std::to_string(ex.label));
    }
    CHECK(before == after);

    spec.test_count = 11;
    CHECK_THROWS_AS(split_dataset(data, spec), DataError);

    SplitSpec frac;
    const auto f = split_dataset(data, frac);
    CHECK(f.train.size() == 70);
    CHECK(f.valid.size() == 15);
    CHECK(f.test.size() == 15);
    CHECK_THROWS_AS(split_dataset(std::span(data).first(2), frac), DataError);
}
