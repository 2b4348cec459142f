// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"

#include "dscls/checkpoint.hpp"
#include "dscls/engine.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace dscls;

namespace {

struct Trained {
    TaskSchema schema = TaskSchema::subtask_c();
    std::vector<LabeledExample> train_data = synth_corpus(schema, 30, 1, 0.6);
    std::vector<LabeledExample> valid_data = synth_corpus(schema, 30, 2, 0.6);
    Vocabulary vocab = test::corpus_vocab(train_data);
    RunConfig config = test::tiny_run_config(schema, vocab.size());
    TrainResult result;

    Trained() {
        config.train.epochs = 2;
        result = train(config, vocab, schema, train_data, valid_data);
    }

    Checkpoint checkpoint() const { return {config, schema, vocab, result.params, result.optim}; }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

template <class T>
T read_le(const std::string& bytes, std::size_t pos) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return v;
}

std::size_t params_offset(const std::string& bytes) { return 16 + read_le<std::uint64_t>(bytes, 8); }

} // namespace

TEST_CASE("byte layout") {
    const auto& t = trained();
    const std::string bytes = serialize_checkpoint(t.checkpoint());
    CHECK(bytes.substr(0, 4) == "DSC1");
    CHECK(read_le<std::uint32_t>(bytes, 4) == 1);
    const auto json_len = read_le<std::uint64_t>(bytes, 8);
    const auto meta = nlohmann::json::parse(bytes.substr(16, json_len));
    CHECK(meta.at("config").at("model").at("hidden") == 16);
    CHECK(meta.at("task").at("classes").size() == 3);
    CHECK(meta.contains("vocab"));

    std::size_t pos = params_offset(bytes);
    const auto n = read_le<std::uint32_t>(bytes, pos);
    CHECK(n == t.result.params.size());
    pos += 4;
    // Records follow map order, so the first is the lexicographically smallest name.
    const auto& [first_name, first] = *t.result.params.begin();
    const auto name_len = read_le<std::uint32_t>(bytes, pos);
    CHECK(bytes.substr(pos + 4, name_len) == first_name);
    pos += 4 + name_len;
    REQUIRE(read_le<std::uint32_t>(bytes, pos) == first.shape.size());
    pos += 4;
    for (auto d : first.shape) {
        CHECK(read_le<std::uint64_t>(bytes, pos) == d);
        pos += 8;
    }
    for (std::size_t k = 0; k < first.numel(); ++k) {
        const std::uint32_t raw = read_le<std::uint32_t>(bytes, pos + 4 * k);
        float f;
        std::memcpy(&f, &raw, 4);
        CHECK(f == static_cast<float>(first.data[k]));
    }
}

TEST_CASE("save and load round trip") {
    const auto& t = trained();
    test::TempDir dir("ckpt");
    save_checkpoint(t.checkpoint(), dir / "model.dsc");
    const Checkpoint loaded = load_checkpoint(dir / "model.dsc");
    CHECK(loaded.config == t.config);
    CHECK(loaded.schema == t.schema);
    CHECK(loaded.vocab == t.vocab);
    CHECK(loaded.params == float32_snapshot(t.result.params));
    REQUIRE(loaded.optim.has_value());
    CHECK(loaded.optim->step == t.result.optim.step);
    CHECK(loaded.optim->schedule.total_steps == t.result.optim.schedule.total_steps);
    CHECK(loaded.optim->hyper.base_lr == t.result.optim.hyper.base_lr);
    CHECK(loaded.optim->m.size() == t.result.optim.m.size());

    const auto before = evaluate(t.result.params, t.config.model, t.vocab, t.schema, t.valid_data, 64, 32);
    const auto after = evaluate(loaded.params, loaded.config.model, loaded.vocab, loaded.schema, t.valid_data, 64, 32);
    const auto a = ablation_row_values(before), b = ablation_row_values(after);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-6);
    CHECK(after == t.result.log.epochs[t.result.log.best_epoch - 1].validation);

    Checkpoint bare = t.checkpoint();
    bare.optim.reset();
    CHECK_FALSE(deserialize_checkpoint(serialize_checkpoint(bare)).optim.has_value());
    CHECK(serialize_checkpoint(deserialize_checkpoint(serialize_checkpoint(bare))) == serialize_checkpoint(bare));
}

TEST_CASE("truncation mid-tensor names the record") {
    const auto& t = trained();
    const std::string bytes = serialize_checkpoint(t.checkpoint());
    const std::string& name = t.result.params.begin()->first;
    const std::size_t data_start = params_offset(bytes) + 4 + 4 + name.size() + 4 + 8 * t.result.params.begin()->second.shape.size();
    try {
        deserialize_checkpoint(bytes.substr(0, data_start + 2));
        FAIL("expected a truncation error");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::Truncated);
        CHECK(std::string(e.what()) == "truncated tensor record '" + name + "'");
    }
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
        CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), CheckpointError);
    }
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CheckpointError);
}

TEST_CASE("shape mismatch against a requested configuration") {
    auto t = trained().checkpoint();
    t.config.model.hidden = 64;
    t.config.model.heads = 4;
    t.params = init_parameters(t.config.model, 1);
    t.optim.reset();
    const std::string bytes = serialize_checkpoint(t);
    ModelConfig request = t.config.model;
    request.hidden = 32;
    try {
        deserialize_checkpoint(bytes, request);
        FAIL("expected a shape mismatch");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::ShapeMismatch);
        const std::string what = e.what();
        CHECK(what == "shape mismatch for tensor 'classifier.weight': "
                      "checkpoint has [64x3], expected [32x3] (requested configuration)");
    }
    CHECK_NOTHROW(deserialize_checkpoint(bytes, t.config.model));
}

TEST_CASE("bad magic and version are distinct errors") {
    const std::string bytes = serialize_checkpoint(trained().checkpoint());
    std::string bad = bytes;
    bad[0] = 'X';
    try {
        deserialize_checkpoint(bad);
        FAIL("expected bad magic");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::BadMagic);
    }
    std::string v2 = bytes;
    v2[4] = 2;
    try {
        deserialize_checkpoint(v2);
        FAIL("expected a version mismatch");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::VersionMismatch);
    }
    try {
        load_checkpoint("/nonexistent/dir/model.dsc");
        FAIL("expected an io error");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::Io);
    }
}
