// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "dscls/config.hpp"

using namespace dscls;

TEST_CASE("defaults") {
    const TrainConfig t;
    CHECK(t.epochs == 3);
    CHECK(t.train_batch == 16);
    CHECK(t.eval_batch == 64);
    CHECK(t.max_len == 256);
    CHECK(t.base_lr == 2e-5);
    CHECK(t.warmup_fraction == 0.1);
    CHECK(t.clip_norm == 1.0);
    CHECK(t.weight_decay == 0.01);
    CHECK(t.selection_metric == SelectionMetric::WeightedF1);
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("json round trip") {
    RunConfig c;
    c.model.hidden = 48;
    c.model.heads = 6;
    c.model.head_mode = HeadMode::Softmax;
    c.train.base_lr = 3.3e-5;
    c.train.seed = 0xfeedULL;
    c.train.selection_metric = SelectionMetric::Accuracy;
    c.train.select = SelectMode::Last;
    c.train.freeze_encoder = true;
    const auto j = nlohmann::json::parse(to_json(c).dump());
    CHECK(run_config_from_json(j) == c);
    // Partial overlays keep the base.
    const auto partial = run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 9}})"), c);
    CHECK(partial.train.epochs == 9);
    CHECK(partial.model == c.model);
}

TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_WITH_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"epoch": 2}})")),
                         "unknown train config field 'epoch'", ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"optim": {}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "three"}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"train": {"selection_metric": "f2"}})")),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"model": []})")), ConfigError);
}

TEST_CASE("set_field resolves names and aliases") {
    RunConfig c;
    set_field(c, "max_len", "128");
    CHECK(c.train.max_len == 128);
    CHECK(c.model.max_len == ModelConfig{}.max_len);
    set_field(c, "model.max_len", "512");
    CHECK(c.model.max_len == 512);
    set_field(c, "lr", "1e-5");
    CHECK(c.train.base_lr == 1e-5);
    set_field(c, "batch", "8");
    CHECK(c.train.train_batch == 8);
    set_field(c, "hidden", "32");
    CHECK(c.model.hidden == 32);
    set_field(c, "train.selection_metric", "accuracy");
    CHECK(c.train.selection_metric == SelectionMetric::Accuracy);
    set_field(c, "head_mode", "softmax");
    CHECK(c.model.head_mode == HeadMode::Softmax);
    CHECK_THROWS_AS(set_field(c, "train.hidden", "3"), ConfigError);
    CHECK_THROWS_AS(set_field(c, "nonsense", "3"), ConfigError);
}

TEST_CASE("diff_fields lists exactly the changed fields") {
    RunConfig a, b;
    CHECK(diff_fields(a, b).empty());
    b.train.base_lr = 1e-5;
    CHECK(diff_fields(a, b) == std::vector<std::string>{"train.base_lr"});
    b.model.hidden = 128;
    CHECK(diff_fields(a, b) == std::vector<std::string>{"model.hidden", "train.base_lr"});
}

TEST_CASE("validation") {
    RunConfig c;
    c.model.max_len = 256;
    CHECK_NOTHROW(c.validate());
    c.model.max_len = 128;
    CHECK_THROWS_WITH_AS(c.validate(), "max_len 256 exceeds model position capacity 128", ConfigError);
    TrainConfig t;
    t.epochs = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.base_lr = 0.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.warmup_fraction = 1.5;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.max_len = 1;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.clip_norm = 0.0;
    CHECK_NOTHROW(t.validate());
}
