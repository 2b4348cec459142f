// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/config.hpp"

namespace dscls {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (train_batch < 1 || eval_batch < 1) throw ConfigError("batch sizes must be >= 1");
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction must be in [0,1]");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (train.max_len > model.max_len) {
        throw ConfigError("max_len " + std::to_string(train.max_len) + " exceeds model position capacity " +
                          std::to_string(model.max_len));
    }
}

namespace {

std::string to_string(SelectionMetric m) { return m == SelectionMetric::WeightedF1 ? "weighted_f1" : "accuracy"; }
std::string to_string(SelectMode m) { return m == SelectMode::Best ? "best" : "last"; }

SelectionMetric selection_metric_from(const std::string& s) {
    if (s == "weighted_f1") return SelectionMetric::WeightedF1;
    if (s == "accuracy") return SelectionMetric::Accuracy;
    throw ConfigError("unknown selection_metric '" + s + "'");
}

SelectMode select_mode_from(const std::string& s) {
    if (s == "best") return SelectMode::Best;
    if (s == "last") return SelectMode::Last;
    throw ConfigError("unknown select mode '" + s + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* section) {
    if (!j.is_object()) throw ConfigError(std::string(section) + " config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError(std::string("unknown ") + section + " config field '" + key + "'");
    }
}

} // namespace

Json to_json(const ModelConfig& c) {
    return Json{{"vocab_size", c.vocab_size},     {"hidden", c.hidden},
                {"layers", c.layers},             {"heads", c.heads},
                {"ffn", c.ffn},                   {"max_len", c.max_len},
                {"head_dropout", c.head_dropout}, {"encoder_dropout", c.encoder_dropout},
                {"num_classes", c.num_classes},   {"head_mode", to_string(c.head_mode)}};
}

Json to_json(const TrainConfig& c) {
    return Json{{"epochs", c.epochs},
                {"train_batch", c.train_batch},
                {"eval_batch", c.eval_batch},
                {"max_len", c.max_len},
                {"base_lr", c.base_lr},
                {"warmup_fraction", c.warmup_fraction},
                {"clip_norm", c.clip_norm},
                {"weight_decay", c.weight_decay},
                {"seed", c.seed},
                {"selection_metric", to_string(c.selection_metric)},
                {"select", to_string(c.select)},
                {"freeze_encoder", c.freeze_encoder}};
}

Json to_json(const RunConfig& c) { return Json{{"model", to_json(c.model)}, {"train", to_json(c.train)}}; }

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
    reject_unknown(j,
                   {"vocab_size", "hidden", "layers", "heads", "ffn", "max_len", "head_dropout", "encoder_dropout",
                    "num_classes", "head_mode"},
                   "model");
    if (j.contains("vocab_size")) read(j, "vocab_size", c.vocab_size);
    if (j.contains("hidden")) read(j, "hidden", c.hidden);
    if (j.contains("layers")) read(j, "layers", c.layers);
    if (j.contains("heads")) read(j, "heads", c.heads);
    if (j.contains("ffn")) read(j, "ffn", c.ffn);
    if (j.contains("max_len")) read(j, "max_len", c.max_len);
    if (j.contains("head_dropout")) read(j, "head_dropout", c.head_dropout);
    if (j.contains("encoder_dropout")) read(j, "encoder_dropout", c.encoder_dropout);
    if (j.contains("num_classes")) read(j, "num_classes", c.num_classes);
    if (j.contains("head_mode")) {
        std::string s;
        read(j, "head_mode", s);
        c.head_mode = head_mode_from_string(s);
    }
    return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    reject_unknown(j,
                   {"epochs", "train_batch", "eval_batch", "max_len", "base_lr", "warmup_fraction", "clip_norm",
                    "weight_decay", "seed", "selection_metric", "select", "freeze_encoder"},
                   "train");
    if (j.contains("epochs")) read(j, "epochs", c.epochs);
    if (j.contains("train_batch")) read(j, "train_batch", c.train_batch);
    if (j.contains("eval_batch")) read(j, "eval_batch", c.eval_batch);
    if (j.contains("max_len")) read(j, "max_len", c.max_len);
    if (j.contains("base_lr")) read(j, "base_lr", c.base_lr);
    if (j.contains("warmup_fraction")) read(j, "warmup_fraction", c.warmup_fraction);
    if (j.contains("clip_norm")) read(j, "clip_norm", c.clip_norm);
    if (j.contains("weight_decay")) read(j, "weight_decay", c.weight_decay);
    if (j.contains("seed")) read(j, "seed", c.seed);
    if (j.contains("selection_metric")) {
        std::string s;
        read(j, "selection_metric", s);
        c.selection_metric = selection_metric_from(s);
    }
    if (j.contains("select")) {
        std::string s;
        read(j, "select", s);
        c.select = select_mode_from(s);
    }
    if (j.contains("freeze_encoder")) read(j, "freeze_encoder", c.freeze_encoder);
    return c;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
    reject_unknown(j, {"model", "train"}, "run");
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    return c;
}

void set_field(RunConfig& config, std::string_view field, std::string_view value) {
    nlohmann::json v;
    try {
        v = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        v = std::string(value);
    }
    std::string section;
    std::string name(field);
    if (field.starts_with("model.")) {
        section = "model";
        name = std::string(field.substr(6));
    } else if (field.starts_with("train.")) {
        section = "train";
        name = std::string(field.substr(6));
    }
    // Command-line aliases.
    if (name == "lr") name = "base_lr";
    if (name == "batch") name = "train_batch";
    if (section.empty()) {
        section = to_json(config.train).contains(name) ? "train" : "model";
    }
    nlohmann::json patch = nlohmann::json::object();
    patch[name] = v;
    if (section == "train") {
        config.train = train_config_from_json(patch, config.train);
    } else {
        config.model = model_config_from_json(patch, config.model);
    }
}

std::vector<std::string> diff_fields(const RunConfig& a, const RunConfig& b) {
    const Json ja = to_json(a), jb = to_json(b);
    std::vector<std::string> out;
    for (const char* section : {"model", "train"}) {
        for (const auto& [key, value] : ja.at(section).items()) {
            if (jb.at(section).at(key) != value) out.push_back(std::string(section) + "." + key);
        }
    }
    return out;
}

} // namespace dscls
