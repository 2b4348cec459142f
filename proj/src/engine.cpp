// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/engine.hpp"

#include <chrono>
#include <cmath>

namespace dscls {

std::string RunLog::to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        Json j;
        j["epoch"] = e.epoch;
        j["mean_train_loss"] = e.mean_train_loss;
        j["lr_at_epoch_end"] = e.lr_at_epoch_end;
        j["best"] = e.epoch == best_epoch;
        j["validation"] = Json::parse(to_json(e.validation));
        out += j.dump() + "\n";
    }
    return out;
}

std::string RunLog::timing_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        out += Json{{"epoch", e.epoch}, {"wall_time_s", e.wall_time_s}}.dump() + "\n";
    }
    return out;
}

Parameters float32_snapshot(const Parameters& params) {
    Parameters out = params;
    for (auto& [name, t] : out) {
        for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
    }
    return out;
}

double selection_value(const MetricsReport& report, SelectionMetric metric) {
    return metric == SelectionMetric::WeightedF1 ? report.weighted.f1 : report.accuracy;
}

std::vector<EncodedExample> encode_all(const Vocabulary& vocab, std::span<const LabeledExample> data,
                                       std::size_t max_len) {
    std::vector<EncodedExample> out;
    out.reserve(data.size());
    for (const auto& ex : data) {
        out.push_back(encode(vocab, ex.text, max_len, ex.label));
    }
    return out;
}

namespace {

std::vector<int> decide(const Tensor& logits, HeadMode mode) {
    std::vector<int> out(logits.rows());
    const Tensor probs = probabilities_from_logits(logits, mode);
    for (std::size_t r = 0; r < out.size(); ++r) {
        if (mode == HeadMode::ScalarSigmoid) {
            out[r] = probs.at(r, 1) > 0.5 ? 1 : 0;
        } else {
            std::size_t best = 0;
            for (std::size_t j = 1; j < probs.cols(); ++j) {
                if (probs.at(r, j) > probs.at(r, best)) best = j;
            }
            out[r] = static_cast<int>(best);
        }
    }
    return out;
}

template <class Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, Fn fn) {
    if (chunk < 1) throw ConfigError("eval batch must be >= 1");
    for (std::size_t start = 0; start < n; start += chunk) {
        fn(start, std::min(n, start + chunk));
    }
}

} // namespace

std::vector<int> predict_classes(const Parameters& params, const ModelConfig& model,
                                 std::span<const EncodedExample> examples, std::size_t eval_batch) {
    std::vector<int> preds;
    preds.reserve(examples.size());
    for_each_chunk(examples.size(), eval_batch, [&](std::size_t a, std::size_t b) {
        const auto batch = TokenBatch::from_examples(examples.subspan(a, b - a));
        const auto d = decide(forward(params, model, batch, false, 0), model.head_mode);
        preds.insert(preds.end(), d.begin(), d.end());
    });
    return preds;
}

MetricsReport evaluate(const Parameters& params, const ModelConfig& model, const Vocabulary& vocab,
                       const TaskSchema& schema, std::span<const LabeledExample> data, std::size_t eval_batch,
                       std::size_t max_len) {
    if (data.empty()) throw TrainingError("empty evaluation data");
    const auto encoded = encode_all(vocab, data, max_len);
    const auto preds = predict_classes(params, model, encoded, eval_batch);
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const auto& ex : data) labels.push_back(ex.label);
    return compute(confusion(preds, labels, model.num_classes), schema.classes);
}

std::vector<Prediction> predict(const Parameters& params, const ModelConfig& model, const Vocabulary& vocab,
                                const TaskSchema& schema, std::span<const std::string> texts, std::size_t max_len,
                                std::size_t eval_batch) {
    std::vector<EncodedExample> encoded;
    encoded.reserve(texts.size());
    for (const auto& t : texts) encoded.push_back(encode(vocab, t, max_len));
    std::vector<Prediction> out;
    out.reserve(texts.size());
    for_each_chunk(encoded.size(), eval_batch, [&](std::size_t a, std::size_t b) {
        const auto batch = TokenBatch::from_examples(std::span(encoded).subspan(a, b - a));
        const Tensor logits = forward(params, model, batch, false, 0);
        const Tensor probs = probabilities_from_logits(logits, model.head_mode);
        const auto classes = decide(logits, model.head_mode);
        for (std::size_t r = 0; r < classes.size(); ++r) {
            const auto c = static_cast<std::size_t>(classes[r]);
            out.push_back({schema.classes.at(c), probs.at(r, c)});
        }
    });
    return out;
}

TrainResult train(const RunConfig& config, const Vocabulary& vocab, const TaskSchema& schema,
                  std::span<const LabeledExample> train_data, std::span<const LabeledExample> valid_data,
                  const EpochCallback& on_epoch) {
    const ModelConfig& mc = config.model;
    const TrainConfig& tc = config.train;
    config.validate();
    if (train_data.empty() || valid_data.empty()) throw TrainingError("empty training or validation data");
    if (mc.num_classes != schema.num_classes()) {
        throw ConfigError("model has " + std::to_string(mc.num_classes) + " classes but task '" + schema.name +
                          "' has " + std::to_string(schema.num_classes()));
    }
    if (vocab.size() > mc.vocab_size) {
        throw ConfigError("vocabulary of " + std::to_string(vocab.size()) + " tokens exceeds model vocab_size " +
                          std::to_string(mc.vocab_size));
    }

    const auto train_enc = encode_all(vocab, train_data, tc.max_len);
    const std::size_t batches_per_epoch = (train_enc.size() + tc.train_batch - 1) / tc.train_batch;
    const std::size_t total_steps = tc.epochs * batches_per_epoch;

    TrainResult result;
    Parameters params = init_parameters(mc, tc.seed);
    OptimState state = OptimState::create(
        params, AdamWHyper{tc.base_lr, 0.9, 0.999, 1e-8, tc.weight_decay},
        Schedule{std::min(total_steps, default_warmup_steps(total_steps, tc.warmup_fraction)), total_steps},
        tc.clip_norm);
    auto trainable = tc.freeze_encoder ? &is_head_parameter : nullptr;

    double best_value = -1.0;
    result.log.total_steps = total_steps;
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = batch_indices(train_enc.size(), tc.train_batch, true, tc.seed + epoch);
        double loss_sum = 0.0;
        double last_lr = 0.0;
        for (const auto& idx : order) {
            std::vector<EncodedExample> rows;
            std::vector<int> labels;
            rows.reserve(idx.size());
            for (auto i : idx) {
                rows.push_back(train_enc[i]);
                labels.push_back(*train_enc[i].label);
            }
            const TokenBatch batch = TokenBatch::from_examples(rows);

            Tape tape;
            const ParamVars vars = bind_parameters(tape, params, trainable);
            CounterRng dropout_rng(tc.seed, 0x64726f70ULL + state.step);
            const Var logits = forward(vars, mc, batch, true, dropout_rng);
            const Var loss = mc.head_mode == HeadMode::ScalarSigmoid
                                 ? binary_cross_entropy_with_sigmoid(logits, labels)
                                 : cross_entropy(logits, labels);
            const double loss_value = loss.value().data[0];
            if (!std::isfinite(loss_value)) {
                throw TrainingError("non-finite loss at step " + std::to_string(state.step));
            }
            tape.backward(loss);

            TensorMap grads;
            for (const auto& [name, v] : vars) {
                if (!v.requires_grad()) continue;
                grads.emplace(name, v.grad().numel() == v.value().numel() ? v.grad() : Tensor(v.shape(), 0.0));
            }
            last_lr = lr_at(state, state.step);
            try {
                if (tc.clip_norm > 0.0) {
                    clip_global_norm(grads, tc.clip_norm);
                }
                adamw_step(params, grads, state, last_lr);
            } catch (const OptimError& e) {
                throw TrainingError(std::string(e.what()) + " at step " + std::to_string(state.step));
            }
            loss_sum += loss_value;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_train_loss = loss_sum / static_cast<double>(order.size());
        rec.lr_at_epoch_end = last_lr;
        // Validate what a checkpoint of this epoch would hold, so a reloaded
        // checkpoint reproduces the logged metrics exactly.
        rec.validation = evaluate(float32_snapshot(params), mc, vocab, schema, valid_data, tc.eval_batch, tc.max_len);
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const double value = selection_value(rec.validation, tc.selection_metric);
        const bool take = tc.select == SelectMode::Last || value > best_value;
        if (take) {
            best_value = value;
            result.params = params;
            result.log.best_epoch = epoch;
        }
        result.log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    result.optim = std::move(state);
    return result;
}

} // namespace dscls
