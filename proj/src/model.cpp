// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/model.hpp"

#include <algorithm>
#include <cmath>

namespace dscls {

std::string to_string(HeadMode mode) {
    return mode == HeadMode::ScalarSigmoid ? "scalar_sigmoid" : "softmax";
}

HeadMode head_mode_from_string(const std::string& s) {
    if (s == "scalar_sigmoid") return HeadMode::ScalarSigmoid;
    if (s == "softmax") return HeadMode::Softmax;
    throw ConfigError("unknown head mode '" + s + "'");
}

HeadMode default_head_mode(std::size_t num_classes) {
    return num_classes == 2 ? HeadMode::ScalarSigmoid : HeadMode::Softmax;
}

void ModelConfig::validate() const {
    if (vocab_size < 1 || hidden < 1 || heads < 1 || ffn < 1 || max_len < 1) {
        throw ConfigError("all model dimensions must be >= 1");
    }
    if (hidden % heads != 0) {
        throw ConfigError("hidden not divisible by heads");
    }
    if (num_classes < 1) {
        throw ConfigError("num_classes must be >= 1");
    }
    if (!(head_dropout >= 0.0 && head_dropout < 1.0) || !(encoder_dropout >= 0.0 && encoder_dropout < 1.0)) {
        throw ConfigError("dropout must be in [0,1)");
    }
    if (head_mode == HeadMode::ScalarSigmoid && num_classes != 2) {
        throw ConfigError("scalar_sigmoid head requires num_classes = 2");
    }
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& c) {
    const std::size_t h = c.hidden, f = c.ffn;
    std::map<std::string, Shape> shapes;
    shapes["embeddings.token"] = {c.vocab_size, h};
    shapes["embeddings.position"] = {c.max_len, h};
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::string p = "encoder." + std::to_string(l) + ".";
        for (const char* proj : {"query", "key", "value", "output"}) {
            shapes[p + "attention." + proj + ".weight"] = {h, h};
            shapes[p + "attention." + proj + ".bias"] = {h};
        }
        shapes[p + "attention_norm.weight"] = {h};
        shapes[p + "attention_norm.bias"] = {h};
        shapes[p + "ffn.up.weight"] = {h, f};
        shapes[p + "ffn.up.bias"] = {f};
        shapes[p + "ffn.down.weight"] = {f, h};
        shapes[p + "ffn.down.bias"] = {h};
        shapes[p + "output_norm.weight"] = {h};
        shapes[p + "output_norm.bias"] = {h};
    }
    shapes["pre_classifier.weight"] = {h, h};
    shapes["pre_classifier.bias"] = {h};
    shapes["classifier.weight"] = {h, c.output_dim()};
    shapes["classifier.bias"] = {c.output_dim()};
    return shapes;
}

std::size_t parameter_count(const ModelConfig& config) {
    std::size_t n = 0;
    for (const auto& [name, shape] : parameter_shapes(config)) {
        n += shape_numel(shape);
    }
    return n;
}

bool is_head_parameter(const std::string& name) {
    return name.starts_with("pre_classifier.") || name.starts_with("classifier.");
}

bool is_layernorm_parameter(const std::string& name) { return name.find("_norm.") != std::string::npos; }

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Parameters params;
    for (const auto& [name, shape] : parameter_shapes(config)) {
        Tensor t(shape, 0.0);
        if (is_layernorm_parameter(name)) {
            if (name.ends_with(".weight")) std::fill(t.data.begin(), t.data.end(), 1.0);
        } else if (!name.ends_with(".bias")) {
            CounterRng rng(seed, fnv1a(name));
            constexpr double kStd = 0.02;
            for (auto& v : t.data) {
                double z = rng.normal();
                while (std::abs(z) > 2.0) z = rng.normal();
                v = kStd * z;
            }
        }
        params.emplace(name, std::move(t));
    }
    check_parameters(params, config);
    return params;
}

void check_parameters(const Parameters& params, const ModelConfig& config) {
    config.validate();
    const auto shapes = parameter_shapes(config);
    for (const auto& [name, shape] : shapes) {
        const auto it = params.find(name);
        if (it == params.end()) {
            throw ConfigError("missing parameter '" + name + "'");
        }
        if (it->second.shape != shape) {
            throw ConfigError("parameter '" + name + "' has shape " + shape_str(it->second.shape) + ", expected " +
                              shape_str(shape));
        }
    }
    for (const auto& [name, t] : params) {
        if (!shapes.contains(name)) {
            throw ConfigError("unexpected parameter '" + name + "'");
        }
    }
    // The pre-classifier keeps the hidden dimensionality.
    const auto& pre = params.at("pre_classifier.weight").shape;
    if (pre.size() != 2 || pre[0] != config.hidden || pre[1] != config.hidden) {
        throw ConfigError("pre_classifier must map hidden -> hidden");
    }
}

// ---- batches ----------------------------------------------------------------------

TokenBatch TokenBatch::from_examples(std::span<const EncodedExample> examples) {
    TokenBatch b;
    b.batch = examples.size();
    b.seq = examples.empty() ? 0 : examples[0].ids.size();
    for (const auto& ex : examples) {
        if (ex.ids.size() != b.seq || ex.mask.size() != b.seq) {
            throw ShapeError("batch rows must share one sequence length");
        }
        b.ids.insert(b.ids.end(), ex.ids.begin(), ex.ids.end());
        b.mask.insert(b.mask.end(), ex.mask.begin(), ex.mask.end());
    }
    return b;
}

TokenBatch TokenBatch::from_rows(const std::vector<std::vector<int>>& ids,
                                 const std::vector<std::vector<std::uint8_t>>& mask) {
    if (ids.size() != mask.size()) throw ShapeError("ids and mask batch sizes differ");
    TokenBatch b;
    b.batch = ids.size();
    b.seq = ids.empty() ? 0 : ids[0].size();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r].size() != b.seq || mask[r].size() != b.seq) {
            throw ShapeError("batch rows must share one sequence length");
        }
        b.ids.insert(b.ids.end(), ids[r].begin(), ids[r].end());
        b.mask.insert(b.mask.end(), mask[r].begin(), mask[r].end());
    }
    return b;
}

TokenBatch TokenBatch::trimmed() const {
    std::size_t keep = 0;
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t s = seq; s > keep; --s) {
            if (mask[r * seq + s - 1]) {
                keep = s;
                break;
            }
        }
    }
    keep = std::max<std::size_t>(keep, std::min<std::size_t>(seq, 1));
    if (keep == seq) return *this;
    TokenBatch out;
    out.batch = batch;
    out.seq = keep;
    for (std::size_t r = 0; r < batch; ++r) {
        out.ids.insert(out.ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(r * seq),
                       ids.begin() + static_cast<std::ptrdiff_t>(r * seq + keep));
        out.mask.insert(out.mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(r * seq),
                        mask.begin() + static_cast<std::ptrdiff_t>(r * seq + keep));
    }
    return out;
}

// ---- forward ------------------------------------------------------------------------

ParamVars bind_parameters(Tape& tape, const Parameters& params, bool (*trainable)(const std::string&)) {
    ParamVars vars;
    for (const auto& [name, t] : params) {
        vars.emplace(name, tape.leaf(t, trainable == nullptr || trainable(name)));
    }
    return vars;
}

namespace {

Var linear(const ParamVars& p, const std::string& prefix, Var x) {
    return add(matmul(x, p.at(prefix + ".weight")), p.at(prefix + ".bias"));
}

Var encoder_block(const ParamVars& p, const ModelConfig& c, std::size_t layer, Var x, const TokenBatch& batch,
                  bool train, CounterRng& rng) {
    const std::string pre = "encoder." + std::to_string(layer) + ".";
    const std::size_t seq = batch.seq, d = c.hidden / c.heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    const Var q = linear(p, pre + "attention.query", x);
    const Var k = linear(p, pre + "attention.key", x);
    const Var v = linear(p, pre + "attention.value", x);

    std::vector<Var> per_example;
    per_example.reserve(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        const std::span<const std::uint8_t> key_mask(batch.mask.data() + b * seq, seq);
        std::vector<Var> heads;
        heads.reserve(c.heads);
        for (std::size_t h = 0; h < c.heads; ++h) {
            const Var qh = slice(q, b * seq, seq, h * d, d);
            const Var kh = slice(k, b * seq, seq, h * d, d);
            const Var vh = slice(v, b * seq, seq, h * d, d);
            Var probs = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt_d), key_mask);
            probs = dropout(probs, c.encoder_dropout, train, rng);
            heads.push_back(matmul(probs, vh));
        }
        per_example.push_back(concat_cols(heads));
    }
    Var attn = linear(p, pre + "attention.output", concat_rows(per_example));
    attn = dropout(attn, c.encoder_dropout, train, rng);
    x = layernorm(add(x, attn), p.at(pre + "attention_norm.weight"), p.at(pre + "attention_norm.bias"));

    Var ff = linear(p, pre + "ffn.down", gelu(linear(p, pre + "ffn.up", x)));
    ff = dropout(ff, c.encoder_dropout, train, rng);
    return layernorm(add(x, ff), p.at(pre + "output_norm.weight"), p.at(pre + "output_norm.bias"));
}

} // namespace

Var head_hidden(const ParamVars& params, const ModelConfig& config, Var cls, bool train, CounterRng& rng) {
    const Var h = relu(linear(params, "pre_classifier", cls));
    return dropout(h, config.head_dropout, train, rng);
}

Var forward(const ParamVars& params, const ModelConfig& config, const TokenBatch& full_batch, bool train,
            CounterRng& rng) {
    config.validate();
    if (full_batch.batch == 0) throw ShapeError("forward: empty batch");
    if (full_batch.seq > config.max_len) {
        throw ShapeError("sequence length " + std::to_string(full_batch.seq) + " exceeds max_len " +
                         std::to_string(config.max_len));
    }
    for (int id : full_batch.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
            throw std::out_of_range("token id " + std::to_string(id) + " out of range for vocab_size " +
                                    std::to_string(config.vocab_size));
        }
    }
    const TokenBatch batch = full_batch.trimmed();
    std::vector<int> positions(batch.batch * batch.seq);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = static_cast<int>(i % batch.seq);
    }
    Var x = add(embedding(params.at("embeddings.token"), batch.ids), embedding(params.at("embeddings.position"), positions));
    for (std::size_t l = 0; l < config.layers; ++l) {
        x = encoder_block(params, config, l, x, batch, train, rng);
    }
    std::vector<std::size_t> cls_rows(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        cls_rows[b] = b * batch.seq;
    }
    const Var cls = select_rows(x, cls_rows);
    return linear(params, "classifier", head_hidden(params, config, cls, train, rng));
}

Tensor forward(const Parameters& params, const ModelConfig& config, const TokenBatch& batch, bool train,
               std::uint64_t rng_seed) {
    Tape tape;
    const ParamVars vars = bind_parameters(tape, params, [](const std::string&) { return false; });
    CounterRng rng(rng_seed);
    return forward(vars, config, batch, train, rng).value();
}

Tensor probabilities_from_logits(const Tensor& logits, HeadMode mode) {
    const std::size_t rows = logits.rows();
    if (mode == HeadMode::ScalarSigmoid) {
        if (logits.cols() != 1) throw ShapeError("scalar head expects one logit per row, got " + shape_str(logits.shape));
        Tensor out({rows, 2});
        for (std::size_t r = 0; r < rows; ++r) {
            const double z = logits.data[r];
            const double p1 = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            out.at(r, 0) = 1.0 - p1;
            out.at(r, 1) = p1;
        }
        return out;
    }
    const std::size_t c = logits.cols();
    Tensor out({rows, c});
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, logits.at(r, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out.at(r, j) = std::exp(logits.at(r, j) - mx);
            z += out.at(r, j);
        }
        for (std::size_t j = 0; j < c; ++j) out.at(r, j) /= z;
    }
    return out;
}

Tensor predict_proba(const Parameters& params, const ModelConfig& config, const TokenBatch& batch) {
    return probabilities_from_logits(forward(params, config, batch, false, 0), config.head_mode);
}

} // namespace dscls
