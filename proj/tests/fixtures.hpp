// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dscls/config.hpp"
#include "dscls/data.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls::test {

// Small enough to train for hundreds of epochs in seconds.
inline RunConfig tiny_run_config(const TaskSchema& schema, std::size_t vocab_size) {
    RunConfig c;
    c.model.vocab_size = vocab_size;
    c.model.hidden = 16;
    c.model.layers = 1;
    c.model.heads = 2;
    c.model.ffn = 32;
    c.model.max_len = 32;
    c.model.num_classes = schema.num_classes();
    c.model.head_mode = default_head_mode(schema.num_classes());
    c.train.epochs = 10;
    c.train.train_batch = 8;
    c.train.eval_batch = 64;
    c.train.max_len = 32;
    c.train.base_lr = 1e-3;
    c.train.seed = 7;
    return c;
}

inline Vocabulary corpus_vocab(const std::vector<LabeledExample>& data, std::size_t size = 400) {
    std::vector<std::string> texts;
    for (const auto& ex : data) texts.push_back(ex.text);
    return train_vocab(texts, size);
}

} // namespace dscls::test
