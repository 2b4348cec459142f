// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian throughout:
//
//   "DSC1"  u32 version  u64 json_len  json
//   u32 n_tensors  { u32 name_len  name  u32 rank  u64 dims[rank]  f32 data[] } * n
//   u8 has_optimizer  [ u64 step  u32 n  {record}*n (m)  u32 n  {record}*n (v) ]
//
// The JSON block holds model/train configs, task schema and vocabulary.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "dscls/config.hpp"
#include "dscls/data.hpp"
#include "dscls/model.hpp"
#include "dscls/optim.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { BadMagic, VersionMismatch, ShapeMismatch, Truncated, Malformed, Io };

    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Checkpoint {
    RunConfig config;
    TaskSchema schema;
    Vocabulary vocab;
    Parameters params;
    std::optional<OptimState> optim;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::optional<ModelConfig>& expected = std::nullopt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// When `expected` is given, every tensor must also match the shapes that
/// configuration implies.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ModelConfig>& expected = std::nullopt);

} // namespace dscls
