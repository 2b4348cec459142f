// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "dscls/checkpoint.hpp"

namespace dscls {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Entry point of the `dscls` command. Errors are reported on `err` as a
/// single line starting with "error:".
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

/// Body of a POST /classify response for a `{"texts": [...]}` request.
/// Throws std::invalid_argument on a malformed request.
std::string classify_json(const Checkpoint& ckpt, std::string_view request_body);

} // namespace dscls
