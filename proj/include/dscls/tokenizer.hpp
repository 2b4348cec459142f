// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-level BPE tokenizer.
//
// Id layout: 0..3 are the special tokens, 4..259 the 256 single bytes, and
// each learned merge i gets id 260 + i. Every byte string is therefore
// encodable and no input ever maps to UNK.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dscls {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kNumSpecial = 4;
inline constexpr int kByteBase = kNumSpecial;
inline constexpr int kMinVocabSize = kNumSpecial + 256;

class TokenizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Vocabulary {
public:
    using Merge = std::pair<std::string, std::string>;

    Vocabulary();
    explicit Vocabulary(std::vector<Merge> merges);

    std::size_t size() const { return id_to_token_.size(); }
    const std::vector<Merge>& merges() const { return merges_; }

    // Raw bytes of a token; specials map to "<pad>", "<unk>", "<cls>", "<sep>".
    const std::string& token(int id) const;
    std::optional<int> id_of(std::string_view token) const;
    static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

    // Content token ids for a text (no CLS/SEP, no truncation).
    std::vector<int> tokenize(std::string_view text) const;

    std::string to_json() const;
    static Vocabulary from_json(std::string_view json);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return merges_ == other.merges_; }

private:
    std::vector<int> tokenize_word(std::string_view word) const;

    std::vector<Merge> merges_;
    std::vector<std::string> id_to_token_;
    std::map<std::string, int, std::less<>> token_to_id_;
    // (left id, right id) -> (rank, merged id)
    std::map<std::pair<int, int>, std::pair<int, int>> merge_rank_;
};

struct EncodedExample {
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
    std::optional<int> label;

    bool operator==(const EncodedExample&) const = default;
};

// Splits text into words; each run of whitespace attaches to the word that
// follows it. Concatenating the pieces reproduces the input.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Learns merges in order of descending pair frequency, ties broken by the
/// lexicographically smallest (left, right) byte-string pair. Only pairs that
/// occur at least twice are merged, so a small corpus can yield fewer than
/// target_size entries.
Vocabulary train_vocab(std::span<const std::string> corpus, std::size_t target_size);

/// Fixed-length encoding: CLS, content truncated to max_len - 2, SEP, PAD fill.
EncodedExample encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len,
                      std::optional<int> label = std::nullopt);

/// Concatenates non-special tokens; invalid UTF-8 becomes U+FFFD.
std::string decode(const Vocabulary& vocab, std::span<const int> ids);

// Replaces each maximal invalid UTF-8 subsequence with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

// Byte offset of the first invalid UTF-8 sequence, if any.
std::optional<std::size_t> first_invalid_utf8(std::string_view bytes);

} // namespace dscls
