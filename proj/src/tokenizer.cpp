// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dscls {

namespace {

const std::array<std::string, kNumSpecial> kSpecialNames = {"<pad>", "<unk>", "<cls>", "<sep>"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// GPT-2 style printable code point for every byte, so token strings can be
// stored as valid UTF-8 JSON.
const std::array<char32_t, 256>& byte_to_codepoint() {
    static const std::array<char32_t, 256> table = [] {
        std::array<char32_t, 256> t{};
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        char32_t next = 256;
        for (int b = 0; b < 256; ++b) {
            t[b] = direct[b] ? static_cast<char32_t>(b) : next++;
        }
        return t;
    }();
    return table;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string bytes_to_printable(std::string_view bytes) {
    std::string out;
    for (unsigned char b : bytes) {
        append_utf8(out, byte_to_codepoint()[b]);
    }
    return out;
}

// Length of the UTF-8 sequence at `i`. For invalid input, `ok` is false and
// the length is the maximal subpart to replace with a single U+FFFD.
struct Utf8Step {
    std::size_t len;
    bool ok;
};

Utf8Step utf8_step(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {1, true};
    std::size_t need = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (b0 >= 0xC2 && b0 <= 0xDF) {
        need = 1;
    } else if (b0 >= 0xE0 && b0 <= 0xEF) {
        need = 2;
        if (b0 == 0xE0) lo = 0xA0;
        if (b0 == 0xED) hi = 0x9F;
    } else if (b0 >= 0xF0 && b0 <= 0xF4) {
        need = 3;
        if (b0 == 0xF0) lo = 0x90;
        if (b0 == 0xF4) hi = 0x8F;
    } else {
        return {1, false};
    }
    std::size_t len = 1;
    for (std::size_t k = 0; k < need; ++k) {
        if (i + len >= s.size()) return {len, false};
        const auto b = static_cast<unsigned char>(s[i + len]);
        const unsigned char l = k == 0 ? lo : 0x80;
        const unsigned char h = k == 0 ? hi : 0xBF;
        if (b < l || b > h) return {len, false};
        ++len;
    }
    return {len, true};
}

} // namespace

std::string sanitize_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto step = utf8_step(bytes, i);
        if (step.ok) {
            out.append(bytes.substr(i, step.len));
        } else {
            out += "\xEF\xBF\xBD";
        }
        i += step.len;
    }
    return out;
}

std::optional<std::size_t> first_invalid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto step = utf8_step(bytes, i);
        if (!step.ok) return i;
        i += step.len;
    }
    return std::nullopt;
}

std::vector<std::string_view> pretokenize(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t start = 0;
    for (std::size_t i = 1; i < text.size(); ++i) {
        const bool here = is_space(static_cast<unsigned char>(text[i]));
        const bool prev = is_space(static_cast<unsigned char>(text[i - 1]));
        if (here && !prev) {
            words.push_back(text.substr(start, i - start));
            start = i;
        }
    }
    if (start < text.size()) {
        words.push_back(text.substr(start));
    }
    return words;
}

// ---- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<Merge>{}) {}

Vocabulary::Vocabulary(std::vector<Merge> merges) : merges_(std::move(merges)) {
    id_to_token_.assign(kSpecialNames.begin(), kSpecialNames.end());
    for (int b = 0; b < 256; ++b) {
        std::string tok(1, static_cast<char>(b));
        token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
        id_to_token_.push_back(std::move(tok));
    }
    for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
        const auto& [left, right] = merges_[rank];
        const auto l = id_of(left);
        const auto r = id_of(right);
        if (!l || !r) {
            throw TokenizerError("merge " + std::to_string(rank) + " references an unknown token");
        }
        const std::string merged = left + right;
        int id;
        if (auto existing = id_of(merged)) {
            id = *existing;
        } else {
            id = static_cast<int>(id_to_token_.size());
            token_to_id_.emplace(merged, id);
            id_to_token_.push_back(merged);
        }
        merge_rank_.try_emplace({*l, *r}, static_cast<int>(rank), id);
    }
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw TokenizerError("unknown token id " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::id_of(std::string_view token) const {
    const auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> Vocabulary::tokenize_word(std::string_view word) const {
    std::vector<int> ids;
    ids.reserve(word.size());
    for (unsigned char b : word) {
        ids.push_back(kByteBase + b);
    }
    while (ids.size() > 1) {
        int best_rank = -1;
        std::pair<int, int> best_pair;
        int best_id = 0;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            const auto it = merge_rank_.find({ids[i], ids[i + 1]});
            if (it != merge_rank_.end() && (best_rank < 0 || it->second.first < best_rank)) {
                best_rank = it->second.first;
                best_pair = it->first;
                best_id = it->second.second;
            }
        }
        if (best_rank < 0) break;
        std::vector<int> next;
        next.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i + 1 < ids.size() && ids[i] == best_pair.first && ids[i + 1] == best_pair.second) {
                next.push_back(best_id);
                ++i;
            } else {
                next.push_back(ids[i]);
            }
        }
        ids.swap(next);
    }
    return ids;
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
    std::vector<int> out;
    for (auto word : pretokenize(text)) {
        const auto ids = tokenize_word(word);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::string Vocabulary::to_json() const {
    nlohmann::ordered_json j;
    j["size"] = size();
    auto merges = nlohmann::ordered_json::array();
    for (const auto& [l, r] : merges_) {
        merges.push_back({bytes_to_printable(l), bytes_to_printable(r)});
    }
    j["merges"] = std::move(merges);
    j["specials"] = {{"pad", kPadId}, {"unk", kUnkId}, {"cls", kClsId}, {"sep", kSepId}};
    return j.dump(1);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw TokenizerError(std::string("vocabulary json: ") + e.what());
    }
    std::map<std::string, unsigned char> printable_to_byte;
    for (int b = 0; b < 256; ++b) {
        std::string s;
        append_utf8(s, byte_to_codepoint()[b]);
        printable_to_byte.emplace(s, static_cast<unsigned char>(b));
    }
    auto to_bytes = [&](const std::string& printable) {
        std::string out;
        std::size_t i = 0;
        while (i < printable.size()) {
            const auto step = utf8_step(printable, i);
            const auto it = printable_to_byte.find(printable.substr(i, step.len));
            if (!step.ok || it == printable_to_byte.end()) {
                throw TokenizerError("vocabulary json: invalid token string '" + printable + "'");
            }
            out += static_cast<char>(it->second);
            i += step.len;
        }
        return out;
    };
    try {
        const auto& specials = j.at("specials");
        if (specials.at("pad") != kPadId || specials.at("unk") != kUnkId || specials.at("cls") != kClsId ||
            specials.at("sep") != kSepId) {
            throw TokenizerError("vocabulary json: special ids must be pad=0 unk=1 cls=2 sep=3");
        }
        std::vector<Merge> merges;
        for (const auto& m : j.at("merges")) {
            merges.emplace_back(to_bytes(m.at(0).get<std::string>()), to_bytes(m.at(1).get<std::string>()));
        }
        Vocabulary v(std::move(merges));
        if (j.at("size").get<std::size_t>() != v.size()) {
            throw TokenizerError("vocabulary json: size " + j.at("size").dump() + " does not match merges (" +
                                 std::to_string(v.size()) + ")");
        }
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw TokenizerError(std::string("vocabulary json: ") + e.what());
    }
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TokenizerError("cannot write " + path.string());
    out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TokenizerError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

// ---- training -----------------------------------------------------------------

Vocabulary train_vocab(std::span<const std::string> corpus, std::size_t target_size) {
    if (corpus.empty()) throw TokenizerError("empty corpus");
    if (target_size < static_cast<std::size_t>(kMinVocabSize)) throw TokenizerError("vocab too small");

    std::map<std::string, long long> word_freq;
    for (const auto& text : corpus) {
        for (auto w : pretokenize(text)) {
            ++word_freq[std::string(w)];
        }
    }
    struct Word {
        std::vector<int> ids;
        long long freq;
    };
    std::vector<Word> words;
    for (const auto& [w, f] : word_freq) {
        Word word{{}, f};
        for (unsigned char b : w) word.ids.push_back(kByteBase + b);
        words.push_back(std::move(word));
    }

    // Token strings indexed by id, mirroring the Vocabulary layout.
    std::vector<std::string> tokens(kMinVocabSize);
    for (int b = 0; b < 256; ++b) tokens[kByteBase + b] = std::string(1, static_cast<char>(b));
    std::map<std::string, int> token_ids;
    for (int b = 0; b < 256; ++b) token_ids[tokens[kByteBase + b]] = kByteBase + b;

    std::vector<Vocabulary::Merge> merges;
    while (tokens.size() < target_size) {
        std::map<std::pair<int, int>, long long> counts;
        for (const auto& w : words) {
            for (std::size_t i = 0; i + 1 < w.ids.size(); ++i) {
                counts[{w.ids[i], w.ids[i + 1]}] += w.freq;
            }
        }
        const std::pair<int, int>* best = nullptr;
        long long best_count = 1;
        for (const auto& [pair, count] : counts) {
            if (count < best_count) continue;
            if (count > best_count || best == nullptr) {
                best = &pair;
                best_count = count;
                continue;
            }
            const auto key = std::tie(tokens[pair.first], tokens[pair.second]);
            if (key < std::tie(tokens[best->first], tokens[best->second])) best = &pair;
        }
        if (best == nullptr || best_count < 2) break;

        const auto [left, right] = *best;
        const std::string merged = tokens[left] + tokens[right];
        int id;
        if (auto it = token_ids.find(merged); it != token_ids.end()) {
            id = it->second;
        } else {
            id = static_cast<int>(tokens.size());
            tokens.push_back(merged);
            token_ids.emplace(merged, id);
        }
        merges.emplace_back(tokens[left], tokens[right]);
        for (auto& w : words) {
            std::vector<int> next;
            next.reserve(w.ids.size());
            for (std::size_t i = 0; i < w.ids.size(); ++i) {
                if (i + 1 < w.ids.size() && w.ids[i] == left && w.ids[i + 1] == right) {
                    next.push_back(id);
                    ++i;
                } else {
                    next.push_back(w.ids[i]);
                }
            }
            w.ids.swap(next);
        }
    }
    return Vocabulary(std::move(merges));
}

// ---- encode / decode ----------------------------------------------------------

EncodedExample encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len, std::optional<int> label) {
    if (max_len < 2) throw TokenizerError("max_len must be at least 2");
    const auto content = vocab.tokenize(text);
    const std::size_t keep = std::min(content.size(), max_len - 2);
    EncodedExample ex;
    ex.ids.assign(max_len, kPadId);
    ex.mask.assign(max_len, 0);
    ex.ids[0] = kClsId;
    std::copy_n(content.begin(), keep, ex.ids.begin() + 1);
    ex.ids[keep + 1] = kSepId;
    std::fill_n(ex.mask.begin(), keep + 2, std::uint8_t{1});
    ex.label = label;
    return ex;
}

std::string decode(const Vocabulary& vocab, std::span<const int> ids) {
    std::string bytes;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
            throw TokenizerError("unknown token id");
        }
        if (Vocabulary::is_special(id)) continue;
        bytes += vocab.token(id);
    }
    return sanitize_utf8(bytes);
}

} // namespace dscls
