// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dscls/rng.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls {

// ---- schema -------------------------------------------------------------------

TaskSchema TaskSchema::subtask_b() { return {"subtask_b", {"non-hate", "hate"}}; }

TaskSchema TaskSchema::subtask_c() { return {"subtask_c", {"individual", "organization", "community"}}; }

TaskSchema TaskSchema::from_name(std::string_view name) {
    if (name == "subtask_b" || name == "subtask-b") return subtask_b();
    if (name == "subtask_c" || name == "subtask-c") return subtask_c();
    throw DataError("unknown task '" + std::string(name) + "'");
}

std::optional<int> TaskSchema::parse_label(std::string_view value) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == value) return static_cast<int>(i);
    }
    int id = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, id);
    if (!value.empty() && ec == std::errc() && ptr == end && id >= 0 && static_cast<std::size_t>(id) < classes.size()) {
        return id;
    }
    return std::nullopt;
}

// ---- CSV ----------------------------------------------------------------------

std::vector<CsvRow> parse_csv(std::string_view s) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false; // distinguishes an empty line from a row with one empty field
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        if (field_started || !row.empty()) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
        field_started = false;
    };
    while (i < s.size()) {
        const char c = s[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < s.size() && s[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field += c;
            }
            ++i;
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
            field_started = true;
        } else if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) {
        throw DataError("unterminated quoted field at end of input");
    }
    end_row();
    return rows;
}

std::string format_csv_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_csv(const std::vector<CsvRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        // A lone empty field would otherwise print as a blank line.
        if (row.size() == 1 && row[0].empty()) {
            out += "\"\"\n";
            continue;
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_csv_field(row[i]);
        }
        out += '\n';
    }
    return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view strip_bom(std::string_view s) {
    if (s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
    return s;
}

std::vector<CsvRow> parse_checked(std::string_view content) {
    content = strip_bom(content);
    if (auto bad = first_invalid_utf8(content)) {
        throw DataError("malformed UTF-8 at byte offset " + std::to_string(*bad));
    }
    auto rows = parse_csv(content);
    if (rows.empty()) throw DataError("missing header row");
    return rows;
}

std::size_t column_index(const CsvRow& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace

std::vector<LabeledExample> parse_labeled_csv(std::string_view content, const TaskSchema& schema,
                                              const std::string& text_column, const std::string& label_column) {
    const auto rows = parse_checked(content);
    const std::size_t ti = column_index(rows[0], text_column);
    const std::size_t li = column_index(rows[0], label_column);
    std::vector<LabeledExample> out;
    out.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max(ti, li)) {
            throw DataError("row " + std::to_string(r) + " has " + std::to_string(row.size()) + " fields");
        }
        const auto label = schema.parse_label(row[li]);
        if (!label) {
            throw DataError("unknown label '" + row[li] + "' at row " + std::to_string(r));
        }
        out.push_back({row[ti], *label});
    }
    return out;
}

std::vector<LabeledExample> load_csv(const std::filesystem::path& path, const TaskSchema& schema,
                                     const std::string& text_column, const std::string& label_column) {
    return parse_labeled_csv(read_file(path), schema, text_column, label_column);
}

std::string to_csv(std::span<const LabeledExample> examples, const TaskSchema& schema) {
    std::vector<CsvRow> rows;
    rows.push_back({"text", "label"});
    for (const auto& ex : examples) {
        rows.push_back({ex.text, schema.classes.at(static_cast<std::size_t>(ex.label))});
    }
    return format_csv(rows);
}

void write_csv(const std::filesystem::path& path, std::span<const LabeledExample> examples, const TaskSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_csv(examples, schema);
}

std::vector<std::string> load_texts(const std::filesystem::path& path, const std::string& text_column) {
    const auto rows = parse_checked(read_file(path));
    const auto it = std::find(rows[0].begin(), rows[0].end(), text_column);
    const std::size_t ti = it == rows[0].end() ? 0 : static_cast<std::size_t>(it - rows[0].begin());
    std::vector<std::string> texts;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() <= ti) throw DataError("row " + std::to_string(r) + " has no text field");
        texts.push_back(rows[r][ti]);
    }
    return texts;
}

std::string predictions_csv(std::span<const Prediction> predictions) {
    std::vector<CsvRow> rows;
    rows.push_back({"index", "predicted_label", "confidence"});
    char buf[32];
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", predictions[i].confidence);
        rows.push_back({std::to_string(i), predictions[i].label, buf});
    }
    return format_csv(rows);
}

// ---- batching -------------------------------------------------------------------

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    CounterRng rng(seed, 0x62617463ULL);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed) {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    std::vector<std::size_t> order;
    if (shuffle) {
        order = permutation(n, seed);
    } else {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return out;
}

std::vector<std::vector<LabeledExample>> batches(std::span<const LabeledExample> data, std::size_t batch_size,
                                                 bool shuffle, std::uint64_t seed) {
    std::vector<std::vector<LabeledExample>> out;
    for (const auto& idx : batch_indices(data.size(), batch_size, shuffle, seed)) {
        auto& b = out.emplace_back();
        b.reserve(idx.size());
        for (auto i : idx) b.push_back(data[i]);
    }
    return out;
}

DataSplits split_dataset(std::span<const LabeledExample> data, const SplitSpec& spec) {
    const std::size_t n = data.size();
    std::size_t n_train, n_valid, n_test;
    if (spec.train_count || spec.valid_count || spec.test_count) {
        n_train = spec.train_count.value_or(0);
        n_valid = spec.valid_count.value_or(0);
        n_test = spec.test_count.value_or(0);
        if (n_train + n_valid + n_test != n) {
            throw DataError("split counts sum to " + std::to_string(n_train + n_valid + n_test) +
                            " but the dataset has " + std::to_string(n) + " examples");
        }
    } else {
        if (spec.train_fraction < 0 || spec.valid_fraction < 0 || spec.train_fraction + spec.valid_fraction > 1.0) {
            throw DataError("split fractions must be non-negative and sum to at most 1");
        }
        n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
        n_valid = static_cast<std::size_t>(std::floor(spec.valid_fraction * static_cast<double>(n)));
        n_test = n - n_train - n_valid;
        const double test_fraction = 1.0 - spec.train_fraction - spec.valid_fraction;
        if ((spec.train_fraction > 0 && n_train == 0) || (spec.valid_fraction > 0 && n_valid == 0) ||
            (test_fraction > 1e-12 && n_test == 0)) {
            throw DataError("dataset too small for the requested split");
        }
    }
    const auto order = permutation(n, spec.seed);
    DataSplits out;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& ex = data[order[k]];
        if (k < n_train) {
            out.train.push_back(ex);
        } else if (k < n_train + n_valid) {
            out.valid.push_back(ex);
        } else {
            out.test.push_back(ex);
        }
    }
    return out;
}

// ---- synthetic corpus ---------------------------------------------------------------

namespace {

const std::vector<std::string>& neutral_words() {
    static const std::vector<std::string> words = {
        "यह", "वह", "है", "था", "और", "में", "से", "को", "का", "की",
        "पर", "लोग", "आज", "कल", "बहुत", "बात", "समय", "देश", "घर", "काम",
    };
    return words;
}

const std::vector<std::vector<std::string>>& base_markers() {
    static const std::vector<std::vector<std::string>> markers = {
        {"शांति", "प्रेम", "मित्रता", "सम्मान"},
        {"घृणा", "क्रोध", "अपमान", "धिक्कार"},
        {"संगठन", "कंपनी", "संस्था", "मंडल"},
        {"समुदाय", "समाज", "बिरादरी", "कबीला"},
        {"नदी", "पर्वत", "वन", "सागर"},
        {"सूर्य", "चंद्र", "तारा", "ग्रह"},
    };
    return markers;
}

std::string devanagari_number(std::size_t n) {
    static const char* digits[] = {"०", "१", "२", "३", "४", "५", "६", "७", "८", "९"};
    std::string s;
    do {
        s.insert(0, digits[n % 10]);
        n /= 10;
    } while (n);
    return s;
}

} // namespace

std::vector<std::string> synth_markers(std::size_t class_id) {
    if (class_id < base_markers().size()) return base_markers()[class_id];
    std::vector<std::string> out;
    for (std::size_t j = 0; j < 4; ++j) {
        out.push_back("चिह्न" + devanagari_number(class_id) + "क" + devanagari_number(j));
    }
    return out;
}

std::vector<LabeledExample> synth_corpus(const TaskSchema& schema, std::size_t n, std::uint64_t seed,
                                         double separability) {
    const std::size_t classes = schema.num_classes();
    if (classes == 0) throw DataError("schema has no classes");
    if (n < classes) throw DataError("synth_corpus needs n >= num_classes");
    if (!(separability >= 0.0 && separability <= 1.0)) throw DataError("separability must be in [0,1]");

    const auto order = permutation(n, seed ^ 0x73796e7468ULL);
    std::vector<LabeledExample> out(n);
    const auto& neutral = neutral_words();
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(order[i] % classes);
        const auto markers = synth_markers(static_cast<std::size_t>(label));
        CounterRng rng(seed, 0x1000 + i);
        const std::size_t len = 6 + static_cast<std::size_t>(rng.below(5));
        const auto n_markers = static_cast<std::size_t>(std::llround(separability * static_cast<double>(len)));
        // Fisher-Yates over positions; the first n_markers slots hold markers.
        std::vector<std::size_t> pos(len);
        for (std::size_t k = 0; k < len; ++k) pos[k] = k;
        for (std::size_t k = len; k > 1; --k) std::swap(pos[k - 1], pos[rng.below(k)]);
        std::vector<std::string> words(len);
        for (std::size_t k = 0; k < len; ++k) {
            words[pos[k]] = k < n_markers ? markers[rng.below(markers.size())] : neutral[rng.below(neutral.size())];
        }
        std::string text;
        for (std::size_t k = 0; k < len; ++k) {
            if (k) text += ' ';
            text += words[k];
        }
        out[i] = {std::move(text), label};
    }
    return out;
}

} // namespace dscls
