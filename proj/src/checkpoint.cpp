// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dscls {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using Kind = CheckpointError::Kind;

constexpr char kMagic[4] = {'D', 'S', 'C', '1'};

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_tensors(std::string& out, const TensorMap& tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint64_t>(out, d);
        for (double v : t.data) put<float>(out, static_cast<float>(v));
    }
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <class T>
    std::optional<T> get() {
        if (remaining() < sizeof(T)) return std::nullopt;
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::optional<std::string> get_bytes(std::size_t n) {
        if (remaining() < n) return std::nullopt;
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

template <class T>
T require(std::optional<T> v, const std::string& what) {
    if (!v) throw CheckpointError(Kind::Truncated, "truncated " + what);
    return *v;
}

TensorMap get_tensors(Reader& in, const char* section) {
    TensorMap out;
    const auto count = require(in.get<std::uint32_t>(), std::string(section) + " tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string where = std::string(section) + " tensor record #" + std::to_string(i);
        const auto name_len = require(in.get<std::uint32_t>(), where);
        const std::string name = require(in.get_bytes(name_len), where);
        const std::string record = "tensor record '" + name + "'";
        const auto rank = require(in.get<std::uint32_t>(), record);
        if (rank > 8) throw CheckpointError(Kind::Malformed, "implausible rank " + std::to_string(rank) + " in " + record);
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(require(in.get<std::uint64_t>(), record));
        const std::size_t n = shape_numel(shape);
        if (in.remaining() / sizeof(float) < n) throw CheckpointError(Kind::Truncated, "truncated " + record);
        Tensor t(shape);
        for (std::size_t k = 0; k < n; ++k) t.data[k] = static_cast<double>(*in.get<float>());
        if (!out.emplace(name, std::move(t)).second) {
            throw CheckpointError(Kind::Malformed, "duplicate " + record);
        }
    }
    return out;
}

void check_shapes(const TensorMap& params, const ModelConfig& config, const std::string& context) {
    const auto shapes = parameter_shapes(config);
    for (const auto& [name, shape] : shapes) {
        const auto it = params.find(name);
        if (it == params.end()) {
            throw CheckpointError(Kind::ShapeMismatch, "missing tensor '" + name + "'" + context);
        }
        if (it->second.shape != shape) {
            throw CheckpointError(Kind::ShapeMismatch, "shape mismatch for tensor '" + name + "': checkpoint has " +
                                                           shape_str(it->second.shape) + ", expected " +
                                                           shape_str(shape) + context);
        }
    }
    for (const auto& [name, t] : params) {
        if (!shapes.contains(name)) throw CheckpointError(Kind::ShapeMismatch, "unexpected tensor '" + name + "'" + context);
    }
}

} // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Json meta;
    meta["config"] = to_json(ckpt.config);
    meta["task"] = Json{{"name", ckpt.schema.name}, {"classes", ckpt.schema.classes}};
    meta["vocab"] = Json::parse(ckpt.vocab.to_json());
    if (ckpt.optim) {
        const auto& o = *ckpt.optim;
        meta["optim"] = Json{{"base_lr", o.hyper.base_lr},
                             {"beta1", o.hyper.beta1},
                             {"beta2", o.hyper.beta2},
                             {"eps", o.hyper.eps},
                             {"weight_decay", o.hyper.weight_decay},
                             {"warmup_steps", o.schedule.warmup_steps},
                             {"total_steps", o.schedule.total_steps},
                             {"clip_norm", o.clip_norm}};
    }
    const std::string json = meta.dump();

    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, json.size());
    out += json;
    put_tensors(out, ckpt.params);
    put<std::uint8_t>(out, ckpt.optim ? 1 : 0);
    if (ckpt.optim) {
        put<std::uint64_t>(out, ckpt.optim->step);
        put_tensors(out, ckpt.optim->m);
        put_tensors(out, ckpt.optim->v);
    }
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::optional<ModelConfig>& expected) {
    Reader in(bytes);
    const auto magic = in.get_bytes(4);
    if (!magic || std::memcmp(magic->data(), kMagic, 4) != 0) {
        throw CheckpointError(Kind::BadMagic, "bad magic: not a dscls checkpoint");
    }
    const auto version = require(in.get<std::uint32_t>(), "header");
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                         " is not supported (expected " +
                                                         std::to_string(kCheckpointVersion) + ")");
    }
    const auto json_len = require(in.get<std::uint64_t>(), "header");
    const std::string json = require(in.get_bytes(json_len), "metadata block");

    Checkpoint ckpt;
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(json);
        ckpt.config = run_config_from_json(meta.at("config"));
        ckpt.schema.name = meta.at("task").at("name").get<std::string>();
        ckpt.schema.classes = meta.at("task").at("classes").get<std::vector<std::string>>();
        ckpt.vocab = Vocabulary::from_json(meta.at("vocab").dump());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(Kind::Malformed, std::string("checkpoint metadata: ") + e.what());
    }

    ckpt.params = get_tensors(in, "parameter");
    check_shapes(ckpt.params, ckpt.config.model, "");
    if (expected) check_shapes(ckpt.params, *expected, " (requested configuration)");

    const auto has_optim = require(in.get<std::uint8_t>(), "optimizer flag");
    if (has_optim == 1) {
        OptimState o;
        try {
            const auto& j = meta.at("optim");
            o.hyper = {j.at("base_lr").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
                       j.at("eps").get<double>(), j.at("weight_decay").get<double>()};
            o.schedule = {j.at("warmup_steps").get<std::size_t>(), j.at("total_steps").get<std::size_t>()};
            o.clip_norm = j.at("clip_norm").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw CheckpointError(Kind::Malformed, std::string("optimizer metadata: ") + e.what());
        }
        o.step = require(in.get<std::uint64_t>(), "optimizer step");
        o.m = get_tensors(in, "optimizer m");
        o.v = get_tensors(in, "optimizer v");
        ckpt.optim = std::move(o);
    } else if (has_optim != 0) {
        throw CheckpointError(Kind::Malformed, "bad optimizer flag");
    }
    if (in.remaining() != 0) throw CheckpointError(Kind::Malformed, "trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(Kind::Io, "cannot open '" + path.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError(Kind::Io, "write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(Kind::Io, "cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_checkpoint(ss.str(), expected);
}

} // namespace dscls
