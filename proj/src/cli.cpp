// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/cli.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"

#include "dscls/ablation.hpp"
#include "dscls/engine.hpp"

namespace dscls {

namespace fs = std::filesystem;

// ---- digests ------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---- inference service ----------------------------------------------------------------

std::string classify_json(const Checkpoint& ckpt, std::string_view request_body) {
    std::vector<std::string> texts;
    try {
        const auto j = nlohmann::json::parse(request_body);
        texts = j.at("texts").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("request must be {\"texts\": [string, ...]}: ") + e.what());
    }
    const auto preds = predict(ckpt.params, ckpt.config.model, ckpt.vocab, ckpt.schema, texts,
                               ckpt.config.train.max_len, ckpt.config.train.eval_batch);
    Json results = Json::array();
    for (const auto& p : preds) results.push_back(Json{{"label", p.label}, {"confidence", p.confidence}});
    return Json{{"results", std::move(results)}}.dump();
}

namespace {

// ---- configuration resolution -----------------------------------------------------------

CLI::IsMember task_names() { return CLI::IsMember({"subtask-b", "subtask-c", "subtask_b", "subtask_c"}); }

// Command-line flag -> qualified config field.
const std::vector<std::pair<std::string, std::string>>& field_flags() {
    static const std::vector<std::pair<std::string, std::string>> flags = {
        {"--epochs", "train.epochs"},
        {"--batch", "train.train_batch"},
        {"--eval-batch", "train.eval_batch"},
        {"--max-len", "train.max_len"},
        {"--lr", "train.base_lr"},
        {"--warmup-fraction", "train.warmup_fraction"},
        {"--clip-norm", "train.clip_norm"},
        {"--weight-decay", "train.weight_decay"},
        {"--seed", "train.seed"},
        {"--selection-metric", "train.selection_metric"},
        {"--select", "train.select"},
        {"--hidden", "model.hidden"},
        {"--layers", "model.layers"},
        {"--heads", "model.heads"},
        {"--ffn", "model.ffn"},
        {"--model-max-len", "model.max_len"},
        {"--model-vocab-size", "model.vocab_size"},
        {"--head-dropout", "model.head_dropout"},
        {"--encoder-dropout", "model.encoder_dropout"},
        {"--head-mode", "model.head_mode"},
    };
    return flags;
}

struct RunOptions {
    std::string task;
    fs::path train_path, valid_path, out_dir;
    std::optional<fs::path> config_path, vocab_path;
    std::size_t vocab_size = 1000; // target when the vocabulary is trained here
    std::map<std::string, std::string> field_values;
    std::vector<std::string> sets; // --set field=value
    bool freeze_encoder = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--task", task, "subtask-b or subtask-c")->required()->check(task_names());
        cmd.add_option("--train", train_path, "training CSV (text,label)")->check(CLI::ExistingFile);
        cmd.add_option("--valid", valid_path, "validation CSV (text,label)")->check(CLI::ExistingFile);
        cmd.add_option("--out", out_dir, "output directory")->required();
        cmd.add_option("--config", config_path, "JSON config overlay")->check(CLI::ExistingFile);
        cmd.add_option("--vocab", vocab_path, "pre-trained vocabulary JSON")->check(CLI::ExistingFile);
        cmd.add_option("--vocab-size", vocab_size, "vocabulary size when training one from --train");
        for (const auto& [flag, field] : field_flags()) {
            cmd.add_option(flag, field_values[field], "sets " + field);
        }
        cmd.add_option("--set", sets, "field=value override (repeatable)");
        cmd.add_flag("--freeze-encoder", freeze_encoder, "train the classification head only");
    }
};

std::uint64_t env_seed() {
    const char* s = std::getenv("DSCLS_SEED");
    if (s == nullptr || *s == '\0') return TrainConfig{}.seed;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(s, &pos);
        if (pos != std::string_view(s).size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("DSCLS_SEED is not an unsigned integer: '") + s + "'");
    }
}

std::string qualify(const RunConfig& c, std::string field) {
    if (field.starts_with("model.") || field.starts_with("train.")) return field;
    if (field == "lr") field = "base_lr";
    if (field == "batch") field = "train_batch";
    return (to_json(c.train).contains(field) ? "train." : "model.") + field;
}

// Defaults, DSCLS_SEED, --config, then flags. Model fields that depend on the
// task or vocabulary are filled in unless set explicitly.
RunConfig resolve_config(const RunOptions& o, const TaskSchema& schema, std::size_t vocab_size) {
    RunConfig c;
    c.train.seed = env_seed();
    std::set<std::string> explicit_fields;
    if (o.config_path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(*o.config_path));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file: " + std::string(e.what()));
        }
        c = run_config_from_json(j, c);
        for (const char* section : {"model", "train"}) {
            if (j.contains(section)) {
                for (const auto& [k, v] : j.at(section).items()) explicit_fields.insert(std::string(section) + "." + k);
            }
        }
    }
    auto apply = [&](const std::string& field, const std::string& value) {
        const std::string q = qualify(c, field);
        set_field(c, q, value);
        explicit_fields.insert(q);
    };
    for (const auto& [field, value] : o.field_values) {
        if (!value.empty()) apply(field, value);
    }
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects field=value, got '" + s + "'");
        apply(s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.freeze_encoder) c.train.freeze_encoder = true;

    if (!explicit_fields.contains("model.max_len")) c.model.max_len = c.train.max_len;
    if (!explicit_fields.contains("model.vocab_size")) c.model.vocab_size = vocab_size;
    if (!explicit_fields.contains("model.num_classes")) c.model.num_classes = schema.num_classes();
    if (!explicit_fields.contains("model.head_mode")) c.model.head_mode = default_head_mode(c.model.num_classes);
    c.validate();
    return c;
}

struct Inputs {
    TaskSchema schema;
    std::vector<LabeledExample> train, valid;
    Vocabulary vocab;
};

Inputs load_inputs(const std::string& task, const fs::path& train_path, const fs::path& valid_path,
                   const std::optional<fs::path>& vocab_path, std::size_t vocab_size) {
    if (train_path.empty() || valid_path.empty()) throw ConfigError("--train and --valid are required");
    Inputs in;
    in.schema = TaskSchema::from_name(task);
    in.train = load_csv(train_path, in.schema);
    in.valid = load_csv(valid_path, in.schema);
    if (vocab_path) {
        in.vocab = Vocabulary::load(*vocab_path);
    } else {
        std::vector<std::string> texts;
        for (const auto& ex : in.train) texts.push_back(ex.text);
        in.vocab = train_vocab(texts, vocab_size);
    }
    return in;
}

Json file_entry(const fs::path& p) { return Json{{"path", p.string()}, {"sha256", sha256_file(p)}}; }

Json make_manifest(const std::string& command, const std::string& task, const fs::path& train_path,
                   const fs::path& valid_path, const std::optional<fs::path>& vocab_path, std::size_t vocab_size,
                   const RunConfig& config) {
    Json m;
    m["artifact_version"] = kArtifactVersion;
    m["command"] = command;
    m["task"] = task;
    m["inputs"] = Json{{"train", file_entry(train_path)}, {"valid", file_entry(valid_path)}};
    if (vocab_path) {
        m["inputs"]["vocab"] = file_entry(*vocab_path);
    } else {
        m["vocab_size"] = vocab_size;
    }
    m["seed"] = config.train.seed;
    m["config"] = to_json(config);
    return m;
}

std::string epoch_line(const EpochRecord& r) {
    return "epoch " + std::to_string(r.epoch) + " loss " + format4(r.mean_train_loss) + " val_acc " +
           format4(r.validation.accuracy) + " val_wf1 " + format4(r.validation.weighted.f1);
}

// ---- subcommands ------------------------------------------------------------------

int cmd_tokenizer_train(const fs::path& corpus, std::size_t vocab_size, const fs::path& out_path, std::ostream& out) {
    std::vector<std::string> texts;
    if (corpus.extension() == ".csv") {
        texts = load_texts(corpus);
    } else {
        std::istringstream lines(read_file(corpus));
        for (std::string line; std::getline(lines, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            texts.push_back(line);
        }
    }
    const Vocabulary vocab = train_vocab(texts, vocab_size);
    vocab.save(out_path);
    out << "vocabulary of " << vocab.size() << " tokens written to " << out_path.string() << "\n";
    return kExitOk;
}

struct TrainJob {
    std::string task;
    fs::path train_path, valid_path, out_dir;
    std::optional<fs::path> vocab_path;
    std::size_t vocab_size = 0;
    RunConfig config;
};

int run_train_job(const TrainJob& job, const Inputs& in, std::ostream& out, std::ostream& err) {
    fs::create_directories(job.out_dir);
    const TrainResult result =
        train(job.config, in.vocab, in.schema, in.train, in.valid, [&](const EpochRecord& r) { err << epoch_line(r) << "\n"; });

    Checkpoint ckpt{job.config, in.schema, in.vocab, result.params, result.optim};
    save_checkpoint(ckpt, job.out_dir / "checkpoint.dsc");
    write_file(job.out_dir / "runlog.jsonl", result.log.to_jsonl());
    write_file(job.out_dir / "timing.jsonl", result.log.timing_jsonl());
    in.vocab.save(job.out_dir / "vocab.json");
    const Json manifest = make_manifest("train", job.task, job.train_path, job.valid_path, job.vocab_path,
                                        job.vocab_size, job.config);
    write_file(job.out_dir / "manifest.json", manifest.dump(2) + "\n");

    const auto& best = result.log.epochs.at(result.log.best_epoch - 1);
    out << "best epoch " << result.log.best_epoch << " of " << result.log.epochs.size() << "\n"
        << render(best.validation, ReportStyle::Table3);
    return kExitOk;
}

TrainJob job_from_manifest(const fs::path& path) {
    Json m;
    try {
        m = Json::parse(read_file(path));
        if (m.at("command").get<std::string>() != "train") throw ConfigError("manifest is not from a train run");
        TrainJob job;
        job.task = m.at("task").get<std::string>();
        const auto& inputs = m.at("inputs");
        auto checked = [](const Json& entry) {
            const fs::path p = entry.at("path").get<std::string>();
            const std::string want = entry.at("sha256").get<std::string>();
            const std::string got = sha256_file(p);
            if (got != want) {
                throw std::runtime_error("input '" + p.string() + "' changed since the manifest was written (sha256 " +
                                         got + ", manifest " + want + ")");
            }
            return p;
        };
        job.train_path = checked(inputs.at("train"));
        job.valid_path = checked(inputs.at("valid"));
        if (inputs.contains("vocab")) {
            job.vocab_path = checked(inputs.at("vocab"));
        } else {
            job.vocab_size = m.at("vocab_size").get<std::size_t>();
        }
        job.config = run_config_from_json(m.at("config"));
        job.config.validate();
        return job;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest: " + std::string(e.what()));
    }
}

int cmd_train(const RunOptions& o, const std::optional<fs::path>& manifest, std::ostream& out, std::ostream& err) {
    TrainJob job;
    if (manifest) {
        job = job_from_manifest(*manifest);
    } else {
        job.task = o.task;
        job.train_path = o.train_path;
        job.valid_path = o.valid_path;
        job.vocab_path = o.vocab_path;
        job.vocab_size = o.vocab_size;
    }
    job.out_dir = o.out_dir;
    const Inputs in = load_inputs(job.task, job.train_path, job.valid_path, job.vocab_path, job.vocab_size);
    if (!manifest) job.config = resolve_config(o, in.schema, in.vocab.size());
    return run_train_job(job, in, out, err);
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data, const std::string& report, std::optional<std::size_t> eval_batch,
             const std::optional<fs::path>& json_out, std::ostream& out) {
    const ReportStyle style = report_style_from_string(report);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto examples = load_csv(data, ckpt.schema);
    const auto r = evaluate(ckpt.params, ckpt.config.model, ckpt.vocab, ckpt.schema, examples,
                            eval_batch.value_or(ckpt.config.train.eval_batch), ckpt.config.train.max_len);
    out << render(r, style);
    // The table3 panel shows one averaging scheme; the JSON report keeps all of them.
    if (style == ReportStyle::Table3 || json_out) {
        const fs::path path =
            json_out.value_or(ckpt_path.parent_path() / ("eval-" + data.stem().string() + ".json"));
        write_file(path, render(r, ReportStyle::Json));
    }
    return kExitOk;
}

int cmd_predict(const fs::path& ckpt_path, const fs::path& input, const fs::path& out_path, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto texts = load_texts(input);
    const auto preds = predict(ckpt.params, ckpt.config.model, ckpt.vocab, ckpt.schema, texts,
                               ckpt.config.train.max_len, ckpt.config.train.eval_batch);
    write_file(out_path, predictions_csv(preds));
    out << preds.size() << " predictions written to " << out_path.string() << "\n";
    return kExitOk;
}

std::string slug(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

int cmd_ablate(const RunOptions& o, const std::vector<std::string>& variant_specs, unsigned threads, std::ostream& out) {
    const Inputs in = load_inputs(o.task, o.train_path, o.valid_path, o.vocab_path, o.vocab_size);
    AblationSpec spec = AblationSpec::standard(resolve_config(o, in.schema, in.vocab.size()));
    for (const auto& v : variant_specs) {
        // name=field:value
        const auto eq = v.rfind('=');
        const auto colon = eq == std::string::npos ? std::string::npos : v.find(':', eq);
        if (eq == std::string::npos || colon == std::string::npos) {
            throw ConfigError("--variant expects name=field:value, got '" + v + "'");
        }
        spec.variants.push_back({v.substr(0, eq), v.substr(eq + 1, colon - eq - 1), v.substr(colon + 1)});
    }
    // Position capacity must cover every column so variants only touch their own field.
    for (const auto& v : spec.variants) {
        RunConfig probe = spec.baseline;
        probe.model.max_len = std::numeric_limits<std::size_t>::max();
        set_field(probe, v.field, v.value);
        spec.baseline.model.max_len = std::max(spec.baseline.model.max_len, probe.train.max_len);
    }
    spec.resolve();

    const AblationResult result = run_ablation(spec, in.vocab, in.schema, in.train, in.valid, threads);
    fs::create_directories(o.out_dir / "runs");
    write_file(o.out_dir / "ablation.json", render_table(result.table, TableFormat::Json));
    write_file(o.out_dir / "ablation.md", render_table(result.table, TableFormat::Markdown));
    Json configs = Json::array();
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        const std::string name = std::to_string(i) + "-" + slug(result.table.columns[i].name);
        configs.push_back(Json{{"column", result.table.columns[i].name}, {"config", to_json(run.config)}});
        if (run.log) write_file(o.out_dir / "runs" / (name + ".runlog.jsonl"), run.log->to_jsonl());
    }
    Json manifest = make_manifest("ablate", o.task, o.train_path, o.valid_path, o.vocab_path, o.vocab_size,
                                  spec.baseline);
    manifest["columns"] = std::move(configs);
    write_file(o.out_dir / "manifest.json", manifest.dump(2) + "\n");

    out << render_table(result.table, TableFormat::Markdown);
    bool any_failed = false;
    for (const auto& col : result.table.columns) {
        if (!col.values) {
            any_failed = true;
            out << "column '" << col.name << "' failed: " << col.error << "\n";
        }
    }
    return any_failed ? kExitRuntime : kExitOk;
}

int cmd_synth(const std::string& task, std::size_t n, double separability, std::optional<std::uint64_t> seed,
              const fs::path& out_path, std::ostream& out) {
    const TaskSchema schema = TaskSchema::from_name(task);
    const auto data = synth_corpus(schema, n, seed.value_or(env_seed()), separability);
    write_csv(out_path, data, schema);
    out << data.size() << " examples written to " << out_path.string() << "\n";
    return kExitOk;
}

int cmd_serve(const fs::path& ckpt_path, const std::string& host, int port, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    httplib::Server server;
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"status\":\"ok\"}", "application/json");
    });
    server.Post("/classify", [&ckpt](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(classify_json(ckpt, req.body), "application/json");
        } catch (const std::invalid_argument& e) {
            res.status = 400;
            res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    out << "listening on " << host << ":" << port << std::endl;
    if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Devanagari text classification: tokenizer, training, evaluation and ablations", "dscls"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kArtifactVersion);

    // tokenizer-train
    fs::path corpus, vocab_out;
    std::size_t tok_vocab_size = 1000;
    auto* tok = app.add_subcommand("tokenizer-train", "train a byte-level BPE vocabulary");
    tok->add_option("--corpus", corpus, "text file (one document per line) or CSV with a text column")
        ->required()
        ->check(CLI::ExistingFile);
    tok->add_option("--vocab-size", tok_vocab_size, "target vocabulary size")->required();
    tok->add_option("--out", vocab_out, "output vocab.json")->required();

    // train
    RunOptions train_opts;
    std::optional<fs::path> manifest;
    auto* train_cmd = app.add_subcommand("train", "train a classifier and write a checkpoint");
    train_opts.add_to(*train_cmd);
    train_cmd->get_option("--task")->required(false);
    train_cmd->add_option("--from-manifest", manifest, "replay the run recorded in a manifest")->check(CLI::ExistingFile);

    // eval
    fs::path eval_ckpt, eval_data;
    std::string report = "table3";
    std::optional<std::size_t> eval_batch;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labelled CSV");
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", report, "table3, ablation_row or json");
    eval_cmd->add_option("--eval-batch", eval_batch);
    std::optional<fs::path> eval_json;
    eval_cmd->add_option("--json-out", eval_json, "full JSON report (default: eval-<data>.json beside the checkpoint)");

    // predict
    fs::path pred_ckpt, pred_in, pred_out;
    auto* pred_cmd = app.add_subcommand("predict", "label every text of a CSV");
    pred_cmd->add_option("--checkpoint", pred_ckpt)->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("--input", pred_in)->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("--out", pred_out)->required();

    // ablate
    RunOptions ablate_opts;
    std::vector<std::string> variants;
    unsigned threads = 0;
    auto* ablate_cmd = app.add_subcommand("ablate", "baseline plus one-factor variants");
    ablate_opts.add_to(*ablate_cmd);
    ablate_cmd->get_option("--train")->required();
    ablate_cmd->get_option("--valid")->required();
    ablate_cmd->add_option("--variant", variants, "extra column: name=field:value (repeatable)");
    ablate_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");

    // synth
    std::string synth_task;
    std::size_t synth_n = 0;
    double separability = 1.0;
    std::optional<std::uint64_t> synth_seed;
    fs::path synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic labelled corpus");
    synth_cmd->add_option("--task", synth_task)->required()->check(task_names());
    synth_cmd->add_option("--n", synth_n)->required();
    synth_cmd->add_option("--separability", separability);
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--out", synth_out)->required();

    // serve
    fs::path serve_ckpt;
    int port = 8080;
    std::string host = "127.0.0.1";
    auto* serve_cmd = app.add_subcommand("serve", "HTTP classification endpoint");
    serve_cmd->add_option("--checkpoint", serve_ckpt)->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", port);
    serve_cmd->add_option("--host", host);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kArtifactVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (tok->parsed()) return cmd_tokenizer_train(corpus, tok_vocab_size, vocab_out, out);
        if (train_cmd->parsed()) {
            if (!manifest && train_opts.task.empty()) throw ConfigError("--task is required");
            return cmd_train(train_opts, manifest, out, err);
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, report, eval_batch, eval_json, out);
        if (pred_cmd->parsed()) return cmd_predict(pred_ckpt, pred_in, pred_out, out);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts, variants, threads, out);
        if (synth_cmd->parsed()) return cmd_synth(synth_task, synth_n, separability, synth_seed, synth_out, out);
        if (serve_cmd->parsed()) return cmd_serve(serve_ckpt, host, port, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace dscls
