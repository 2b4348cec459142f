// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "dscls/ablation.hpp"
#include "dscls/cli.hpp"
#include "dscls/engine.hpp"
#include "test_util.hpp"

using namespace dscls;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "dscls");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Shared small workspace: a synthetic corpus and one trained checkpoint.
struct Workspace {
    test::TempDir dir{"cli"};
    std::string train_csv = (dir / "train.csv").string();
    std::string valid_csv = (dir / "valid.csv").string();
    std::string run_dir = (dir / "run").string();

    Workspace() {
        REQUIRE(run({"synth", "--task", "subtask-c", "--n", "60", "--separability", "0.7", "--seed", "1", "--out", train_csv})
                    .code == 0);
        REQUIRE(run({"synth", "--task", "subtask-c", "--n", "30", "--separability", "0.7", "--seed", "2", "--out", valid_csv})
                    .code == 0);
        const auto r = run(train_args(run_dir));
        INFO(r.err);
        REQUIRE(r.code == 0);
    }

    std::vector<std::string> train_args(const std::string& out) const {
        return {"train", "--task", "subtask-c", "--train", train_csv, "--valid", valid_csv, "--out", out,
                "--vocab-size", "300", "--hidden", "16", "--layers", "1", "--heads", "2", "--ffn", "32",
                "--max-len", "32", "--epochs", "3", "--batch", "8", "--lr", "1e-3", "--seed", "5"};
    }

    std::string checkpoint() const { return run_dir + "/checkpoint.dsc"; }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

} // namespace

TEST_CASE("usage errors exit 1 and runtime errors exit 2") {
    auto r = run({"frobnicate"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
    r = run({"train", "--task", "subtask-z", "--train", "a", "--valid", "b", "--out", "c"});
    CHECK(r.code == 1);
    r = run({"eval", "--checkpoint", "/nonexistent.dsc", "--data", "/nonexistent.csv"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);

    auto& w = workspace();
    auto args = w.train_args((w.dir / "bad").string());
    *(std::find(args.begin(), args.end(), "--heads") + 1) = "3";
    r = run(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("hidden not divisible by heads") != std::string::npos);

    test::spit(w.dir / "garbage.dsc", "not a checkpoint");
    r = run({"eval", "--checkpoint", (w.dir / "garbage.dsc").string(), "--data", w.valid_csv});
    CHECK(r.code == 2);
    CHECK(r.err == "error: bad magic: not a dscls checkpoint\n");

    test::spit(w.dir / "wrong.csv", "text,label\nx,hate\n");
    r = run({"eval", "--checkpoint", w.checkpoint(), "--data", (w.dir / "wrong.csv").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown label 'hate' at row 1") != std::string::npos);

    CHECK(run({"--version"}).out == std::string(kArtifactVersion) + "\n");
}

TEST_CASE("the real binary reports the same exit codes") {
    const std::string bin = DSCLS_CLI_PATH;
    CHECK(WEXITSTATUS(std::system((bin + " >/dev/null 2>&1").c_str())) == 1);
    CHECK(WEXITSTATUS(std::system((bin + " --version >/dev/null 2>&1").c_str())) == 0);
    test::TempDir dir("bin");
    test::spit(dir / "x.dsc", "DSC1");
    const std::string data = (dir / "d.csv").string();
    test::spit(data, "text,label\na,hate\n");
    CHECK(WEXITSTATUS(std::system((bin + " eval --checkpoint " + (dir / "x.dsc").string() + " --data " + data +
                                   " >/dev/null 2>&1")
                                      .c_str())) == 2);
}

TEST_CASE("train writes its artifacts and eval reproduces the best epoch") {
    auto& w = workspace();
    for (const char* f : {"checkpoint.dsc", "runlog.jsonl", "timing.jsonl", "vocab.json", "manifest.json"}) {
        CHECK(std::filesystem::exists(std::filesystem::path(w.run_dir) / f));
    }
    const auto ckpt = load_checkpoint(w.checkpoint());
    const auto runlog = test::slurp(w.run_dir + "/runlog.jsonl");
    std::istringstream lines(runlog);
    nlohmann::json best;
    std::size_t count = 0;
    for (std::string line; std::getline(lines, line);) {
        const auto j = nlohmann::json::parse(line);
        ++count;
        if (j.at("best").get<bool>()) best = j;
    }
    CHECK(count == 3);
    REQUIRE(best.is_object());

    const std::string json_out = (w.dir / "eval.json").string();
    const auto r = run({"eval", "--checkpoint", w.checkpoint(), "--data", w.valid_csv, "--report", "json"});
    REQUIRE(r.code == 0);
    const auto report = report_from_json(r.out);
    CHECK(report == report_from_json(best.at("validation").dump()));

    const auto t3 = run({"eval", "--checkpoint", w.checkpoint(), "--data", w.valid_csv, "--json-out", json_out});
    REQUIRE(t3.code == 0);
    CHECK(t3.out == render(report, ReportStyle::Table3));
    CHECK(report_from_json(test::slurp(json_out)) == report);
    const auto row = run({"eval", "--checkpoint", w.checkpoint(), "--data", w.valid_csv, "--report", "ablation_row"});
    CHECK(row.out == render(report, ReportStyle::AblationRow));

    const auto manifest = nlohmann::json::parse(test::slurp(w.run_dir + "/manifest.json"));
    CHECK(manifest.at("artifact_version") == kArtifactVersion);
    CHECK(manifest.at("seed") == 5);
    CHECK(manifest.at("inputs").at("train").at("sha256") == sha256_file(w.train_csv));
    CHECK(manifest.at("config") == nlohmann::json::parse(to_json(ckpt.config).dump()));
}

TEST_CASE("identical train invocations and manifest replay give identical run logs") {
    auto& w = workspace();
    const std::string again = (w.dir / "again").string();
    REQUIRE(run(w.train_args(again)).code == 0);
    const auto original = test::slurp(w.run_dir + "/runlog.jsonl");
    CHECK(test::slurp(again + "/runlog.jsonl") == original);
    CHECK(test::slurp(again + "/checkpoint.dsc") == test::slurp(w.checkpoint()));

    const std::string replay = (w.dir / "replay").string();
    const auto r = run({"train", "--from-manifest", w.run_dir + "/manifest.json", "--out", replay});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(test::slurp(replay + "/runlog.jsonl") == original);

    // A changed input no longer matches the recorded digest.
    test::TempDir tampered("tamper");
    auto m = nlohmann::json::parse(test::slurp(w.run_dir + "/manifest.json"));
    const std::string copy = (tampered / "train.csv").string();
    test::spit(copy, test::slurp(w.train_csv) + "\nextra,individual\n");
    m["inputs"]["train"]["path"] = copy;
    test::spit(tampered / "m.json", m.dump());
    const auto bad = run({"train", "--from-manifest", (tampered / "m.json").string(), "--out", (tampered / "o").string()});
    CHECK(bad.code == 2);
}

TEST_CASE("DSCLS_SEED sets the default seed") {
    test::TempDir dir("seed");
    ::setenv("DSCLS_SEED", "77", 1);
    const auto r = run({"synth", "--task", "subtask-b", "--n", "20", "--out", (dir / "a.csv").string()});
    ::unsetenv("DSCLS_SEED");
    REQUIRE(r.code == 0);
    CHECK(load_csv(dir / "a.csv", TaskSchema::subtask_b()) == synth_corpus(TaskSchema::subtask_b(), 20, 77, 1.0));
    REQUIRE(run({"synth", "--task", "subtask-b", "--n", "20", "--seed", "77", "--out", (dir / "b.csv").string()}).code ==
            0);
    CHECK(test::slurp(dir / "a.csv") == test::slurp(dir / "b.csv"));
}

TEST_CASE("predict and classify share one inference path") {
    auto& w = workspace();
    const std::string preds = (w.dir / "preds.csv").string();
    REQUIRE(run({"predict", "--checkpoint", w.checkpoint(), "--input", w.valid_csv, "--out", preds}).code == 0);
    const auto rows = parse_csv(test::slurp(preds));
    REQUIRE(rows.size() == 31);
    CHECK(rows[0] == CsvRow{"index", "predicted_label", "confidence"});

    const auto ckpt = load_checkpoint(w.checkpoint());
    const auto texts = load_texts(w.valid_csv);
    nlohmann::json req{{"texts", texts}};
    const auto body = nlohmann::json::parse(classify_json(ckpt, req.dump()));
    const auto& results = body.at("results");
    REQUIRE(results.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        CHECK(results[i].at("label") == rows[i + 1][1]);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", results[i].at("confidence").get<double>());
        CHECK(buf == rows[i + 1][2]);
    }
    CHECK_THROWS_AS(classify_json(ckpt, "{\"text\": 1}"), std::invalid_argument);
    CHECK_THROWS_AS(classify_json(ckpt, "not json"), std::invalid_argument);
}

TEST_CASE("serve answers health checks and concurrent classify requests") {
    auto& w = workspace();
    const int port = 20000 + static_cast<int>(::getpid() % 20000);
    const std::string pidfile = (w.dir / "serve.pid").string();
    const std::string cmd = std::string(DSCLS_CLI_PATH) + " serve --checkpoint " + w.checkpoint() + " --port " +
                            std::to_string(port) + " >/dev/null 2>&1 & echo $! > " + pidfile;
    REQUIRE(std::system(cmd.c_str()) == 0);
    httplib::Client client("127.0.0.1", port);
    bool up = false;
    for (int i = 0; i < 100 && !up; ++i) {
        auto res = client.Get("/healthz");
        up = res && res->status == 200;
        if (!up) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    CHECK(up);
    if (up) {
        const auto ckpt = load_checkpoint(w.checkpoint());
        const auto texts = load_texts(w.valid_csv);
        std::vector<std::string> bodies(texts.size()), expected(texts.size());
        {
            std::vector<std::jthread> pool;
            for (std::size_t i = 0; i < texts.size(); ++i) {
                expected[i] = classify_json(ckpt, nlohmann::json{{"texts", {texts[i]}}}.dump());
                pool.emplace_back([&, i] {
                    httplib::Client c("127.0.0.1", port);
                    auto res = c.Post("/classify", nlohmann::json{{"texts", {texts[i]}}}.dump(), "application/json");
                    if (res && res->status == 200) bodies[i] = res->body;
                });
            }
        }
        for (std::size_t i = 0; i < texts.size(); ++i) CHECK(bodies[i] == expected[i]);
        auto bad = client.Post("/classify", "{\"texts\": 3}", "application/json");
        REQUIRE(bad);
        CHECK(bad->status == 400);
    }
    CHECK(std::system(("kill $(cat " + pidfile + ")").c_str()) == 0);
}

TEST_CASE("ablate writes the table, run logs and manifest") {
    auto& w = workspace();
    const std::string out = (w.dir / "abl").string();
    const auto r = run({"ablate", "--task", "subtask-c", "--train", w.train_csv, "--valid", w.valid_csv, "--out", out,
                        "--vocab-size", "300", "--hidden", "16", "--layers", "1", "--heads", "2", "--ffn", "32",
                        "--max-len", "32", "--epochs", "2", "--lr", "1e-3", "--threads", "1"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("| Metric | Original | Sequence Length (128) | Learning Rate (1e-5) | Batch Size (8) |\n", 0) == 0);
    CHECK(test::slurp(out + "/ablation.md") == r.out);
    CHECK(table_from_json(test::slurp(out + "/ablation.json")).columns.size() == 4);
    std::size_t logs = 0;
    for (const auto& e : std::filesystem::directory_iterator(out + "/runs")) logs += e.path().string().ends_with(".runlog.jsonl");
    CHECK(logs == 4);
    const auto manifest = nlohmann::json::parse(test::slurp(out + "/manifest.json"));
    CHECK(manifest.at("columns").size() == 4);

    const auto bad = run({"ablate", "--task", "subtask-c", "--train", w.train_csv, "--valid", w.valid_csv, "--out", out,
                          "--variant", "Same=batch:16"});
    CHECK(bad.code == 1);
}
