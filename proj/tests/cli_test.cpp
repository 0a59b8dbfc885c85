#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "chartlab/chart_env.hpp"
#include "chartlab/grpo.hpp"
#include "chartlab/runio.hpp"

using namespace chartlab;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(CHARTLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("chartlab_cli_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("end-to-end smoke: generate, train, evaluate, grade, export") {
    TempDir dir;

    REQUIRE(run("gen-data --seed 5 --difficulty hard --count 12 --out-dir " + (dir / "") +
                " --out hard.jsonl --force") == 0);
    const auto corpus = env::read_corpus(dir / "hard.jsonl");
    REQUIRE(corpus.size() == 12);

    SUBCASE("rl training writes metrics, manifest, and checkpoint") {
        REQUIRE(run("train --method rl --corpus " + (dir / "hard.jsonl") + " --out-dir " +
                    (dir / "rl") + " --steps 4 --seed 1 --force") == 0);
        CHECK(fs::exists(dir / "rl/metrics.csv"));
        CHECK(fs::exists(dir / "rl/checkpoint.json"));
        CHECK(fs::exists(dir / "rl/manifest.json"));

        const auto metrics = grpo::read_metrics_csv(dir / "rl/metrics.csv");
        CHECK(metrics.size() == 4);

        const auto manifest =
            runio::RunManifest::from_json(runio::read_json_file(dir / "rl/manifest.json"));
        CHECK(manifest.command.find("train") != std::string::npos);
        CHECK(manifest.corpus_checksums.size() == 1);

        SUBCASE("evaluation consumes the checkpoint") {
            REQUIRE(run("eval --checkpoint " + (dir / "rl/checkpoint.json") + " --corpus " +
                        (dir / "hard.jsonl") + " --out " + (dir / "report.json") + " --force") == 0);
            const auto out = runio::read_json_file(dir / "report.json");
            CHECK(out.at("report").at("n").get<int>() == 12);
            CHECK(out.at("report").at("accuracy").get<double>() >= 0.0);
            CHECK(out.at("config").at("corpus_checksum").get<std::string>() ==
                  runio::file_checksum(dir / "hard.jsonl"));
        }
        SUBCASE("resume continues from the checkpoint") {
            REQUIRE(run("train --method rl --corpus " + (dir / "hard.jsonl") + " --out-dir " +
                        (dir / "rl2") + " --steps 6 --seed 1 --resume " +
                        (dir / "rl/checkpoint.json") + " --force") == 0);
            const auto resumed = grpo::read_metrics_csv(dir / "rl2/metrics.csv");
            REQUIRE(!resumed.empty());
            CHECK(resumed.front().step == 4);
        }
        SUBCASE("curve export renders figures") {
            REQUIRE(run("export-curves " + (dir / "rl/metrics.csv") + " --labels rl --out-dir " +
                        (dir / "curves") + " --force") == 0);
            CHECK(fs::exists(dir / "curves/mean_accuracy_reward.svg"));
        }
    }

    SUBCASE("supervised baselines train from the same corpus") {
        REQUIRE(run("train --method cot-sft --corpus " + (dir / "hard.jsonl") + " --out-dir " +
                    (dir / "cot") + " --epochs 2 --seed 1 --force") == 0);
        CHECK(fs::exists(dir / "cot/checkpoint.json"));
        REQUIRE(run("train --method sft --corpus " + (dir / "hard.jsonl") + " --out-dir " +
                    (dir / "ans") + " --epochs 2 --seed 1 --force") == 0);
        CHECK(fs::exists(dir / "ans/checkpoint.json"));
    }

    SUBCASE("grading scores a response file against the corpus") {
        std::ofstream out(dir / "responses.jsonl");
        for (const auto& task : corpus) {
            nlohmann::json j{{"task_id", task.task_id},
                             {"response_text", resp::render(resp::tokens_for_program(
                                                   env::canonical_program(task.query)))}};
            out << j.dump() << "\n";
        }
        out.close();
        REQUIRE(run("grade --corpus " + (dir / "hard.jsonl") + " --responses " +
                    (dir / "responses.jsonl") + " --out " + (dir / "grades.jsonl") + " --force") == 0);
        std::ifstream in(dir / "grades.jsonl");
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            CHECK(j.at("accuracy").get<int>() == 1);
            CHECK(j.at("format").get<int>() == 1);
            ++n;
        }
        CHECK(n == 12);
    }
}

TEST_CASE("cli rejects bad invocations") {
    TempDir dir;
    CHECK(run("train") != 0);                       // missing required corpus
    CHECK(run("no-such-command") != 0);
    CHECK(run("eval --checkpoint missing.json --corpus missing.jsonl") != 0);
}

TEST_SUITE_END();
