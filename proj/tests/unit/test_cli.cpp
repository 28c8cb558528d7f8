// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rqvqa/cli.hpp"

namespace rqvqa {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::string kData = RQVQA_TEST_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rqvqa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rqvqa_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::vector<std::string> kE2e = {"--input", kData + "/e2e_dataset.jsonl", "--embeddings",
                                       kData + "/e2e_vectors.txt", "--mock-script", kData + "/e2e_mock.json"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

TEST(CliEdit, WritesOneLinePerExample) {
  auto r = run({"edit", "--input", kData + "/blow_dryer.jsonl", "--labels", "NP", "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["id"], "blow-dryer");
  EXPECT_EQ(rows[0]["original"], "What is the appliance the woman is holding used for?");
  EXPECT_LE(rows[0]["candidates"].size(), 3u);
}

TEST(CliEdit, LargerRhoKeepsEverySmallerRhoPrompt) {
  auto tight = lines(run(with(kE2e, {"edit", "--rho", "0", "--k", "100"})).out);
  auto loose = lines(run(with(kE2e, {"edit", "--rho", "1", "--k", "100"})).out);
  ASSERT_EQ(tight.size(), 50u);
  ASSERT_EQ(loose.size(), 50u);
  std::size_t grew = 0;
  for (std::size_t i = 0; i < tight.size(); ++i) {
    std::set<std::string> wide;
    for (const auto& c : loose[i]["candidates"]) wide.insert(c["surface"].get<std::string>());
    for (const auto& c : tight[i]["candidates"]) EXPECT_TRUE(wide.count(c["surface"].get<std::string>()));
    if (loose[i]["candidates"].size() > tight[i]["candidates"].size()) ++grew;
  }
  EXPECT_GT(grew, 0u);
}

TEST(CliEdit, ZeroKGivesEmptySets) {
  auto r = run(with(kE2e, {"edit", "--k", "0"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : lines(r.out)) EXPECT_TRUE(row["candidates"].empty());
}

TEST(CliAnswer, DeterministicAndCached) {
  auto cache = temp_dir("answer_cache");
  auto args = with(kE2e, {"answer", "--cache-dir", cache.string()});
  auto first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  auto second = run(args);
  EXPECT_EQ(first.out, second.out);
  EXPECT_NE(second.err.find("backend_calls=0"), std::string::npos) << second.err;
  auto preds = lines(first.out);
  ASSERT_EQ(preds.size(), 50u);
  for (const auto& p : preds) {
    EXPECT_EQ(p["llm_calls"], p["k_used"].get<int>() + 1);
    EXPECT_TRUE(p["choosing_stage"].get<bool>());
  }
  EXPECT_EQ(run(with(kE2e, {"answer", "--concurrency", "1"})).out, first.out);
}

TEST(CliAnswer, TwoStageAblationSkipsChoosing) {
  auto r = run(with(kE2e, {"answer", "--ablate", "two-stage"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& p : lines(r.out)) {
    EXPECT_FALSE(p["choosing_stage"].get<bool>());
    EXPECT_EQ(p["llm_calls"], std::max(1, p["k_used"].get<int>()));
  }
}

TEST(CliAnswer, TraceIncludesPrompts) {
  auto r = run({"answer", "--input", kData + "/degenerate.jsonl", "--mock-script", kData + "/degenerate_mock.json",
                "--trace"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto preds = lines(r.out);
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0]["trace"][0]["stage"], "fallback");
}

TEST(CliAnswer, InputErrorsExitTwo) {
  ::unsetenv("RQVQA_API_KEY");
  auto r = run({"answer", "--input", kData + "/blow_dryer.jsonl", "--backend", "http", "--endpoint",
                "https://api.example.invalid/v1/completions"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("RQVQA_API_KEY"), std::string::npos);

  EXPECT_EQ(run({"answer", "--input", kData + "/blow_dryer.jsonl"}).code, 2);
  EXPECT_EQ(run(with(kE2e, {"answer", "--ablate", "nothing"})).code, 2);
  EXPECT_EQ(run(with(kE2e, {"answer", "--rho", "-1"})).code, 2);
  EXPECT_EQ(run({"answer", "--input", "/nonexistent.jsonl", "--mock-script", kData + "/e2e_mock.json"}).code, 2);
  EXPECT_EQ(run({"--bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(CliAnswer, BackendFailureExitsOne) {
  auto dir = temp_dir("failing");
  std::ofstream(dir / "mock.json") << R"({"*": {"error": {"status": 400, "reason": "rejected"}}})";
  auto r = run({"answer", "--input", kData + "/degenerate.jsonl", "--mock-script", (dir / "mock.json").string(),
                "--fail-fast", "--concurrency", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no-constituents"), std::string::npos) << r.err;
}

TEST(CliEval, ScoresPredictionsFile) {
  auto dir = temp_dir("eval");
  auto r = run({"eval", "--input", kData + "/predictions.jsonl", "--output", (dir / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "mean_accuracy=0.6500\n");
  auto report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["counts"]["examples"], 2);
  EXPECT_DOUBLE_EQ(report["mean_accuracy"].get<double>(), 0.65);
  auto csv = slurp(dir / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,final_answer,accuracy,m,k_used,llm_calls");

  r = run({"eval", "--input", kData + "/predictions.jsonl", "--metric", "plain"});
  ASSERT_EQ(r.code, 0) << r.err;
  // Plain: min(1, 5/3) and min(1, 1/3).
  EXPECT_EQ(r.out, "mean_accuracy=0.6667\n");
}

TEST(CliEval, DatasetReportIsReproducible) {
  auto dir = temp_dir("eval_dataset");
  auto args = with(kE2e, {"eval", "--output", (dir / "a.json").string()});
  ASSERT_EQ(run(args).code, 0);
  args.back() = (dir / "b.json").string();
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST(CliEval, EmptyInputExitsTwo) {
  auto dir = temp_dir("empty");
  std::ofstream(dir / "empty.jsonl").close();
  auto r = run({"eval", "--input", (dir / "empty.jsonl").string(), "--mock-script", kData + "/e2e_mock.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST(CliConfig, JsonAndTomlWithFlagsWinning) {
  auto dir = temp_dir("config");
  std::ofstream(dir / "c.json") << json{{"input", kData + "/e2e_dataset.jsonl"},
                                        {"embeddings", kData + "/e2e_vectors.txt"},
                                        {"k", 0},
                                        {"labels", {"NP"}}}
                                       .dump();
  std::ofstream(dir / "c.toml") << "input = \"" << kData << "/e2e_dataset.jsonl\"\nembeddings = \"" << kData
                                << "/e2e_vectors.txt\"\nk = 0\nlabels = [\"NP\"]\n";
  for (const char* name : {"c.json", "c.toml"}) {
    auto r = run({"edit", "--config", (dir / name).string()});
    ASSERT_EQ(r.code, 0) << name << ": " << r.err;
    for (const auto& row : lines(r.out)) EXPECT_TRUE(row["candidates"].empty()) << name;
    r = run({"edit", "--config", (dir / name).string(), "--k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t total = 0;
    for (const auto& row : lines(r.out)) total += row["candidates"].size();
    EXPECT_GT(total, 0u) << name;
  }
  std::ofstream(dir / "bad.json") << "{ nope";
  EXPECT_EQ(run({"edit", "--config", (dir / "bad.json").string()}).code, 2);
}

}  // namespace
}  // namespace rqvqa
