// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rqvqa/edit_search.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/heuristics.hpp"
#include "rqvqa/llm.hpp"
#include "rqvqa/tree.hpp"

namespace rqvqa {

struct ExampleRecord {
  std::string id;
  std::string caption;
  ParseTree caption_tree;
  std::string question;
  ParseTree question_tree;
  std::vector<std::string> gold_answers;
};

/// A failure while running one example; carries the example id.
class ExampleError : public Error {
 public:
  ExampleError(std::string id, const std::string& what)
      : Error("example " + id + ": " + what), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

enum class MetricMode { kAuto, kPlain, kLeaveOneOut };

struct PipelineParams {
  SearchParams search;
  bool two_stage = true;
  bool plain_heuristics = false;
  ConfidenceMode confidence = ConfidenceMode::kJoint;
  MetricMode metric = MetricMode::kAuto;
  std::string model = "mock";
  int max_tokens = 16;
  std::vector<std::string> stop = {"\n"};
  std::string exemplars;
};

struct Backends {
  std::shared_ptr<const CandidateScorer> scorer;
  std::shared_ptr<CompletionClient> client;
};

/// One LLM request made while answering an example.
struct LlmCall {
  std::string stage;  // "generation", "choosing" or "fallback"
  std::optional<std::size_t> prompt_index;
  std::string prompt;
  Completion completion;
  std::optional<double> confidence;
};

struct Prediction {
  std::string id;
  std::string final_answer;
  std::string final_normalized;
  std::optional<PromptSet> prompt_set;
  std::vector<AnswerCandidate> candidates;
  std::vector<LlmCall> calls;
  std::vector<std::string> gold_answers;
  std::optional<double> accuracy;
  std::size_t k_used = 0;
  std::size_t llm_calls = 0;
  bool choosing_stage = false;
  std::optional<std::string> error;
};

struct EvalOptions {
  std::size_t concurrency = 4;
  bool fail_fast = false;
};

struct Report {
  nlohmann::json config;
  std::vector<Prediction> predictions;
  double mean_accuracy = 0.0;
  std::size_t llm_calls = 0;
  std::size_t errors = 0;
  // Run-dependent; kept out of the canonical JSON body.
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
};

/// Parses one dataset object. `line` is only used in error messages.
ExampleRecord parse_record(const nlohmann::json& object, std::size_t line);
/// One JSON object per line. Throws InputError naming the line for malformed
/// rows, missing fields, unparseable trees or duplicate ids.
std::vector<ExampleRecord> load_dataset(const std::filesystem::path& path);

/// Official VQA accuracy. kAuto uses leave-one-out averaging for exactly ten
/// gold answers and min(matches / 3, 1) otherwise.
double vqa_accuracy(const std::string& predicted, const std::vector<std::string>& gold,
                    MetricMode mode = MetricMode::kAuto);

/// Edit search, top-k selection and normalization for one example, without any LLM.
PromptSet build_prompt_set(const ExampleRecord& record, const SearchParams& params,
                           const CandidateScorer& scorer);

/// Two-stage answering of one example. Throws ExampleError.
Prediction run_example(const ExampleRecord& record, const PipelineParams& params, const Backends& backends);

/// Runs every example (concurrently); output order equals input order.
/// Without fail_fast, a failing example yields a prediction carrying its error.
std::vector<Prediction> run_dataset(const std::vector<ExampleRecord>& dataset, const PipelineParams& params,
                                    const Backends& backends, const EvalOptions& options = {});

/// run_dataset plus scoring against gold answers, which every record must have.
/// Without fail_fast, a failing example is reported with accuracy 0 and its error.
Report evaluate(const std::vector<ExampleRecord>& dataset, const PipelineParams& params,
                const Backends& backends, const EvalOptions& options = {}, nlohmann::json config = {});

/// Rescores existing predictions (which must carry gold answers).
Report evaluate_predictions(std::vector<Prediction> predictions, MetricMode metric, nlohmann::json config = {});

nlohmann::json to_json(const ConstituentRef& ref);
nlohmann::json to_json(const ScoreBreakdown& breakdown);
nlohmann::json to_json(const EditCandidate& candidate, std::optional<double> p = std::nullopt);
nlohmann::json to_json(const PromptSet& prompt_set);
nlohmann::json to_json(const AnswerCandidate& candidate);
nlohmann::json to_json(const Prediction& prediction, bool include_trace);
/// Reads the fields written by to_json(Prediction): id, final_answer,
/// gold_answers, candidates, k_used, llm_calls, error.
Prediction prediction_from_json(const nlohmann::json& object);

/// Canonical body: sorted keys, no run-dependent counters.
nlohmann::json report_to_json(const Report& report);
/// id,final_answer,accuracy,m,k_used,llm_calls
std::string report_to_csv(const Report& report);

}  // namespace rqvqa
