// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "rqvqa/prompts.hpp"

namespace rqvqa {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string without_spaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

std::string shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc() ? end : buf);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const std::string& require_string(const json& object, const char* field, std::size_t line) {
  auto it = object.find(field);
  if (it == object.end()) {
    throw InputError("line " + std::to_string(line) + ": missing field " + field);
  }
  if (!it->is_string()) {
    throw InputError("line " + std::to_string(line) + ": field " + field + " must be a string");
  }
  return it->get_ref<const std::string&>();
}

ParseTree parse_tree_field(const json& object, const char* field, std::size_t line) {
  try {
    return parse_bracketed(require_string(object, field, line));
  } catch (const ParseError& e) {
    throw InputError("line " + std::to_string(line) + ": malformed " + field + ": " + e.what());
  }
}

Completion call(const Backends& backends, const PipelineParams& params, Prediction& pred, std::string stage,
                std::optional<std::size_t> index, const std::string& prompt) {
  CompletionRequest request;
  request.model = params.model;
  request.prompt = prompt;
  request.max_tokens = params.max_tokens;
  request.stop = params.stop;
  Completion completion = backends.client->complete(request);
  pred.calls.push_back(LlmCall{std::move(stage), index, prompt, completion, std::nullopt});
  ++pred.llm_calls;
  return completion;
}

void score(Prediction& pred, MetricMode metric) {
  if (pred.error || pred.gold_answers.empty()) {
    pred.accuracy = pred.gold_answers.empty() && !pred.error ? std::nullopt : std::optional<double>(0.0);
    return;
  }
  pred.accuracy = vqa_accuracy(pred.final_answer, pred.gold_answers, metric);
}

void summarize(Report& report) {
  double total = 0.0;
  for (const auto& pred : report.predictions) {
    total += pred.accuracy.value_or(0.0);
    report.llm_calls += pred.llm_calls;
    if (pred.error) ++report.errors;
  }
  report.mean_accuracy =
      report.predictions.empty() ? 0.0 : total / static_cast<double>(report.predictions.size());
}

}  // namespace

ExampleRecord parse_record(const json& object, std::size_t line) {
  if (!object.is_object()) throw InputError("line " + std::to_string(line) + ": not a JSON object");
  ExampleRecord record{
      require_string(object, "id", line),
      require_string(object, "caption", line),
      parse_tree_field(object, "caption_tree", line),
      require_string(object, "question", line),
      parse_tree_field(object, "question_tree", line),
      {},
  };
  if (auto it = object.find("gold_answers"); it != object.end()) {
    if (!it->is_array()) throw InputError("line " + std::to_string(line) + ": gold_answers must be an array");
    for (const auto& answer : *it) {
      if (!answer.is_string()) {
        throw InputError("line " + std::to_string(line) + ": gold_answers must hold strings");
      }
      record.gold_answers.push_back(answer.get<std::string>());
    }
  }
  if (without_spaces(render_surface(record.question_tree)) != without_spaces(record.question)) {
    throw InputError("line " + std::to_string(line) + ": question_tree leaves do not match question");
  }
  return record;
}

std::vector<ExampleRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::vector<ExampleRecord> records;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    ExampleRecord record = parse_record(object, line_no);
    if (!ids.insert(record.id).second) {
      throw InputError("line " + std::to_string(line_no) + ": duplicate id " + record.id);
    }
    records.push_back(std::move(record));
  }
  return records;
}

double vqa_accuracy(const std::string& predicted, const std::vector<std::string>& gold, MetricMode mode) {
  if (gold.empty()) throw InvalidArgument("vqa_accuracy: empty gold answer list");
  const std::string answer = normalize_answer(predicted);
  std::vector<bool> match;
  match.reserve(gold.size());
  std::size_t matches = 0;
  for (const auto& g : gold) {
    match.push_back(normalize_answer(g) == answer);
    if (match.back()) ++matches;
  }
  bool leave_one_out = mode == MetricMode::kLeaveOneOut || (mode == MetricMode::kAuto && gold.size() == 10);
  if (!leave_one_out || gold.size() < 2) {
    return std::min(static_cast<double>(matches) / 3.0, 1.0);
  }
  double total = 0.0;
  for (bool m : match) total += std::min(static_cast<double>(matches - (m ? 1 : 0)) / 3.0, 1.0);
  return total / static_cast<double>(gold.size());
}

PromptSet build_prompt_set(const ExampleRecord& record, const SearchParams& params,
                           const CandidateScorer& scorer) {
  auto candidates = search(record.question_tree, record.caption_tree, params, scorer);
  // A zero score would get zero prompt probability; such edits never reach the LLM.
  std::erase_if(candidates, [](const EditCandidate& c) { return !(c.breakdown.f > 0.0); });
  return normalize_prompt_probs(record.question_tree, select_top_k(std::move(candidates), params.k));
}

Prediction run_example(const ExampleRecord& record, const PipelineParams& params, const Backends& backends) {
  Prediction pred;
  pred.id = record.id;
  pred.gold_answers = record.gold_answers;
  try {
    if (!backends.scorer || !backends.client) throw InvalidArgument("pipeline backends are not configured");
    PromptSet prompt_set = build_prompt_set(record, params.search, *backends.scorer);
    pred.k_used = prompt_set.prompts.size();

    std::vector<RawAnswer> raws;
    for (std::size_t i = 0; i < prompt_set.prompts.size(); ++i) {
      std::string prompt =
          render_generation_prompt(record.caption, prompt_set.prompts[i].candidate.surface, params.exemplars);
      Completion completion = call(backends, params, pred, "generation", i, prompt);
      try {
        double confidence = answer_confidence(completion, params.stop, params.confidence);
        pred.calls.back().confidence = confidence;
        raws.push_back(RawAnswer{i, completion.text, confidence});
      } catch (const InvalidArgument&) {
        // Empty answer: this prompt contributes no candidate.
      }
    }
    pred.candidates = aggregate(prompt_set, raws);
    pred.prompt_set = std::move(prompt_set);

    if (pred.candidates.empty()) {
      std::string prompt = render_generation_prompt(record.caption, record.question, params.exemplars);
      pred.final_answer = trim(call(backends, params, pred, "fallback", std::nullopt, prompt).text);
    } else if (params.two_stage) {
      std::vector<CandidateLine> lines;
      for (const auto& candidate : pred.candidates) lines.push_back(CandidateLine{candidate.display, candidate.p});
      std::string prompt = render_choosing_prompt(record.caption, record.question, std::move(lines),
                                                  !params.plain_heuristics, params.exemplars);
      pred.final_answer = trim(call(backends, params, pred, "choosing", std::nullopt, prompt).text);
      pred.choosing_stage = true;
    } else {
      pred.final_answer = pred.candidates.front().display;
    }
  } catch (const ExampleError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExampleError(record.id, e.what());
  }
  pred.final_normalized = normalize_answer(pred.final_answer);
  score(pred, params.metric);
  return pred;
}

std::vector<Prediction> run_dataset(const std::vector<ExampleRecord>& dataset, const PipelineParams& params,
                                    const Backends& backends, const EvalOptions& options) {
  std::vector<std::optional<Prediction>> slots(dataset.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size() && !stop; i = next++) {
      try {
        slots[i] = run_example(dataset[i], params, backends);
      } catch (const ExampleError& e) {
        if (options.fail_fast) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop = true;
          return;
        }
        Prediction failed;
        failed.id = dataset[i].id;
        failed.gold_answers = dataset[i].gold_answers;
        failed.error = e.what();
        score(failed, params.metric);
        slots[i] = std::move(failed);
      }
    }
  };
  if (!dataset.empty()) {
    std::size_t threads = std::clamp<std::size_t>(options.concurrency, 1, dataset.size());
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<Prediction> out;
  out.reserve(slots.size());
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

Report evaluate(const std::vector<ExampleRecord>& dataset, const PipelineParams& params,
                const Backends& backends, const EvalOptions& options, json config) {
  if (dataset.empty()) throw InputError("dataset is empty");
  if (!backends.client) throw InvalidArgument("pipeline backends are not configured");
  for (const auto& record : dataset) {
    if (record.gold_answers.empty()) throw InputError("example " + record.id + ": missing gold answers");
  }
  const std::size_t hits_before = backends.client->cache_hits();
  const std::size_t calls_before = backends.client->backend_calls();

  Report report;
  report.config = std::move(config);
  report.predictions = run_dataset(dataset, params, backends, options);
  summarize(report);
  report.cache_hits = backends.client->cache_hits() - hits_before;
  report.backend_calls = backends.client->backend_calls() - calls_before;
  return report;
}

Report evaluate_predictions(std::vector<Prediction> predictions, MetricMode metric, json config) {
  if (predictions.empty()) throw InputError("predictions file is empty");
  for (auto& pred : predictions) {
    if (pred.gold_answers.empty()) throw InputError("prediction " + pred.id + ": missing gold answers");
    score(pred, metric);
  }
  Report report;
  report.config = std::move(config);
  report.predictions = std::move(predictions);
  summarize(report);
  return report;
}

// ---------------------------------------------------------------------------

json to_json(const ConstituentRef& ref) {
  return json{{"path", ref.path}, {"label", ref.label}, {"span", {ref.span.start, ref.span.end}}};
}

json to_json(const ScoreBreakdown& b) {
  return json{{"f", b.f}, {"f_lm", b.f_lm}, {"f_sem", b.f_sem}, {"f_syn", b.f_syn}};
}

json to_json(const EditCandidate& candidate, std::optional<double> p) {
  json trace = json::array();
  for (const auto& step : candidate.trace) {
    trace.push_back(json{{"target", to_json(step.target)}, {"source", to_json(step.source)}});
  }
  json out{{"surface", candidate.surface}, {"score", to_json(candidate.breakdown)}, {"trace", trace}};
  if (p) out["p"] = *p;
  return out;
}

json to_json(const PromptSet& prompt_set) {
  json prompts = json::array();
  for (const auto& ranked : prompt_set.prompts) prompts.push_back(to_json(ranked.candidate, ranked.p));
  return json{{"original", prompt_set.original_surface}, {"candidates", prompts}};
}

json to_json(const AnswerCandidate& candidate) {
  json contributors = json::array();
  for (const auto& c : candidate.contributors) {
    contributors.push_back(json{{"prompt_index", c.prompt_index}, {"prompt_p", c.prompt_p}, {"llm_p", c.llm_p}});
  }
  return json{{"answer", candidate.display}, {"key", candidate.key}, {"p", candidate.p},
              {"contributors", contributors}};
}

json to_json(const Prediction& pred, bool include_trace) {
  json candidates = json::array();
  for (const auto& c : pred.candidates) candidates.push_back(to_json(c));
  json out{
      {"id", pred.id},
      {"final_answer", pred.final_answer},
      {"final_answer_normalized", pred.final_normalized},
      {"gold_answers", pred.gold_answers},
      {"candidates", candidates},
      {"m", pred.candidates.size()},
      {"k_used", pred.k_used},
      {"llm_calls", pred.llm_calls},
      {"choosing_stage", pred.choosing_stage},
      {"prompts", pred.prompt_set ? to_json(*pred.prompt_set)["candidates"] : json::array()},
  };
  out["accuracy"] = pred.accuracy ? json(*pred.accuracy) : json(nullptr);
  if (pred.error) out["error"] = *pred.error;
  if (include_trace) {
    json calls = json::array();
    for (const auto& call : pred.calls) {
      json entry{{"stage", call.stage},
                 {"prompt", call.prompt},
                 {"completion", call.completion.text},
                 {"tokens", call.completion.tokens},
                 {"token_logprobs", call.completion.token_logprobs}};
      if (call.prompt_index) entry["prompt_index"] = *call.prompt_index;
      if (call.confidence) entry["confidence"] = *call.confidence;
      calls.push_back(std::move(entry));
    }
    out["trace"] = std::move(calls);
  }
  return out;
}

Prediction prediction_from_json(const json& object) {
  Prediction pred;
  try {
    pred.id = object.at("id").get<std::string>();
    pred.final_answer = object.at("final_answer").get<std::string>();
    pred.final_normalized = normalize_answer(pred.final_answer);
    if (object.contains("gold_answers")) pred.gold_answers = object["gold_answers"].get<std::vector<std::string>>();
    if (object.contains("candidates")) {
      for (const auto& c : object["candidates"]) {
        AnswerCandidate candidate;
        candidate.display = c.at("answer").get<std::string>();
        candidate.key = c.value("key", normalize_answer(candidate.display));
        candidate.p = c.at("p").get<double>();
        for (const auto& contributor : c.value("contributors", json::array())) {
          candidate.contributors.push_back(Contribution{contributor.at("prompt_index").get<std::size_t>(),
                                                        contributor.at("prompt_p").get<double>(),
                                                        contributor.at("llm_p").get<double>()});
        }
        pred.candidates.push_back(std::move(candidate));
      }
    }
    pred.k_used = object.value("k_used", std::size_t{0});
    pred.llm_calls = object.value("llm_calls", std::size_t{0});
    pred.choosing_stage = object.value("choosing_stage", false);
    if (object.contains("error") && object["error"].is_string()) pred.error = object["error"].get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed prediction: ") + e.what());
  }
  return pred;
}

json report_to_json(const Report& report) {
  json examples = json::array();
  for (const auto& pred : report.predictions) examples.push_back(to_json(pred, false));
  return json{
      {"config", report.config},
      {"counts", {{"examples", report.predictions.size()}, {"llm_calls", report.llm_calls}, {"errors", report.errors}}},
      {"mean_accuracy", report.mean_accuracy},
      {"examples", examples},
  };
}

std::string report_to_csv(const Report& report) {
  std::string out = "id,final_answer,accuracy,m,k_used,llm_calls\n";
  for (const auto& pred : report.predictions) {
    out += csv_field(pred.id) + ',' + csv_field(pred.final_answer) + ',' + shortest(pred.accuracy.value_or(0.0)) +
           ',' + std::to_string(pred.candidates.size()) + ',' + std::to_string(pred.k_used) + ',' +
           std::to_string(pred.llm_calls) + '\n';
  }
  return out;
}

}  // namespace rqvqa
