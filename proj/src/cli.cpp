// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rqvqa/error.hpp"
#include "rqvqa/scoring.hpp"

namespace rqvqa::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kAblations = {"lm", "sem", "syn", "two-stage", "plain-heuristics"};

/// Config files may be JSON (a flat object keyed by long option names) or TOML.
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream buffer;
    buffer << input.rdbuf();
    std::string text = buffer.str();
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream toml(text);
      return CLI::ConfigTOML::from_config(toml);
    }
    json object;
    try {
      object = json::parse(text);
    } catch (const json::parse_error& e) {
      throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : object.items()) {
      CLI::ConfigItem item;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("unsupported config value " + v.dump());
  }
};

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split(const std::string& s, char delimiter) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, delimiter)) parts.push_back(part);
  return parts;
}

std::string joined_words(const ParseTree& tree) {
  std::string line;
  for (const auto& w : tree.words()) {
    if (!line.empty()) line += ' ';
    line += lowercase(w);
  }
  return line;
}

MetricMode parse_metric(const std::string& metric) {
  if (metric == "auto") return MetricMode::kAuto;
  if (metric == "plain") return MetricMode::kPlain;
  if (metric == "leave-one-out") return MetricMode::kLeaveOneOut;
  throw InputError("unknown --metric " + metric);
}

std::shared_ptr<const LanguageModel> make_language_model(const Config& cfg,
                                                         const std::vector<ExampleRecord>& records) {
  if (cfg.lm.empty()) {
    std::vector<std::string> corpus;
    for (const auto& r : records) {
      corpus.push_back(joined_words(r.question_tree));
      corpus.push_back(joined_words(r.caption_tree));
    }
    return std::make_shared<NGramModel>(train_ngram(corpus, 2, 1.0));
  }
  auto parts = split(cfg.lm, ':');
  try {
    if (parts.size() == 2 && parts[0] == "uniform") {
      return std::make_shared<UniformLanguageModel>(std::stoul(parts[1]));
    }
    if (parts.size() >= 2 && parts.size() <= 4 && parts[0] == "ngram") {
      std::size_t order = parts.size() >= 3 ? std::stoul(parts[2]) : 2;
      double smoothing = parts.size() == 4 ? std::stod(parts[3]) : 1.0;
      std::ifstream in(parts[1]);
      if (!in) throw InputError("cannot open LM corpus " + parts[1]);
      std::vector<std::string> lines;
      for (std::string line; std::getline(in, line);) lines.push_back(lowercase(line));
      return std::make_shared<NGramModel>(train_ngram(lines, order, smoothing));
    }
  } catch (const std::logic_error&) {
    // stoul/stod failures fall through to the error below
  }
  throw InputError("bad --lm spec '" + cfg.lm + "' (want ngram:<corpus>[:order[:k]] or uniform:<size>)");
}

std::shared_ptr<const EmbeddingTable> make_embeddings(const Config& cfg,
                                                      const std::vector<ExampleRecord>& records) {
  std::shared_ptr<EmbeddingTable> table;
  if (cfg.embeddings.empty()) {
    std::vector<std::string> vocabulary;
    for (const auto& r : records) {
      for (const auto* tree : {&r.question_tree, &r.caption_tree}) {
        for (const auto& w : tree->words()) vocabulary.push_back(lowercase(w));
      }
    }
    table = std::make_shared<EmbeddingTable>(EmbeddingTable::one_hot(vocabulary));
  } else {
    table = std::make_shared<EmbeddingTable>(EmbeddingTable::load(cfg.embeddings));
  }
  if (!cfg.frequencies.empty()) table->set_frequencies(load_frequencies(cfg.frequencies));
  return table;
}

std::shared_ptr<CompletionClient> make_client(const Config& cfg) {
  std::shared_ptr<Transport> transport;
  if (cfg.backend == "mock") {
    if (cfg.mock_script.empty()) throw InputError("--mock-script is required with --backend mock");
    transport = MockBackend::from_file(cfg.mock_script);
  } else if (cfg.backend == "http") {
    if (cfg.endpoint.empty()) throw InputError("--endpoint is required with --backend http");
    std::optional<std::string> key;
    if (const char* env = std::getenv("RQVQA_API_KEY"); env != nullptr && *env != '\0') key = env;
    if (!key && cfg.endpoint.rfind("https://", 0) == 0) {
      throw InputError("RQVQA_API_KEY must be set for endpoint " + cfg.endpoint);
    }
    transport = std::make_shared<HttpTransport>(cfg.endpoint, key);
  } else {
    throw InputError("unknown --backend " + cfg.backend);
  }
  std::shared_ptr<const ResponseCache> cache;
  if (!cfg.cache_dir.empty()) cache = std::make_shared<ResponseCache>(cfg.cache_dir);
  return std::make_shared<CompletionClient>(transport, cache, RetryPolicy{}, cfg.concurrency);
}

PipelineParams make_params(const Config& cfg) {
  PipelineParams params;
  params.search.rho = cfg.rho;
  params.search.k = cfg.k;
  params.search.labels = std::set<std::string>(cfg.labels.begin(), cfg.labels.end());
  params.search.scoring.alpha = cfg.alpha;
  params.search.scoring.beta = cfg.beta;
  params.search.scoring.ablate_lm = cfg.ablated("lm");
  params.search.scoring.ablate_sem = cfg.ablated("sem");
  params.search.scoring.ablate_syn = cfg.ablated("syn");
  params.two_stage = !cfg.ablated("two-stage");
  params.plain_heuristics = cfg.ablated("plain-heuristics");
  params.metric = parse_metric(cfg.metric);
  params.model = cfg.model;
  params.max_tokens = cfg.max_tokens;
  return params;
}

std::shared_ptr<const CandidateScorer> make_scorer(const Config& cfg, const PipelineParams& params,
                                                   const std::vector<ExampleRecord>& records) {
  return std::make_shared<CandidateScorer>(make_language_model(cfg, records), make_embeddings(cfg, records),
                                           params.search.scoring);
}

void validate(const Config& cfg) {
  if (cfg.input.empty()) throw InputError("--input is required");
  if (cfg.labels.empty()) throw InputError("--labels must name at least one tag");
  if (cfg.alpha < 0 || cfg.beta < 0) throw InputError("--alpha and --beta must be >= 0");
  if (cfg.rho < 0) throw InputError("--rho must be >= 0");
  for (const auto& a : cfg.ablate) {
    if (kAblations.count(a) == 0) throw InputError("unknown --ablate value " + a);
  }
  parse_metric(cfg.metric);
}

/// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write " + path);
  file << text;
}

int cmd_edit(const Config& cfg, std::ostream& out) {
  auto records = load_dataset(cfg.input);
  auto params = make_params(cfg);
  auto scorer = make_scorer(cfg, params, records);
  std::string text;
  for (const auto& record : records) {
    json line = to_json(build_prompt_set(record, params.search, *scorer));
    line["id"] = record.id;
    text += line.dump() + "\n";
  }
  emit(cfg.output, text, out);
  return 0;
}

int cmd_answer(const Config& cfg, std::ostream& out, std::ostream& err) {
  auto client = make_client(cfg);
  auto records = load_dataset(cfg.input);
  auto params = make_params(cfg);
  Backends backends{make_scorer(cfg, params, records), client};
  auto predictions = run_dataset(records, params, backends, EvalOptions{cfg.concurrency, cfg.fail_fast});
  std::string text;
  for (const auto& pred : predictions) text += to_json(pred, cfg.trace).dump() + "\n";
  emit(cfg.output, text, out);
  err << "examples=" << records.size() << " backend_calls=" << backends.client->backend_calls()
      << " cache_hits=" << backends.client->cache_hits() << "\n";
  return 0;
}

bool looks_like_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      return json::parse(line).contains("final_answer");
    } catch (const json::parse_error&) {
      return false;
    }
  }
  return false;
}

int cmd_eval(const Config& cfg, std::ostream& out, std::ostream& err) {
  auto params = make_params(cfg);
  Report report;
  if (looks_like_predictions(cfg.input)) {
    std::ifstream in(cfg.input);
    std::vector<Prediction> predictions;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        predictions.push_back(prediction_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw InputError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    report = evaluate_predictions(std::move(predictions), params.metric, cfg.to_json());
  } else {
    auto client = make_client(cfg);
    auto records = load_dataset(cfg.input);
    if (records.empty()) throw InputError("dataset is empty");
    Backends backends{make_scorer(cfg, params, records), client};
    report = evaluate(records, params, backends, EvalOptions{cfg.concurrency, cfg.fail_fast}, cfg.to_json());
    err << "examples=" << records.size() << " backend_calls=" << report.backend_calls
        << " cache_hits=" << report.cache_hits << "\n";
  }
  if (!cfg.output.empty()) {
    emit(cfg.output, report_to_json(report).dump(2) + "\n", out);
    std::filesystem::path csv = cfg.output;
    csv.replace_extension(".csv");
    emit(csv.string(), report_to_csv(report), out);
  }
  char line[64];
  std::snprintf(line, sizeof line, "mean_accuracy=%.4f\n", report.mean_accuracy);
  out << line;
  return 0;
}

}  // namespace

bool Config::ablated(const std::string& what) const {
  return std::find(ablate.begin(), ablate.end(), what) != ablate.end();
}

json Config::to_json() const {
  std::vector<std::string> sorted_labels = labels;
  std::sort(sorted_labels.begin(), sorted_labels.end());
  sorted_labels.erase(std::unique(sorted_labels.begin(), sorted_labels.end()), sorted_labels.end());
  std::vector<std::string> sorted_ablate = ablate;
  std::sort(sorted_ablate.begin(), sorted_ablate.end());
  return json{
      {"alpha", alpha},
      {"beta", beta},
      {"rho", rho},
      {"k", k},
      {"labels", sorted_labels},
      {"lm", lm.empty() ? "ngram:<input>:2:1" : lm},
      {"embeddings", embeddings.empty() ? "one-hot:<input>" : embeddings},
      {"frequencies", frequencies},
      {"backend", backend},
      {"endpoint", endpoint},
      {"model", model},
      {"max_tokens", max_tokens},
      {"ablate", sorted_ablate},
      {"metric", metric},
  };
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reasoning-question prompting for zero-shot VQA", "rqvqa"};
  app.fallthrough();
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonOrTomlConfig>());
  app.set_config("--config", "", "TOML or JSON config file (flags override it)");

  Config cfg;
  app.add_option("--input", cfg.input, "Dataset JSONL (or predictions JSONL for eval)");
  app.add_option("--output", cfg.output, "Output file (stdout when omitted)");
  app.add_option("--alpha", cfg.alpha, "LM score exponent")->capture_default_str();
  app.add_option("--beta", cfg.beta, "Semantic score exponent")->capture_default_str();
  app.add_option("--rho", cfg.rho, "Acceptance slack below f(Q)")->capture_default_str();
  app.add_option("--k", cfg.k, "Maximum number of edited prompts")->capture_default_str();
  app.add_option("--labels", cfg.labels, "Constituent tags eligible for substitution")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--lm", cfg.lm, "ngram:<corpus>[:order[:k]] | uniform:<size>");
  app.add_option("--embeddings", cfg.embeddings, "Word vector file");
  app.add_option("--frequencies", cfg.frequencies, "Token frequency file (inverse-frequency weights)");
  app.add_option("--backend", cfg.backend, "mock | http")->capture_default_str();
  app.add_option("--endpoint", cfg.endpoint, "Completions endpoint URL");
  app.add_option("--model", cfg.model, "Model name sent to the backend")->capture_default_str();
  app.add_option("--mock-script", cfg.mock_script, "Mock backend script (JSON)");
  app.add_option("--cache-dir", cfg.cache_dir, "Response cache directory");
  app.add_option("--concurrency", cfg.concurrency, "Examples in flight")->capture_default_str();
  app.add_option("--max-tokens", cfg.max_tokens, "Completion length limit")->capture_default_str();
  app.add_flag("--trace", cfg.trace, "Include prompts and completions in predictions");
  app.add_option("--ablate", cfg.ablate, "lm, sem, syn, two-stage, plain-heuristics")->delimiter(',');
  app.add_option("--metric", cfg.metric, "auto | plain | leave-one-out")->capture_default_str();
  app.add_flag("--fail-fast", cfg.fail_fast, "Abort on the first failing example");

  auto* edit = app.add_subcommand("edit", "Edit search only: write ranked prompt sets as JSONL");
  auto* answer = app.add_subcommand("answer", "Two-stage answering: write predictions as JSONL");
  auto* eval = app.add_subcommand("eval", "Score predictions or a dataset: write report JSON and CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    validate(cfg);
    if (edit->parsed()) return cmd_edit(cfg, out);
    if (answer->parsed()) return cmd_answer(cfg, out, err);
    if (eval->parsed()) return cmd_eval(cfg, out, err);
  } catch (const ExampleError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rqvqa::cli
