// SPDX-License-Identifier: Apache-2.0
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rqvqa/cli.hpp"
#include "rqvqa/edit_search.hpp"
#include "rqvqa/heuristics.hpp"
#include "rqvqa/llm.hpp"
#include "rqvqa/pipeline.hpp"
#include "rqvqa/prompts.hpp"
#include "rqvqa/scoring.hpp"
#include "rqvqa/tree.hpp"

namespace py = pybind11;
using namespace rqvqa;

namespace {

py::object to_python(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_python(v));
      return out;
    }
    default: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_python(v);
      return out;
    }
  }
}

MetricMode metric_from(const std::string& name) {
  if (name == "auto") return MetricMode::kAuto;
  if (name == "plain") return MetricMode::kPlain;
  if (name == "leave-one-out") return MetricMode::kLeaveOneOut;
  throw py::value_error("metric must be auto, plain or leave-one-out");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reasoning-question prompting for zero-shot VQA";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  // tree
  py::class_<ConstituentRef>(m, "ConstituentRef")
      .def_readonly("path", &ConstituentRef::path)
      .def_readonly("label", &ConstituentRef::label)
      .def_property_readonly("span", [](const ConstituentRef& r) { return py::make_tuple(r.span.start, r.span.end); })
      .def("__repr__", [](const ConstituentRef& r) {
        return "<ConstituentRef " + r.label + " [" + std::to_string(r.span.start) + "," +
               std::to_string(r.span.end) + ")>";
      });

  py::class_<ParseTree>(m, "ParseTree")
      .def_property_readonly("words", &ParseTree::words)
      .def_property_readonly("surface", [](const ParseTree& t) { return render_surface(t); })
      .def("bracketed", [](const ParseTree& t) { return to_bracketed(t); })
      .def("pos_tags", [](const ParseTree& t) {
        std::vector<std::string> tags;
        for (const auto& token : t.tokens()) tags.push_back(token.pos.value_or(""));
        return tags;
      })
      .def("subtree", [](const ParseTree& t, const ConstituentRef& r) { return to_bracketed(t.resolve(r)); })
      .def("__eq__", [](const ParseTree& a, const ParseTree& b) { return a == b; })
      .def("__repr__", [](const ParseTree& t) { return "<ParseTree " + to_bracketed(t) + ">"; });

  m.def("parse_bracketed", &parse_bracketed, py::arg("text"));
  m.def("render_surface", py::overload_cast<const std::vector<std::string>&>(&render_surface), py::arg("words"));
  m.def("default_constituent_labels", &default_constituent_labels);
  m.def(
      "enumerate_constituents",
      [](const ParseTree& tree, std::optional<std::set<std::string>> labels) {
        return enumerate_constituents(tree, labels.value_or(default_constituent_labels()));
      },
      py::arg("tree"), py::arg("labels") = py::none());
  m.def(
      "substitute",
      [](const ParseTree& tree, const ConstituentRef& target, const ParseTree& source_tree,
         const ConstituentRef& source) { return substitute(tree, target, source_tree.resolve(source)); },
      py::arg("tree"), py::arg("target"), py::arg("source_tree"), py::arg("source"));

  // scoring
  py::class_<ScoreBreakdown>(m, "ScoreBreakdown")
      .def_readonly("f_lm", &ScoreBreakdown::f_lm)
      .def_readonly("f_sem", &ScoreBreakdown::f_sem)
      .def_readonly("f_syn", &ScoreBreakdown::f_syn)
      .def_readonly("f", &ScoreBreakdown::f);

  py::class_<ScoringParams>(m, "ScoringParams")
      .def(py::init<>())
      .def_readwrite("alpha", &ScoringParams::alpha)
      .def_readwrite("beta", &ScoringParams::beta)
      .def_readwrite("ablate_lm", &ScoringParams::ablate_lm)
      .def_readwrite("ablate_sem", &ScoringParams::ablate_sem)
      .def_readwrite("ablate_syn", &ScoringParams::ablate_syn);

  py::class_<LanguageModel, std::shared_ptr<LanguageModel>>(m, "LanguageModel")
      .def("token_logprobs", [](const LanguageModel& lm, const std::vector<std::string>& tokens) {
        return lm.token_logprobs(tokens);
      });
  py::class_<UniformLanguageModel, LanguageModel, std::shared_ptr<UniformLanguageModel>>(m, "UniformLanguageModel")
      .def(py::init<std::size_t>(), py::arg("vocabulary_size"));
  py::class_<CallbackLanguageModel, LanguageModel, std::shared_ptr<CallbackLanguageModel>>(m, "CallbackLanguageModel")
      .def(py::init([](std::function<std::vector<double>(std::vector<std::string>)> fn) {
             return std::make_shared<CallbackLanguageModel>([fn](std::span<const std::string> tokens) {
               py::gil_scoped_acquire gil;
               return fn(std::vector<std::string>(tokens.begin(), tokens.end()));
             });
           }),
           py::arg("callback"));
  py::class_<NGramModel, LanguageModel, std::shared_ptr<NGramModel>>(m, "NGramModel")
      .def_property_readonly("order", &NGramModel::order)
      .def_property_readonly("vocabulary", &NGramModel::vocabulary)
      .def("count", &NGramModel::count, py::arg("context"), py::arg("token"))
      .def("log_prob", [](const NGramModel& lm, const std::vector<std::string>& history, const std::string& token) {
        return lm.log_prob(history, token);
      });

  m.def(
      "train_ngram",
      [](const std::vector<std::string>& lines, std::size_t order, double smoothing) {
        return std::make_shared<NGramModel>(train_ngram(lines, order, smoothing));
      },
      py::arg("lines"), py::arg("order") = 2, py::arg("smoothing") = 1.0);
  m.def(
      "lm_score",
      [](const std::vector<std::string>& tokens, const LanguageModel& lm) { return lm_score(tokens, lm); },
      py::arg("tokens"), py::arg("model"));

  py::class_<EmbeddingTable, std::shared_ptr<EmbeddingTable>>(m, "EmbeddingTable")
      .def(py::init<std::size_t>(), py::arg("dimension"))
      .def_property_readonly("dimension", &EmbeddingTable::dimension)
      .def("add", &EmbeddingTable::add, py::arg("token"), py::arg("vector"))
      .def("set_frequencies", &EmbeddingTable::set_frequencies, py::arg("counts"))
      .def("embed", [](const EmbeddingTable& t, const std::vector<std::string>& tokens) { return t.embed(tokens); })
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_shared<EmbeddingTable>(EmbeddingTable::load(p));
      })
      .def_static("one_hot", [](const std::vector<std::string>& vocabulary) {
        return std::make_shared<EmbeddingTable>(EmbeddingTable::one_hot(vocabulary));
      });

  m.def(
      "semantic_score",
      [](const std::vector<std::string>& candidate, const std::vector<std::string>& original,
         const EmbeddingTable& table) { return semantic_score(candidate, original, table); },
      py::arg("candidate"), py::arg("original"), py::arg("table"));
  m.def("syntactic_score", &syntactic_score, py::arg("target_label"), py::arg("source_label"));
  m.def("composite_score", &composite_score, py::arg("f_lm"), py::arg("f_sem"), py::arg("f_syn"),
        py::arg("params") = ScoringParams{});

  // edit search
  py::class_<SearchParams>(m, "SearchParams")
      .def(py::init<>())
      .def_readwrite("rho", &SearchParams::rho)
      .def_readwrite("labels", &SearchParams::labels)
      .def_readwrite("k", &SearchParams::k)
      .def_readwrite("scoring", &SearchParams::scoring);

  py::class_<EditCandidate>(m, "EditCandidate")
      .def_readonly("tree", &EditCandidate::tree)
      .def_readonly("surface", &EditCandidate::surface)
      .def_readonly("breakdown", &EditCandidate::breakdown)
      .def_property_readonly("trace_length", [](const EditCandidate& c) { return c.trace.size(); })
      .def("to_dict", [](const EditCandidate& c) { return to_python(to_json(c)); });

  py::class_<RankedPrompt>(m, "RankedPrompt")
      .def_readonly("candidate", &RankedPrompt::candidate)
      .def_readonly("p", &RankedPrompt::p);
  py::class_<PromptSet>(m, "PromptSet")
      .def_readonly("original_surface", &PromptSet::original_surface)
      .def_readonly("prompts", &PromptSet::prompts)
      .def("to_dict", [](const PromptSet& s) { return to_python(to_json(s)); });

  py::class_<CandidateScorer, std::shared_ptr<CandidateScorer>>(m, "CandidateScorer")
      .def(py::init<std::shared_ptr<const LanguageModel>, std::shared_ptr<const EmbeddingTable>, ScoringParams, bool>(),
           py::arg("lm"), py::arg("embeddings"), py::arg("params") = ScoringParams{}, py::arg("fold_case") = true)
      .def("baseline", &CandidateScorer::baseline, py::arg("original"));

  m.def("search", &search, py::arg("question"), py::arg("caption"), py::arg("params"), py::arg("scorer"));
  m.def("select_top_k", &select_top_k, py::arg("candidates"), py::arg("k"));
  m.def("normalize_prompt_probs", &normalize_prompt_probs, py::arg("original"), py::arg("selected"));

  // prompts
  m.def("format_confidence", &format_confidence, py::arg("value"));
  m.def("render_generation_prompt", &render_generation_prompt, py::arg("caption"), py::arg("question"),
        py::arg("exemplars") = "");
  m.def(
      "render_choosing_prompt",
      [](const std::string& caption, const std::string& question,
         const std::vector<std::pair<std::string, double>>& candidates, bool with_confidence,
         const std::string& exemplars) {
        std::vector<CandidateLine> lines;
        for (const auto& [answer, p] : candidates) lines.push_back(CandidateLine{answer, p});
        return render_choosing_prompt(caption, question, std::move(lines), with_confidence, exemplars);
      },
      py::arg("caption"), py::arg("original_question"), py::arg("candidates"), py::arg("with_confidence") = true,
      py::arg("exemplars") = "");

  // heuristics
  m.def("normalize_answer", &normalize_answer, py::arg("text"));
  m.def(
      "aggregate",
      [](const PromptSet& prompt_set, const std::vector<std::tuple<std::size_t, std::string, double>>& raws) {
        std::vector<RawAnswer> answers;
        for (const auto& [index, text, confidence] : raws) answers.push_back(RawAnswer{index, text, confidence});
        py::list out;
        for (const auto& c : aggregate(prompt_set, answers)) out.append(to_python(to_json(c)));
        return out;
      },
      py::arg("prompt_set"), py::arg("raws"));

  // llm
  m.def(
      "answer_confidence",
      [](const std::vector<std::string>& tokens, const std::vector<double>& logprobs, bool length_normalized) {
        return answer_confidence(Completion{"", tokens, logprobs}, {"\n"},
                                 length_normalized ? ConfidenceMode::kLengthNormalized : ConfidenceMode::kJoint);
      },
      py::arg("tokens"), py::arg("token_logprobs"), py::arg("length_normalized") = false);
  m.def("sha256_hex", [](const std::string& s) { return sha256_hex(s); }, py::arg("data"));

  // pipeline
  m.def(
      "vqa_accuracy",
      [](const std::string& predicted, const std::vector<std::string>& gold, const std::string& metric) {
        return vqa_accuracy(predicted, gold, metric_from(metric));
      },
      py::arg("predicted"), py::arg("gold"), py::arg("metric") = "auto");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"rqvqa"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"),
      "Runs the rqvqa command line in-process; returns (exit_code, stdout, stderr).");
}
