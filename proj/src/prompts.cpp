// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

constexpr const char* kGenerationInstruction = "Please answer the question according to the contexts.";
constexpr const char* kChoosingInstruction =
    "Please answer the question according to the contexts and candidates.";

std::string strip_trailing_period(std::string caption) {
  while (!caption.empty() && (caption.back() == '.' || caption.back() == ' ' || caption.back() == '\t' ||
                              caption.back() == '\n' || caption.back() == '\r')) {
    caption.pop_back();
  }
  return caption;
}

void append_exemplars(std::string& out, const std::string& exemplars) {
  std::string block = exemplars;
  while (!block.empty() && block.back() == '\n') block.pop_back();
  if (block.empty()) return;
  out += block;
  out += '\n';
}

}  // namespace

std::string format_confidence(double value) {
  if (!std::isfinite(value)) throw InvalidArgument("confidence is not finite");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, std::fabs(value), std::chars_format::fixed);
  if (ec != std::errc()) throw Error("confidence formatting failed");
  std::string digits(buf, end);
  auto dot = digits.find('.');
  std::string integral = dot == std::string::npos ? digits : digits.substr(0, dot);
  std::string fraction = dot == std::string::npos ? "" : digits.substr(dot + 1);
  fraction.resize(std::max<std::size_t>(fraction.size(), 3), '0');

  std::string kept = integral + fraction.substr(0, 2);
  if (fraction[2] >= '5') {
    int i = static_cast<int>(kept.size()) - 1;
    while (i >= 0 && kept[i] == '9') kept[i--] = '0';
    if (i >= 0) {
      ++kept[i];
    } else {
      kept.insert(kept.begin(), '1');
    }
  }
  std::string out = kept.substr(0, kept.size() - 2) + "." + kept.substr(kept.size() - 2);
  if (std::signbit(value) && out != "0.00") out.insert(out.begin(), '-');
  return out;
}

std::string render_generation_prompt(const std::string& caption, const std::string& question,
                                     const std::string& exemplars) {
  std::string context = strip_trailing_period(caption);
  if (context.empty()) throw InvalidArgument("generation prompt needs a caption");
  if (question.empty()) throw InvalidArgument("generation prompt needs a question");
  std::string out = kGenerationInstruction;
  out += '\n';
  append_exemplars(out, exemplars);
  out += "Context: " + context + ".\n";
  out += "Question: " + question + "\n";
  out += "Answer:";
  return out;
}

std::string render_choosing_prompt(const std::string& caption, const std::string& original_question,
                                   std::vector<CandidateLine> candidates, bool with_confidence,
                                   const std::string& exemplars) {
  std::string context = strip_trailing_period(caption);
  if (context.empty()) throw InvalidArgument("choosing prompt needs a caption");
  if (original_question.empty()) throw InvalidArgument("choosing prompt needs a question");
  if (candidates.empty()) throw InvalidArgument("choosing prompt needs at least one candidate");

  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.answer < b.answer;
  });

  std::string line = "Candidates: ";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i > 0) line += ';';
    line += '[' + candidates[i].answer;
    if (with_confidence) line += ' ' + format_confidence(candidates[i].p);
    line += ']';
  }

  std::string out = kChoosingInstruction;
  out += '\n';
  append_exemplars(out, exemplars);
  out += "Context: " + context + ".\n";
  out += "Question: " + original_question + "\n";
  out += line + "\n";
  out += "Answer:";
  return out;
}

}  // namespace rqvqa
