// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/heuristics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <sstream>
#include <string_view>
#include <utility>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string_view number_word(std::string_view word) {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 11> kNumbers = {{
      {"zero", "0"}, {"one", "1"}, {"two", "2"}, {"three", "3"}, {"four", "4"}, {"five", "5"},
      {"six", "6"},  {"seven", "7"}, {"eight", "8"}, {"nine", "9"}, {"ten", "10"},
  }};
  for (const auto& [name, digits] : kNumbers) {
    if (name == word) return digits;
  }
  return word;
}

}  // namespace

std::string normalize_answer(const std::string& text) {
  static constexpr std::string_view kPunctuation = ".,?!;:'\"()";
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (kPunctuation.find(c) != std::string_view::npos) continue;
    cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::istringstream words(cleaned);
  std::string out;
  for (std::string word; words >> word;) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out += ' ';
    out += number_word(word);
  }
  return out;
}

std::vector<AnswerCandidate> aggregate(const PromptSet& prompt_set, const std::vector<RawAnswer>& raws) {
  std::vector<const RawAnswer*> ordered;
  for (const auto& raw : raws) {
    if (raw.prompt_index >= prompt_set.prompts.size()) {
      throw InvalidArgument("answer refers to unknown prompt index " + std::to_string(raw.prompt_index));
    }
    if (!(raw.confidence > 0.0 && raw.confidence <= 1.0)) {
      throw InvalidArgument("answer confidence must lie in (0, 1]");
    }
    ordered.push_back(&raw);
  }
  // Prompt order fixes both the display form and the summation order.
  std::stable_sort(ordered.begin(), ordered.end(), [](const RawAnswer* a, const RawAnswer* b) {
    if (a->prompt_index != b->prompt_index) return a->prompt_index < b->prompt_index;
    if (a->text != b->text) return a->text < b->text;
    return a->confidence < b->confidence;
  });

  std::map<std::string, AnswerCandidate> groups;
  for (const RawAnswer* raw : ordered) {
    std::string key = normalize_answer(raw->text);
    auto [it, inserted] = groups.try_emplace(key);
    AnswerCandidate& candidate = it->second;
    if (inserted) {
      candidate.key = key;
      candidate.display = trim(raw->text);
    }
    double prompt_p = prompt_set.prompts[raw->prompt_index].p;
    candidate.p += prompt_p * raw->confidence;
    candidate.contributors.push_back(Contribution{raw->prompt_index, prompt_p, raw->confidence});
  }

  std::vector<AnswerCandidate> out;
  out.reserve(groups.size());
  for (auto& [key, candidate] : groups) out.push_back(std::move(candidate));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.key < b.key;
  });
  return out;
}

}  // namespace rqvqa
