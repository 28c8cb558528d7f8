// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rqvqa/edit_search.hpp"

namespace rqvqa {

/// One generation-stage answer and its LLM probability.
struct RawAnswer {
  std::size_t prompt_index = 0;
  std::string text;
  double confidence = 0.0;
};

struct Contribution {
  std::size_t prompt_index = 0;
  double prompt_p = 0.0;
  double llm_p = 0.0;
};

struct AnswerCandidate {
  std::string key;
  std::string display;
  double p = 0.0;
  std::vector<Contribution> contributors;
};

/// VQA-style answer canonicalization: lowercase, punctuation [.,?!;:'"()] removed,
/// articles a/an/the dropped, number words zero..ten mapped to digits, whitespace collapsed.
std::string normalize_answer(const std::string& text);

/// Groups answers by normalized key and sums P(prompt) * P_LLM per group.
/// Ordered by aggregate descending, ties by key. The display form is the
/// trimmed raw text from the lowest prompt index in the group.
/// Throws InvalidArgument for an unknown prompt index or a confidence outside (0, 1].
std::vector<AnswerCandidate> aggregate(const PromptSet& prompt_set, const std::vector<RawAnswer>& raws);

}  // namespace rqvqa
