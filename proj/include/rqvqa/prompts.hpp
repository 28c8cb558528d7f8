// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace rqvqa {

struct CandidateLine {
  std::string answer;
  double p = 0.0;
};

/// Fixed-point rendering with two decimals, rounding half away from zero on the
/// shortest decimal representation of `value` (so 0.125 -> "0.13", 0.285 -> "0.29").
std::string format_confidence(double value);

/// Instruction / Context / Question / Answer lines joined by '\n', no trailing newline.
/// Trailing periods of `caption` are dropped because the template supplies one.
/// A non-empty `exemplars` block goes between the instruction and the context.
std::string render_generation_prompt(const std::string& caption, const std::string& question,
                                     const std::string& exemplars = "");

/// Same layout plus a `Candidates:` line of "[answer p]" groups joined by ';',
/// ordered by p descending then answer ascending. With `with_confidence` false
/// the groups are "[answer]".
std::string render_choosing_prompt(const std::string& caption, const std::string& original_question,
                                   std::vector<CandidateLine> candidates, bool with_confidence = true,
                                   const std::string& exemplars = "");

}  // namespace rqvqa
