// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rqvqa/scoring.hpp"
#include "rqvqa/tree.hpp"

namespace rqvqa {

/// One substitution: `target` located in the tree it was applied to, `source` in the caption.
struct EditStep {
  ConstituentRef target;
  ConstituentRef source;
};

/// An edited question and how it was reached.
struct EditCandidate {
  ParseTree tree;
  std::string surface;
  ScoreBreakdown breakdown;
  std::vector<EditStep> trace;
};

struct SearchParams {
  double rho = 0.5;
  std::set<std::string> labels = default_constituent_labels();
  std::size_t k = 5;
  ScoringParams scoring;
};

struct RankedPrompt {
  EditCandidate candidate;
  double p = 0.0;
};

/// The original question plus the selected edits with normalized probabilities.
struct PromptSet {
  std::string original_surface;
  ParseTree original_tree;
  std::vector<RankedPrompt> prompts;
};

/// Scores edited questions against the original with the LM and embedding backends.
/// Tokens are lowercased before they reach either backend when `fold_case` is set.
class CandidateScorer {
 public:
  CandidateScorer(std::shared_ptr<const LanguageModel> lm, std::shared_ptr<const EmbeddingTable> embeddings,
                  ScoringParams params, bool fold_case = true);

  const ScoringParams& params() const noexcept { return params_; }

  ScoreBreakdown score(const ParseTree& candidate, const ParseTree& original, int f_syn) const;
  /// f(Q) for the unedited question. The syntactic factor is fixed at 1.
  ScoreBreakdown baseline(const ParseTree& original) const;

 private:
  std::vector<std::string> prepare(const ParseTree& tree) const;

  std::shared_ptr<const LanguageModel> lm_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  ScoringParams params_;
  bool fold_case_;
};

/// Iterative substitution search. Each caption constituent (in pre-order) is
/// tried against every eligible constituent of every question in the current
/// batch; edits scoring above f(Q) - rho form the next batch. Returns every
/// saved edit, deduplicated by surface (highest score kept), excluding edits
/// whose surface equals the original question. Order is first-discovery order.
std::vector<EditCandidate> search(const ParseTree& question, const ParseTree& caption,
                                  const SearchParams& params, const CandidateScorer& scorer);

/// Highest f first; ties by shorter trace, then surface. At most k entries.
std::vector<EditCandidate> select_top_k(std::vector<EditCandidate> candidates, std::size_t k);

/// p_i = f_i / sum f. Throws InvalidArgument when any f <= 0.
PromptSet normalize_prompt_probs(const ParseTree& original, std::vector<EditCandidate> selected);

}  // namespace rqvqa
