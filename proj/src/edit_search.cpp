// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/edit_search.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <utility>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

/// Insertion-ordered set of candidates keyed by a string; a later insert with a
/// strictly better score replaces the stored instance in place.
class CandidatePool {
 public:
  template <typename Better>
  void insert(std::string key, EditCandidate candidate, Better better) {
    auto [it, inserted] = index_.emplace(std::move(key), items_.size());
    if (inserted) {
      items_.push_back(std::move(candidate));
    } else if (better(candidate, items_[it->second])) {
      items_[it->second] = std::move(candidate);
    }
  }

  std::vector<EditCandidate>& items() noexcept { return items_; }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<EditCandidate> items_;
};

bool higher_score(const EditCandidate& a, const EditCandidate& b) {
  return a.breakdown.f > b.breakdown.f;
}

bool preferred(const EditCandidate& a, const EditCandidate& b) {
  if (a.breakdown.f != b.breakdown.f) return a.breakdown.f > b.breakdown.f;
  return a.trace.size() < b.trace.size();
}

}  // namespace

CandidateScorer::CandidateScorer(std::shared_ptr<const LanguageModel> lm,
                                 std::shared_ptr<const EmbeddingTable> embeddings, ScoringParams params,
                                 bool fold_case)
    : lm_(std::move(lm)), embeddings_(std::move(embeddings)), params_(params), fold_case_(fold_case) {
  if (!lm_) throw InvalidArgument("CandidateScorer needs a language model");
  if (!embeddings_) throw InvalidArgument("CandidateScorer needs an embedding table");
}

std::vector<std::string> CandidateScorer::prepare(const ParseTree& tree) const {
  auto words = tree.words();
  if (fold_case_) {
    for (auto& w : words) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
  }
  return words;
}

ScoreBreakdown CandidateScorer::score(const ParseTree& candidate, const ParseTree& original,
                                      int f_syn) const {
  auto cand_words = prepare(candidate);
  auto orig_words = prepare(original);
  double f_lm = lm_score(cand_words, *lm_);
  double f_sem = semantic_score(cand_words, orig_words, *embeddings_);
  return composite_score(f_lm, f_sem, f_syn, params_);
}

ScoreBreakdown CandidateScorer::baseline(const ParseTree& original) const {
  return score(original, original, 1);
}

std::vector<EditCandidate> search(const ParseTree& question, const ParseTree& caption,
                                  const SearchParams& params, const CandidateScorer& scorer) {
  if (!(params.rho >= 0.0)) throw InvalidArgument("rho must be >= 0");
  const double threshold = scorer.baseline(question).f - params.rho;
  const auto sources = enumerate_constituents(caption, params.labels);

  std::vector<EditCandidate> batch;
  batch.push_back(EditCandidate{question, render_surface(question), scorer.baseline(question), {}});
  CandidatePool saved;

  for (const auto& source_ref : sources) {
    const TreeNode& source = caption.resolve(source_ref);
    CandidatePool best;
    for (const auto& parent : batch) {
      for (const auto& target_ref : enumerate_constituents(parent.tree, params.labels)) {
        ParseTree edited = substitute(parent.tree, target_ref, source);
        ScoreBreakdown breakdown =
            scorer.score(edited, question, syntactic_score(target_ref.label, source_ref.label));
        if (!(breakdown.f > threshold)) continue;
        auto trace = parent.trace;
        trace.push_back(EditStep{target_ref, source_ref});
        std::string key = to_bracketed(edited);
        std::string surface = render_surface(edited);
        best.insert(std::move(key),
                    EditCandidate{std::move(edited), std::move(surface), breakdown, std::move(trace)},
                    higher_score);
      }
    }
    batch = std::move(best.items());
    for (const auto& candidate : batch) saved.insert(to_bracketed(candidate.tree), candidate, higher_score);
  }

  const std::string original_surface = render_surface(question);
  CandidatePool by_surface;
  for (auto& candidate : saved.items()) {
    if (candidate.surface == original_surface) continue;
    std::string key = candidate.surface;
    by_surface.insert(std::move(key), std::move(candidate), preferred);
  }
  return std::move(by_surface.items());
}

std::vector<EditCandidate> select_top_k(std::vector<EditCandidate> candidates, std::size_t k) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.breakdown.f != b.breakdown.f) return a.breakdown.f > b.breakdown.f;
    if (a.trace.size() != b.trace.size()) return a.trace.size() < b.trace.size();
    return a.surface < b.surface;
  });
  if (candidates.size() > k) candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());
  return candidates;
}

PromptSet normalize_prompt_probs(const ParseTree& original, std::vector<EditCandidate> selected) {
  double total = 0.0;
  for (const auto& candidate : selected) {
    if (!(candidate.breakdown.f > 0.0)) {
      throw InvalidArgument("cannot normalize a prompt with score <= 0: '" + candidate.surface + "'");
    }
    total += candidate.breakdown.f;
  }
  PromptSet set{render_surface(original), original, {}};
  set.prompts.reserve(selected.size());
  for (auto& candidate : selected) {
    double p = candidate.breakdown.f / total;
    set.prompts.push_back(RankedPrompt{std::move(candidate), p});
  }
  return set;
}

}  // namespace rqvqa
