// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rqvqa {

/// Per-factor scores of one candidate and their weighted product.
struct ScoreBreakdown {
  double f_lm = 1.0;
  double f_sem = 1.0;
  int f_syn = 1;
  double f = 1.0;
};

struct ScoringParams {
  double alpha = 0.3;
  double beta = 1.0;
  bool ablate_lm = false;
  bool ablate_sem = false;
  bool ablate_syn = false;
};

/// A language model that yields ln P(w_i | w_1..w_{i-1}) for every token of a sentence.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::vector<double> token_logprobs(std::span<const std::string> tokens) const = 0;
};

/// Uniform distribution over a fixed-size vocabulary; every token has probability 1/size.
class UniformLanguageModel final : public LanguageModel {
 public:
  explicit UniformLanguageModel(std::size_t vocabulary_size);
  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override;

 private:
  double logprob_;
};

/// Adapter for an externally computed scorer (e.g. a neural LM behind a service or
/// a Python callable). The callback must return one finite log-prob <= 0 per token.
class CallbackLanguageModel final : public LanguageModel {
 public:
  using Callback = std::function<std::vector<double>(std::span<const std::string>)>;
  explicit CallbackLanguageModel(Callback callback) : callback_(std::move(callback)) {}
  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override;

 private:
  Callback callback_;
};

/// Add-k smoothed n-gram model. Histories are left-padded with `kBos`; tokens
/// outside the vocabulary are scored (and conditioned on) as `kUnk`.
///   P(w | h) = (count(h, w) + k) / (count(h) + k * |V|),  V = observed tokens + kUnk
class NGramModel final : public LanguageModel {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kUnk = "<unk>";

  NGramModel(std::size_t order, double smoothing);

  std::size_t order() const noexcept { return order_; }
  double smoothing() const noexcept { return smoothing_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }

  /// Number of times `token` followed `context` (context has exactly order-1 entries).
  std::size_t count(const std::vector<std::string>& context, const std::string& token) const;
  std::size_t context_count(const std::vector<std::string>& context) const;

  /// ln P(token | history). Only the last order-1 history entries are consulted;
  /// shorter histories are padded with kBos.
  double log_prob(std::span<const std::string> history, const std::string& token) const;

  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override;

 private:
  friend NGramModel train_ngram(const std::vector<std::string>&, std::size_t, double);

  std::vector<std::string> context_of(std::span<const std::string> history) const;
  const std::string& map_token(const std::string& token) const;

  std::size_t order_;
  double smoothing_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> vocabulary_index_;
  std::map<std::vector<std::string>, std::map<std::string, std::size_t>> counts_;
  std::map<std::vector<std::string>, std::size_t> context_totals_;
};

/// Counts n-grams over whitespace-tokenized lines. Blank lines are skipped.
/// Throws InvalidArgument when no non-empty line exists, order == 0 or smoothing <= 0.
NGramModel train_ngram(const std::vector<std::string>& lines, std::size_t order, double smoothing);
/// Reads one sentence per line from `path` and trains on it.
NGramModel train_ngram_file(const std::filesystem::path& path, std::size_t order, double smoothing);

/// exp of the mean per-token log-probability: a length-normalized likelihood in (0, 1].
double lm_score(std::span<const std::string> tokens, const LanguageModel& model);

enum class TokenWeighting { kUniform, kInverseFrequency };

/// Word vectors with a sentence-embedding rule. Unknown tokens map to the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  TokenWeighting weighting() const noexcept { return weighting_; }

  void add(const std::string& token, std::vector<double> vector);
  /// Switches to inverse-frequency weighting, weight(t) = 1 / (1 + count(t)).
  /// Tokens absent from `counts` get count 0.
  void set_frequencies(std::unordered_map<std::string, double> counts);

  /// Vector for `token`, or nullptr for unknown tokens.
  const std::vector<double>* find(const std::string& token) const;
  double weight(const std::string& token) const;

  /// Weighted average of token vectors.
  std::vector<double> embed(std::span<const std::string> tokens) const;

  /// `token v1 v2 ... vd` per line; the dimension comes from the first line.
  static EmbeddingTable load(const std::filesystem::path& path);
  /// Orthogonal unit vector per distinct token, i.e. bag-of-words cosine.
  static EmbeddingTable one_hot(const std::vector<std::string>& vocabulary);

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  TokenWeighting weighting_ = TokenWeighting::kUniform;
  std::unordered_map<std::string, double> frequencies_;
};

/// `token count` per line.
std::unordered_map<std::string, double> load_frequencies(const std::filesystem::path& path);

/// max(0, cosine) between the sentence embeddings; 0 when either embedding is zero.
double semantic_score(std::span<const std::string> candidate, std::span<const std::string> original,
                      const EmbeddingTable& table);

/// 1 iff the tags are byte-equal.
int syntactic_score(const std::string& target_label, const std::string& source_label);

/// f = f_lm^alpha * f_sem^beta * f_syn, with ablated factors forced to 1.
ScoreBreakdown composite_score(double f_lm, double f_sem, int f_syn, const ScoringParams& params);

}  // namespace rqvqa
