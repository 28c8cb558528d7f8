// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

std::vector<std::string> split_whitespace(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace

UniformLanguageModel::UniformLanguageModel(std::size_t vocabulary_size) {
  if (vocabulary_size == 0) throw InvalidArgument("uniform LM needs a non-empty vocabulary");
  logprob_ = -std::log(static_cast<double>(vocabulary_size));
}

std::vector<double> UniformLanguageModel::token_logprobs(std::span<const std::string> tokens) const {
  return std::vector<double>(tokens.size(), logprob_);
}

std::vector<double> CallbackLanguageModel::token_logprobs(std::span<const std::string> tokens) const {
  auto logprobs = callback_(tokens);
  if (logprobs.size() != tokens.size()) {
    throw InvalidArgument("LM callback returned " + std::to_string(logprobs.size()) +
                          " log-probs for " + std::to_string(tokens.size()) + " tokens");
  }
  return logprobs;
}

NGramModel::NGramModel(std::size_t order, double smoothing) : order_(order), smoothing_(smoothing) {
  if (order == 0) throw InvalidArgument("n-gram order must be >= 1");
  if (!(smoothing > 0.0)) throw InvalidArgument("n-gram smoothing constant must be > 0");
}

const std::string& NGramModel::map_token(const std::string& token) const {
  static const std::string kUnkString = kUnk;
  static const std::string kBosString = kBos;
  if (token == kBosString) return kBosString;
  return vocabulary_index_.count(token) > 0 ? token : kUnkString;
}

std::vector<std::string> NGramModel::context_of(std::span<const std::string> history) const {
  std::size_t width = order_ - 1;
  std::vector<std::string> context(width, kBos);
  std::size_t take = std::min(width, history.size());
  for (std::size_t i = 0; i < take; ++i) {
    context[width - take + i] = map_token(history[history.size() - take + i]);
  }
  return context;
}

std::size_t NGramModel::count(const std::vector<std::string>& context, const std::string& token) const {
  auto row = counts_.find(context);
  if (row == counts_.end()) return 0;
  auto cell = row->second.find(token);
  return cell == row->second.end() ? 0 : cell->second;
}

std::size_t NGramModel::context_count(const std::vector<std::string>& context) const {
  auto it = context_totals_.find(context);
  return it == context_totals_.end() ? 0 : it->second;
}

double NGramModel::log_prob(std::span<const std::string> history, const std::string& token) const {
  auto context = context_of(history);
  double numerator = static_cast<double>(count(context, map_token(token))) + smoothing_;
  double denominator = static_cast<double>(context_count(context)) +
                       smoothing_ * static_cast<double>(vocabulary_.size());
  return std::log(numerator / denominator);
}

std::vector<double> NGramModel::token_logprobs(std::span<const std::string> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back(log_prob(tokens.first(i), tokens[i]));
  return out;
}

NGramModel train_ngram(const std::vector<std::string>& lines, std::size_t order, double smoothing) {
  NGramModel model(order, smoothing);
  std::vector<std::vector<std::string>> sentences;
  std::set<std::string> observed;
  for (const auto& line : lines) {
    auto words = split_whitespace(line);
    if (words.empty()) continue;
    observed.insert(words.begin(), words.end());
    sentences.push_back(std::move(words));
  }
  if (sentences.empty()) throw InvalidArgument("n-gram corpus has no non-empty line");

  observed.erase(NGramModel::kUnk);
  observed.erase(NGramModel::kBos);
  model.vocabulary_.assign(observed.begin(), observed.end());
  model.vocabulary_.push_back(NGramModel::kUnk);
  for (std::size_t i = 0; i < model.vocabulary_.size(); ++i) {
    model.vocabulary_index_.emplace(model.vocabulary_[i], i);
  }

  for (const auto& words : sentences) {
    std::span<const std::string> view(words);
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto context = model.context_of(view.first(i));
      ++model.counts_[context][model.map_token(words[i])];
      ++model.context_totals_[context];
    }
  }
  return model;
}

NGramModel train_ngram_file(const std::filesystem::path& path, std::size_t order, double smoothing) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open LM corpus " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return train_ngram(lines, order, smoothing);
}

double lm_score(std::span<const std::string> tokens, const LanguageModel& model) {
  if (tokens.empty()) throw InvalidArgument("lm_score: empty token sequence");
  auto logprobs = model.token_logprobs(tokens);
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) throw InvalidArgument("LM returned an invalid log-prob");
    sum += lp;
  }
  return std::exp(sum / static_cast<double>(tokens.size()));
}

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be >= 1");
}

void EmbeddingTable::add(const std::string& token, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw InvalidArgument("embedding for '" + token + "' has dimension " +
                          std::to_string(vector.size()) + ", expected " + std::to_string(dimension_));
  }
  vectors_[token] = std::move(vector);
}

void EmbeddingTable::set_frequencies(std::unordered_map<std::string, double> counts) {
  frequencies_ = std::move(counts);
  weighting_ = TokenWeighting::kInverseFrequency;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

double EmbeddingTable::weight(const std::string& token) const {
  if (weighting_ == TokenWeighting::kUniform) return 1.0;
  auto it = frequencies_.find(token);
  double count = it == frequencies_.end() ? 0.0 : it->second;
  return 1.0 / (1.0 + count);
}

std::vector<double> EmbeddingTable::embed(std::span<const std::string> tokens) const {
  std::vector<double> sum(dimension_, 0.0);
  double total_weight = 0.0;
  for (const auto& token : tokens) {
    double w = weight(token);
    total_weight += w;
    if (const auto* vec = find(token)) {
      for (std::size_t d = 0; d < dimension_; ++d) sum[d] += w * (*vec)[d];
    }
  }
  if (total_weight > 0.0) {
    for (double& x : sum) x /= total_weight;
  }
  return sum;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open word vectors " + path.string());
  std::optional<EmbeddingTable> table;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": no vector components");
    }
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
      } catch (const std::exception&) {
        throw InputError(path.string() + " line " + std::to_string(line_no) + ": bad number '" +
                         fields[i] + "'");
      }
    }
    if (!table) table.emplace(vec.size());
    if (vec.size() != table->dimension()) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": dimension " +
                       std::to_string(vec.size()) + ", expected " + std::to_string(table->dimension()));
    }
    table->add(fields[0], std::move(vec));
  }
  if (!table) throw InputError("word vector file " + path.string() + " is empty");
  return std::move(*table);
}

EmbeddingTable EmbeddingTable::one_hot(const std::vector<std::string>& vocabulary) {
  std::set<std::string> distinct(vocabulary.begin(), vocabulary.end());
  EmbeddingTable table(std::max<std::size_t>(distinct.size(), 1));
  std::size_t index = 0;
  for (const auto& token : distinct) {
    std::vector<double> vec(table.dimension(), 0.0);
    vec[index++] = 1.0;
    table.add(token, std::move(vec));
  }
  return table;
}

std::unordered_map<std::string, double> load_frequencies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open frequency file " + path.string());
  std::unordered_map<std::string, double> counts;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": expected 'token count'");
    }
    try {
      counts[fields[0]] = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw InputError(path.string() + " line " + std::to_string(line_no) + ": bad count");
    }
  }
  return counts;
}

double semantic_score(std::span<const std::string> candidate, std::span<const std::string> original,
                      const EmbeddingTable& table) {
  if (candidate.empty() || original.empty()) {
    throw InvalidArgument("semantic_score: empty token sequence");
  }
  auto a = table.embed(candidate);
  auto b = table.embed(original);
  double norm_a = std::sqrt(dot(a, a));
  double norm_b = std::sqrt(dot(b, b));
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  double cosine = dot(a, b) / (norm_a * norm_b);
  return std::clamp(cosine, 0.0, 1.0);
}

int syntactic_score(const std::string& target_label, const std::string& source_label) {
  return target_label == source_label ? 1 : 0;
}

ScoreBreakdown composite_score(double f_lm, double f_sem, int f_syn, const ScoringParams& params) {
  if (!(f_lm > 0.0 && f_lm <= 1.0)) throw InvalidArgument("f_lm must lie in (0, 1]");
  if (!(f_sem >= 0.0 && f_sem <= 1.0)) throw InvalidArgument("f_sem must lie in [0, 1]");
  if (f_syn != 0 && f_syn != 1) throw InvalidArgument("f_syn must be 0 or 1");
  if (!(params.alpha >= 0.0) || !(params.beta >= 0.0)) {
    throw InvalidArgument("alpha and beta must be >= 0");
  }
  double lm_factor = params.ablate_lm ? 1.0 : std::pow(f_lm, params.alpha);
  double sem_factor = params.ablate_sem ? 1.0 : std::pow(f_sem, params.beta);
  double syn_factor = params.ablate_syn ? 1.0 : static_cast<double>(f_syn);
  return ScoreBreakdown{f_lm, f_sem, f_syn, lm_factor * sem_factor * syn_factor};
}

}  // namespace rqvqa
