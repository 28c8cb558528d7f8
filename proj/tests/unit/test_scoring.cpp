// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "rqvqa/error.hpp"
#include "rqvqa/scoring.hpp"

namespace rqvqa {
namespace {

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Straightforward add-k bigram scorer written against the textbook formula.
struct BigramOracle {
  std::map<std::pair<std::string, std::string>, double> pair_counts;
  std::map<std::string, double> history_counts;
  std::set<std::string> vocab;
  double k;

  BigramOracle(const std::vector<std::string>& corpus, double smoothing) : k(smoothing) {
    for (const auto& line : corpus) {
      std::string prev = "<s>";
      for (const auto& w : words(line)) {
        vocab.insert(w);
        pair_counts[{prev, w}] += 1;
        history_counts[prev] += 1;
        prev = w;
      }
    }
  }
  double prob(std::string prev, std::string w) const {
    if (prev != "<s>" && !vocab.count(prev)) prev = "<unk>";
    if (!vocab.count(w)) w = "<unk>";
    double v = static_cast<double>(vocab.size()) + 1.0;
    auto pc = pair_counts.find({prev, w});
    auto hc = history_counts.find(prev);
    double c = pc == pair_counts.end() ? 0.0 : pc->second;
    double h = hc == history_counts.end() ? 0.0 : hc->second;
    return (c + k) / (h + k * v);
  }
  double score(const std::vector<std::string>& sentence) const {
    double log_sum = 0.0;
    std::string prev = "<s>";
    for (const auto& w : sentence) {
      log_sum += std::log(prob(prev, w));
      prev = w;
    }
    return std::exp(log_sum / static_cast<double>(sentence.size()));
  }
};

TEST(LmScore, UniformModel) {
  UniformLanguageModel lm(10);
  EXPECT_NEAR(lm_score(words("any three tokens"), lm), 0.1, 1e-12);
}

TEST(LmScore, EmptyInputThrows) {
  UniformLanguageModel lm(10);
  EXPECT_THROW(lm_score(std::vector<std::string>{}, lm), InvalidArgument);
}

TEST(LmScore, BigramMatchesOracle) {
  std::vector<std::string> corpus = {"a dog runs", "a cat runs"};
  auto model = train_ngram(corpus, 2, 1.0);
  BigramOracle oracle(corpus, 1.0);
  EXPECT_NEAR(lm_score(words("a dog runs"), model), oracle.score(words("a dog runs")), 1e-12);
  // Hand value: P(a|<s>) = 3/7, P(dog|a) = 2/7, P(runs|dog) = 2/6.
  EXPECT_NEAR(lm_score(words("a dog runs"), model), std::cbrt(3.0 / 7 * 2.0 / 7 * 2.0 / 6), 1e-12);
  for (const char* s : {"a cat runs", "runs a dog", "a zebra runs", "zebra", "cat cat cat a"}) {
    EXPECT_NEAR(lm_score(words(s), model), oracle.score(words(s)), 1e-12) << s;
  }
}

TEST(LmScore, SmoothingConstantMatchesOracle) {
  std::vector<std::string> corpus = {"the cat sat on the mat", "the dog sat", "a cat ran"};
  auto model = train_ngram(corpus, 2, 0.25);
  BigramOracle oracle(corpus, 0.25);
  for (const char* s : {"the cat sat", "a dog ran on the mat", "mat the on"}) {
    EXPECT_NEAR(lm_score(words(s), model), oracle.score(words(s)), 1e-12) << s;
  }
}

TEST(TrainNgram, Counts) {
  auto unigram = train_ngram({"a dog"}, 1, 1.0);
  EXPECT_EQ(unigram.count({}, "a"), 1u);
  EXPECT_EQ(unigram.count({}, "dog"), 1u);
  std::set<std::string> vocab(unigram.vocabulary().begin(), unigram.vocabulary().end());
  EXPECT_EQ(vocab, (std::set<std::string>{"a", "dog", NGramModel::kUnk}));

  auto bigram = train_ngram({"a dog", "a cat"}, 2, 1.0);
  EXPECT_EQ(bigram.count({"a"}, "dog"), 1u);
  EXPECT_EQ(bigram.count({"a"}, "cat"), 1u);
  EXPECT_EQ(bigram.count({NGramModel::kBos}, "a"), 2u);
}

TEST(TrainNgram, Errors) {
  EXPECT_THROW(train_ngram({}, 2, 1.0), InvalidArgument);
  EXPECT_THROW(train_ngram({"", "  "}, 2, 1.0), InvalidArgument);
  EXPECT_THROW(train_ngram({"a"}, 0, 1.0), InvalidArgument);
  EXPECT_THROW(train_ngram({"a"}, 2, 0.0), InvalidArgument);
}

TEST(TrainNgram, DistributionSumsToOne) {
  auto model = train_ngram({"the cat sat on the mat", "the dog sat", "a cat ran"}, 3, 0.5);
  for (std::vector<std::string> history : {std::vector<std::string>{}, {"the"}, {"the", "cat"}, {"x", "y"}}) {
    double total = 0.0;
    for (const auto& w : model.vocabulary()) {
      double p = std::exp(model.log_prob(history, w));
      EXPECT_GT(p, 0.0);
      EXPECT_LE(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(TrainNgram, OnlyRecentHistoryMatters) {
  auto model = train_ngram({"the cat sat on the mat", "the dog sat"}, 2, 1.0);
  std::vector<std::string> short_history = {"cat"};
  std::vector<std::string> long_history = {"dog", "on", "mat", "the", "cat"};
  EXPECT_DOUBLE_EQ(model.log_prob(short_history, "sat"), model.log_prob(long_history, "sat"));

  auto trigram = train_ngram({"the cat sat on the mat", "the dog sat"}, 3, 1.0);
  std::vector<std::string> h1 = {"the", "cat"};
  std::vector<std::string> h2 = {"mat", "dog", "the", "cat"};
  EXPECT_DOUBLE_EQ(trigram.log_prob(h1, "sat"), trigram.log_prob(h2, "sat"));
}

TEST(TrainNgram, FileCorpus) {
  auto path = std::filesystem::temp_directory_path() / "rqvqa_lm_corpus.txt";
  {
    std::ofstream out(path);
    out << "a dog runs\n\na cat runs\n";
  }
  auto from_file = train_ngram_file(path, 2, 1.0);
  auto direct = train_ngram({"a dog runs", "a cat runs"}, 2, 1.0);
  EXPECT_DOUBLE_EQ(lm_score(words("a dog runs"), from_file), lm_score(words("a dog runs"), direct));
  std::filesystem::remove(path);
}

EmbeddingTable xy_table() {
  EmbeddingTable table(2);
  table.add("x", {1.0, 0.0});
  table.add("y", {0.0, 1.0});
  return table;
}

TEST(SemanticScore, Examples) {
  auto table = xy_table();
  EXPECT_DOUBLE_EQ(semantic_score(words("x y"), words("x y"), table), 1.0);
  EXPECT_DOUBLE_EQ(semantic_score(words("x"), words("y"), table), 0.0);
  EXPECT_NEAR(semantic_score(words("x y"), words("x"), table), 0.7071067811865476, 1e-6);
}

TEST(SemanticScore, ZeroVectorsAndNegativeCosine) {
  auto table = xy_table();
  table.add("minus_x", {-1.0, 0.0});
  EXPECT_EQ(semantic_score(words("unknown"), words("x"), table), 0.0);
  EXPECT_EQ(semantic_score(words("minus_x"), words("x"), table), 0.0);
  EXPECT_THROW(semantic_score(std::vector<std::string>{}, words("x"), table), InvalidArgument);
}

TEST(SemanticScore, InverseFrequencyWeights) {
  auto table = xy_table();
  table.set_frequencies({{"x", 3.0}, {"y", 0.0}});
  EXPECT_DOUBLE_EQ(table.weight("x"), 0.25);
  EXPECT_DOUBLE_EQ(table.weight("y"), 1.0);
  // e = (0.25 * (1,0) + 1 * (0,1)) / 1.25 -> cos with (1,0) = 0.25 / sqrt(0.25^2 + 1)
  EXPECT_NEAR(semantic_score(words("x y"), words("x"), table), 0.25 / std::sqrt(0.0625 + 1.0), 1e-12);
}

TEST(SemanticScore, SymmetricAndScaleInvariant) {
  std::mt19937 rng(3);
  std::normal_distribution<double> gauss;
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 100; ++trial) {
    EmbeddingTable table(4), scaled(4);
    double factor = 0.1 + trial;
    for (const auto& w : vocab) {
      std::vector<double> v(4);
      for (auto& x : v) x = gauss(rng);
      auto s = v;
      for (auto& x : s) x *= factor;
      table.add(w, v);
      scaled.add(w, s);
    }
    std::vector<std::string> lhs, rhs;
    for (int i = 0; i < 3; ++i) lhs.push_back(vocab[rng() % 5]);
    for (int i = 0; i < 2; ++i) rhs.push_back(vocab[rng() % 5]);
    double s = semantic_score(lhs, rhs, table);
    EXPECT_NEAR(s, semantic_score(rhs, lhs, table), 1e-12);
    EXPECT_NEAR(s, semantic_score(lhs, rhs, scaled), 1e-12);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(EmbeddingTable, LoadAndValidate) {
  auto path = std::filesystem::temp_directory_path() / "rqvqa_vectors.txt";
  {
    std::ofstream out(path);
    out << "x 1 0\ny 0 1\n";
  }
  auto table = EmbeddingTable::load(path);
  EXPECT_EQ(table.dimension(), 2u);
  EXPECT_NEAR(semantic_score(words("x y"), words("x"), table), 0.7071067811865476, 1e-12);
  {
    std::ofstream out(path);
    out << "x 1 0\ny 0 1 2\n";
  }
  EXPECT_THROW(EmbeddingTable::load(path), InputError);
  std::filesystem::remove(path);
  EXPECT_THROW(table.add("z", {1.0}), InvalidArgument);
}

TEST(SyntacticScore, ByteEquality) {
  EXPECT_EQ(syntactic_score("NP", "NP"), 1);
  EXPECT_EQ(syntactic_score("NP", "VP"), 0);
  EXPECT_EQ(syntactic_score("NP", "np"), 0);
}

TEST(CompositeScore, Examples) {
  ScoringParams params;
  EXPECT_NEAR(composite_score(0.5, 0.9, 1, params).f, 0.7311, 1e-4);
  EXPECT_NEAR(composite_score(0.5, 0.9, 1, params).f, std::pow(0.5, 0.3) * 0.9, 1e-15);
  EXPECT_EQ(composite_score(0.3, 0.8, 0, params).f, 0.0);
  EXPECT_EQ(composite_score(1.0, 1.0, 1, params).f, 1.0);
  auto b = composite_score(0.5, 0.9, 1, params);
  EXPECT_EQ(b.f_lm, 0.5);
  EXPECT_EQ(b.f_sem, 0.9);
  EXPECT_EQ(b.f_syn, 1);
}

TEST(CompositeScore, Ablations) {
  ScoringParams lm;
  lm.ablate_lm = true;
  EXPECT_DOUBLE_EQ(composite_score(0.5, 0.9, 1, lm).f, 0.9);
  ScoringParams sem;
  sem.ablate_sem = true;
  EXPECT_DOUBLE_EQ(composite_score(0.5, 0.9, 1, sem).f, std::pow(0.5, 0.3));
  ScoringParams syn;
  syn.ablate_syn = true;
  EXPECT_DOUBLE_EQ(composite_score(0.5, 0.9, 0, syn).f, std::pow(0.5, 0.3) * 0.9);
  EXPECT_GT(composite_score(1e-9, 1e-9, 0, syn).f, 0.0);
}

TEST(CompositeScore, RangeErrors) {
  ScoringParams params;
  EXPECT_THROW(composite_score(0.0, 0.5, 1, params), InvalidArgument);
  EXPECT_THROW(composite_score(1.5, 0.5, 1, params), InvalidArgument);
  EXPECT_THROW(composite_score(0.5, -0.1, 1, params), InvalidArgument);
  EXPECT_THROW(composite_score(0.5, 0.5, 2, params), InvalidArgument);
  params.alpha = -1;
  EXPECT_THROW(composite_score(0.5, 0.5, 1, params), InvalidArgument);
}

TEST(CompositeScore, MonotoneAndBounded) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unit(1e-6, 1.0);
  ScoringParams params;
  for (int trial = 0; trial < 1000; ++trial) {
    double lm = unit(rng), sem = unit(rng), bump = unit(rng);
    double f = composite_score(lm, sem, 1, params).f;
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    EXPECT_LE(f, composite_score(std::min(1.0, lm + bump), sem, 1, params).f);
    EXPECT_LE(f, composite_score(lm, std::min(1.0, sem + bump), 1, params).f);
    EXPECT_LE(composite_score(lm, sem, 0, params).f, f);
  }
}

}  // namespace
}  // namespace rqvqa
