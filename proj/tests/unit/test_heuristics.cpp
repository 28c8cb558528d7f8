// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rqvqa/error.hpp"
#include "rqvqa/heuristics.hpp"

namespace rqvqa {
namespace {

PromptSet prompt_set(const std::vector<double>& probs) {
  auto tree = parse_bracketed("(S (NP (NN q)))");
  PromptSet set{"q", tree, {}};
  for (double p : probs) set.prompts.push_back(RankedPrompt{EditCandidate{tree, "q", {}, {}}, p});
  return set;
}

TEST(NormalizeAnswer, Examples) {
  EXPECT_EQ(normalize_answer("The Fear."), "fear");
  EXPECT_EQ(normalize_answer("drying   hair"), "drying hair");
  EXPECT_EQ(normalize_answer("Two"), "2");
  EXPECT_EQ(normalize_answer(""), "");
  EXPECT_EQ(normalize_answer("  an \"Apple\" (red)! "), "apple red");
  EXPECT_EQ(normalize_answer("ten and eleven"), "10 and eleven");
  EXPECT_EQ(normalize_answer("theater"), "theater");
  EXPECT_EQ(normalize_answer(" drying hair\n"), "drying hair");
}

TEST(Aggregate, SameAnswerSumsAcrossPrompts) {
  auto out = aggregate(prompt_set({0.6, 0.4}), {{0, "fear", 0.5}, {1, "fear", 0.25}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].key, "fear");
  EXPECT_NEAR(out[0].p, 0.40, 1e-12);
  ASSERT_EQ(out[0].contributors.size(), 2u);
  EXPECT_EQ(out[0].contributors[1].prompt_p, 0.4);
  EXPECT_EQ(out[0].contributors[1].llm_p, 0.25);
}

TEST(Aggregate, DisjointAnswers) {
  auto out = aggregate(prompt_set({0.6, 0.4}), {{0, "fear", 1.0}, {1, "anxiety", 1.0}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].display, "fear");
  EXPECT_DOUBLE_EQ(out[0].p, 0.6);
  EXPECT_EQ(out[1].display, "anxiety");
  EXPECT_DOUBLE_EQ(out[1].p, 0.4);
}

TEST(Aggregate, GroupsByNormalizedKeyAndKeepsFirstDisplay) {
  auto out = aggregate(prompt_set({0.5, 0.3, 0.2}), {{2, "fear.", 1.0}, {0, " The fear", 0.5}, {1, "anxiety", 1.0}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].key, "fear");
  EXPECT_EQ(out[0].display, "The fear");
  EXPECT_NEAR(out[0].p, 0.45, 1e-12);
}

TEST(Aggregate, TiesOrderedByKey) {
  auto out = aggregate(prompt_set({0.5, 0.5}), {{0, "zebra", 1.0}, {1, "apple", 1.0}});
  EXPECT_EQ(out[0].key, "apple");
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate(prompt_set({1.0}), {{1, "x", 0.5}}), InvalidArgument);
  EXPECT_THROW(aggregate(prompt_set({1.0}), {{0, "x", 0.0}}), InvalidArgument);
  EXPECT_THROW(aggregate(prompt_set({1.0}), {{0, "x", 1.5}}), InvalidArgument);
  EXPECT_TRUE(aggregate(prompt_set({1.0}), {}).empty());
}

TEST(AggregateProperties, BoundedOrderInvariantAndAssociative) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> unit(1e-3, 1.0);
  const std::vector<std::string> pool = {"fear", "Fear", "the fear", "anxiety", "two", "2", "joy"};
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t k = 1 + rng() % 6;
    std::vector<double> f(k);
    double total = 0.0;
    for (auto& x : f) total += (x = unit(rng));
    for (auto& x : f) x /= total;
    auto set = prompt_set(f);
    std::vector<RawAnswer> raws;
    for (std::size_t i = 0; i < k; ++i) raws.push_back({i, pool[rng() % pool.size()], unit(rng)});

    auto out = aggregate(set, raws);
    double sum = 0.0;
    for (const auto& c : out) {
      sum += c.p;
      double expected = 0.0;
      for (const auto& contrib : c.contributors) expected += contrib.prompt_p * contrib.llm_p;
      EXPECT_NEAR(c.p, expected, 1e-12);
    }
    EXPECT_LE(sum, 1.0 + 1e-9);
    EXPECT_LE(out.size(), raws.size());

    auto shuffled = raws;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto again = aggregate(set, shuffled);
    ASSERT_EQ(again.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(again[i].key, out[i].key);
      EXPECT_EQ(again[i].display, out[i].display);
      EXPECT_EQ(again[i].p, out[i].p);
    }

    // Collapsing each group into one pre-summed answer gives the same totals.
    PromptSet merged_set = prompt_set(std::vector<double>(out.size(), 1.0));
    std::vector<RawAnswer> merged;
    for (std::size_t i = 0; i < out.size(); ++i) merged.push_back({i, out[i].key, out[i].p});
    auto merged_out = aggregate(merged_set, merged);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(merged_out[i].p, out[i].p, 1e-12);
  }
}

TEST(AggregateProperties, AllCertainAnswersSumToOne) {
  auto out = aggregate(prompt_set({0.2, 0.3, 0.5}), {{0, "a1", 1.0}, {1, "b", 1.0}, {2, "a1", 1.0}});
  double sum = 0.0;
  for (const auto& c : out) sum += c.p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

}  // namespace
}  // namespace rqvqa
