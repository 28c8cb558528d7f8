// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rqvqa/pipeline.hpp"

namespace rqvqa::cli {

/// Effective settings after defaults, config file and flags are merged (flags win).
struct Config {
  std::string input;
  std::string output;
  double alpha = 0.3;
  double beta = 1.0;
  double rho = 0.5;
  std::size_t k = 5;
  std::vector<std::string> labels = {"ADJP", "ADVP", "NP", "PP", "VP", "WHNP"};
  /// "" trains a bigram on the input's questions and captions;
  /// "ngram:<corpus>[:<order>[:<smoothing>]]" or "uniform:<vocabulary size>".
  std::string lm;
  std::string embeddings;
  std::string frequencies;
  std::string backend = "mock";
  std::string endpoint;
  std::string model = "mock";
  std::string mock_script;
  std::string cache_dir;
  std::size_t concurrency = 4;
  int max_tokens = 16;
  bool trace = false;
  std::vector<std::string> ablate;
  std::string metric = "auto";
  bool fail_fast = false;

  bool ablated(const std::string& what) const;
  nlohmann::json to_json() const;
};

/// Runs the command line; returns the process exit code.
/// 0 success, 1 runtime/backend failure, 2 invalid input or configuration.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rqvqa::cli
