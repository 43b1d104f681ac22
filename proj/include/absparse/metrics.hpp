#pragma once

#include <functional>
#include <string>
#include <vector>

#include "absparse/ruleparser.hpp"
#include "absparse/world.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// Evaluation metrics: accuracy over (x, k, y) examples and consistency over
// utterance groups (correct denotation on every paired KB).
// ---------------------------------------------------------------------------

struct Metrics {
  double accuracy = 0.0;
  double consistency = 0.0;
  long long n_examples = 0;
  long long n_groups = 0;
};

struct GroupVerdict {
  std::string utterance;
  std::string program;  // empty on fallback
  bool fallback = false;
  std::vector<bool> predictions;
  std::vector<bool> labels;
  bool consistent = false;
};

// The parser returns a program or the fallback verdict TRUE. Fallback counts
// as predicting TRUE for accuracy, and the group is consistent only if every
// label is TRUE.
using GroupParser = std::function<RuleParseResult(const ExampleGroup&)>;

Metrics evaluate(const GroupParser& parser, const std::vector<ExampleGroup>& groups,
                 std::vector<GroupVerdict>* verdicts = nullptr);

}  // namespace absparse
