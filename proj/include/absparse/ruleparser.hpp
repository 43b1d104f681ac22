#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absparse/abstraction.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// Rule-based parser: exact match over manually annotated abstract
// utterance-program pairs, falling back to the majority verdict TRUE.
// ---------------------------------------------------------------------------

class AnnotationSet {
 public:
  // File format: blocks of three lines (abstract utterance / abstract program
  // / alignment), separated by blank lines; '#' starts a comment line.
  static AnnotationSet load(const std::string& path, const Lexicon& lex);
  static AnnotationSet from_pairs(std::vector<AbstractPair> pairs, const Lexicon& lex);

  const AbstractPair* find(const std::string& abstract_key) const;
  const std::vector<AbstractPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }

 private:
  void index_and_validate(const Lexicon& lex);
  std::vector<AbstractPair> pairs_;
  std::map<std::string, std::size_t> by_key_;
};

struct RuleParseResult {
  // Empty means the fallback verdict TRUE (either no matching annotation or
  // a failed de-abstraction).
  std::optional<Program> program;

  bool used_fallback() const { return !program.has_value(); }
};

RuleParseResult rule_parse(const std::vector<std::string>& x, const AnnotationSet& annotations,
                           const Lexicon& lex);

// -- coverage ----------------------------------------------------------------

struct CoverageReport {
  long long total_utterances = 0;
  // (abstract pattern, utterance count), by count descending then pattern.
  std::vector<std::pair<std::string, long long>> histogram;

  std::size_t distinct_patterns() const { return histogram.size(); }
  double top_k_coverage(std::size_t k) const;
};

CoverageReport coverage_report(const std::vector<std::vector<std::string>>& utterances,
                               const Lexicon& lex);

}  // namespace absparse
