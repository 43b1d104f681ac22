#include "absparse/ruleparser.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace absparse {

void AnnotationSet::index_and_validate(const Lexicon& lex) {
  by_key_.clear();
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const AbstractPair& pair = pairs_[i];
    const std::string key = pair.utterance.key();
    if (!by_key_.emplace(key, i).second)
      throw Error("duplicate annotation for abstract utterance: " + key);

    // patterns must be abstraction-closed or they can never match
    if (abstract_utterance(pair.utterance.tokens, lex).tokens != pair.utterance.tokens)
      throw Error("annotation '" + key +
                  "' contains lexicon tokens; it is not a fixed point of abstraction");

    // Every annotation must de-abstract to a well-typed program; with
    // signature-homogeneous clusters one representative per cluster suffices.
    AbstractUtterance probe = pair.utterance;
    for (AbstractSlot& slot : probe.slots) {
      const auto entries = lex.cluster_entries(slot.cluster);
      if (entries.empty())
        throw Error("annotation '" + key + "' uses cluster " + cluster_label(slot.cluster) +
                    " with no lexicon entries");
      slot.original = entries.front()->utterance_token;
    }
    try {
      deabstract(pair.program, probe, lex);
    } catch (const DeabstractError& e) {
      throw Error("annotation '" + key + "' cannot be instantiated: " + e.what());
    }
  }
}

AnnotationSet AnnotationSet::from_pairs(std::vector<AbstractPair> pairs, const Lexicon& lex) {
  AnnotationSet set;
  set.pairs_ = std::move(pairs);
  set.index_and_validate(lex);
  return set;
}

AnnotationSet AnnotationSet::load(const std::string& path, const Lexicon& lex) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotations: " + path);
  std::vector<AbstractPair> pairs;
  std::vector<std::string> block;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&]() {
    if (block.empty()) return;
    if (block.size() != 3)
      throw Error("annotations " + path + ": block ending at line " + std::to_string(line_no) +
                  " has " + std::to_string(block.size()) + " lines, want 3");
    pairs.push_back(parse_abstract_pair(block[0], block[1], block[2]));
    block.clear();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    block.push_back(line);
  }
  flush();
  AnnotationSet set;
  set.pairs_ = std::move(pairs);
  set.index_and_validate(lex);
  return set;
}

const AbstractPair* AnnotationSet::find(const std::string& abstract_key) const {
  auto it = by_key_.find(abstract_key);
  return it == by_key_.end() ? nullptr : &pairs_[it->second];
}

RuleParseResult rule_parse(const std::vector<std::string>& x, const AnnotationSet& annotations,
                           const Lexicon& lex) {
  const AbstractUtterance xbar = abstract_utterance(x, lex);
  const AbstractPair* match = annotations.find(xbar.key());
  if (!match) return {};
  try {
    return RuleParseResult{deabstract(match->program, xbar, lex)};
  } catch (const DeabstractError&) {
    return {};  // fall back to the majority verdict
  }
}

double CoverageReport::top_k_coverage(std::size_t k) const {
  if (total_utterances == 0) return 0.0;
  long long covered = 0;
  for (std::size_t i = 0; i < histogram.size() && i < k; ++i) covered += histogram[i].second;
  return static_cast<double>(covered) / static_cast<double>(total_utterances);
}

CoverageReport coverage_report(const std::vector<std::vector<std::string>>& utterances,
                               const Lexicon& lex) {
  std::map<std::string, long long> counts;
  for (const auto& x : utterances) counts[abstract_utterance(x, lex).key()] += 1;

  CoverageReport report;
  report.total_utterances = static_cast<long long>(utterances.size());
  report.histogram.assign(counts.begin(), counts.end());
  std::sort(report.histogram.begin(), report.histogram.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return report;
}

}  // namespace absparse
