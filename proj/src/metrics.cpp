#include "absparse/metrics.hpp"

#include "absparse/lang.hpp"

namespace absparse {

Metrics evaluate(const GroupParser& parser, const std::vector<ExampleGroup>& groups,
                 std::vector<GroupVerdict>* verdicts) {
  Metrics m;
  long long correct = 0, consistent_groups = 0;
  for (const ExampleGroup& group : groups) {
    const RuleParseResult parsed = parser(group);
    GroupVerdict v;
    v.utterance = group.raw_utterance;
    v.fallback = parsed.used_fallback();
    if (parsed.program) v.program = parsed.program->text();
    bool all_correct = true;
    for (const auto& [kb, label] : group.pairs) {
      const bool prediction = parsed.program ? execute(*parsed.program, kb) : true;
      const bool ok = prediction == label;
      v.predictions.push_back(prediction);
      v.labels.push_back(label);
      correct += ok ? 1 : 0;
      all_correct &= ok;
      ++m.n_examples;
    }
    v.consistent = all_correct;
    consistent_groups += all_correct ? 1 : 0;
    ++m.n_groups;
    if (verdicts) verdicts->push_back(std::move(v));
  }
  m.accuracy = m.n_examples ? static_cast<double>(correct) / m.n_examples : 0.0;
  m.consistency = m.n_groups ? static_cast<double>(consistent_groups) / m.n_groups : 0.0;
  return m;
}

}  // namespace absparse
