#include "absparse/augment.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace absparse {

namespace {

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

std::vector<GeneratedPair> generate(const AnnotationSet& annotations, const Lexicon& lex,
                                    int n, std::uint64_t seed,
                                    std::vector<std::string>* warnings) {
  if (n <= 0) return {};
  if (annotations.size() == 0) throw Error("cannot generate from an empty annotation set");

  // Usable annotations: every cluster slot must have at least one candidate.
  std::vector<const AbstractPair*> usable;
  for (const AbstractPair& pair : annotations.pairs()) {
    bool ok = true;
    for (const AbstractSlot& slot : pair.utterance.slots)
      if (lex.cluster_entries(slot.cluster).empty()) ok = false;
    if (ok) {
      usable.push_back(&pair);
    } else if (warnings) {
      warnings->push_back("skipping annotation with uninstantiable slot: " +
                          pair.utterance.key());
    }
  }
  if (usable.empty()) throw Error("no annotation is instantiable with this lexicon");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_ann(0, usable.size() - 1);
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<GeneratedPair> out;
  const long long max_attempts = 200LL * n + 1000;
  long long attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++attempts > max_attempts)
      throw Error("could not generate " + std::to_string(n) +
                  " distinct pairs (space exhausted after " + std::to_string(attempts - 1) +
                  " attempts)");
    const AbstractPair& pair = *usable[pick_ann(rng)];

    // instantiate utterance slots
    AbstractUtterance xbar = pair.utterance;
    std::vector<std::string> utt;
    for (std::size_t pos = 0, slot = 0; pos < xbar.tokens.size(); ++pos) {
      if (slot < xbar.slots.size() &&
          xbar.slots[slot].position == static_cast<int>(pos)) {
        const auto candidates = lex.cluster_entries(xbar.slots[slot].cluster);
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const LexiconEntry* e = candidates[pick(rng)];
        xbar.slots[slot].original = e->utterance_token;
        // multiword entries splice back into the token sequence
        std::istringstream words(e->utterance_token);
        std::string w;
        while (words >> w) utt.push_back(w);
        ++slot;
      } else {
        utt.push_back(xbar.tokens[pos]);
      }
    }

    Program z;
    try {
      z = deabstract(pair.program, xbar, lex);
    } catch (const DeabstractError&) {
      continue;  // e.g. annotation aligned to a slot this sample cannot fill
    }
    auto key = std::make_pair(join(utt), z.text());
    if (!seen.insert(std::move(key)).second) continue;
    out.push_back(GeneratedPair{std::move(utt), std::move(z)});
  }
  return out;
}

GeneratedSplit split_generated(const std::vector<GeneratedPair>& pairs, int validation_size,
                               std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_utterance;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_utterance[join(pairs[i].utterance)].push_back(i);

  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [utt, idxs] : by_utterance) groups.push_back(&idxs);
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  GeneratedSplit split;
  std::size_t val_count = 0;
  for (const auto* group : groups) {
    const bool to_val = val_count < static_cast<std::size_t>(validation_size);
    for (std::size_t i : *group) {
      if (to_val)
        split.validation.push_back(pairs[i]);
      else
        split.train.push_back(pairs[i]);
    }
    if (to_val) val_count += group->size();
  }
  return split;
}

std::vector<CorpusRecord> pairs_to_corpus(const std::vector<GeneratedPair>& pairs,
                                          std::uint64_t world_seed) {
  std::vector<CorpusRecord> out;
  out.reserve(pairs.size());
  WorldSpec spec;
  spec.items_per_box = {3, 3, 3};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CorpusRecord rec;
    rec.sentence = join(pairs[i].utterance);
    rec.kb = sample_world(world_seed + i, spec);
    rec.label = execute(pairs[i].program, rec.kb);
    rec.program_text = pairs[i].program.text();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace absparse
