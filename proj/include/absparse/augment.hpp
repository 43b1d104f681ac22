#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "absparse/ruleparser.hpp"
#include "absparse/world.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// Synchronous-grammar data augmentation: sample an annotated abstract pair,
// then instantiate each cluster slot with a lexicon entry, substituting the
// utterance and program sides together.
// ---------------------------------------------------------------------------

struct GeneratedPair {
  std::vector<std::string> utterance;
  Program program;
};

// n distinct pairs, deterministic per seed. Annotations whose clusters lack
// lexicon entries are skipped (reported via `warnings` when given). Throws
// when n distinct pairs cannot be produced within bounded retries.
std::vector<GeneratedPair> generate(const AnnotationSet& annotations, const Lexicon& lex,
                                    int n, std::uint64_t seed,
                                    std::vector<std::string>* warnings = nullptr);

struct GeneratedSplit {
  std::vector<GeneratedPair> train;
  std::vector<GeneratedPair> validation;
};

// Random partition at the utterance level: identical utterances never land on
// both sides.
GeneratedSplit split_generated(const std::vector<GeneratedPair>& pairs, int validation_size,
                               std::uint64_t seed);

// Canonical corpus records with a program column: each pair gets a sampled
// world and the label from executing the program against it.
std::vector<CorpusRecord> pairs_to_corpus(const std::vector<GeneratedPair>& pairs,
                                          std::uint64_t world_seed);

}  // namespace absparse
