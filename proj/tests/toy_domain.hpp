#pragma once

// Synthetic five-pattern domain used by the acceptance suite: a small
// lexicon, abstract patterns, weak-supervision groups with gold-labeled
// worlds, and augmented warm-start data covering only the first two
// patterns. The rest must be discovered by weakly-supervised search.

#include <random>
#include <string>
#include <vector>

#include "absparse/augment.hpp"
#include "absparse/search.hpp"
#include "absparse/train.hpp"

namespace absparse::testing {

struct ToyDomain {
  Lexicon lex;
  AnnotationSet annotations;
  TokenSubset subset;
  Vocab vocab;
  std::vector<ExampleGroup> groups;              // weak supervision
  std::vector<GeneratedPair> warm_train, warm_val;  // supervised warm start
};

ToyDomain build_toy_domain(std::uint64_t seed) {
  const auto& inv = TokenInventory::instance();
  std::vector<LexiconEntry> entries = {
      {Cluster::Color, "yellow", inv.id("IsYellow"), false},
      {Cluster::Color, "blue", inv.id("IsBlue"), false},
      {Cluster::Color, "black", inv.id("IsBlack"), false},
      {Cluster::Shape, "square", inv.id("IsSquare"), false},
      {Cluster::Shape, "circle", inv.id("IsCircle"), false},
      {Cluster::Shape, "triangle", inv.id("IsTriangle"), false},
      {Cluster::Size, "big", inv.id("IsBig"), false},
      {Cluster::Size, "small", inv.id("IsSmall"), false},
      {Cluster::QuantMod, "exactly", inv.id("Equal"), false},
      {Cluster::QuantMod, "at least", inv.id("GreaterEqual"), false},
  };
  // numerals restricted to the toy token subset's range
  const char* words[] = {"one", "two", "three", "four"};
  for (int n = 1; n <= 4; ++n) {
    entries.push_back({Cluster::Num, std::to_string(n), inv.numeral(n), false});
    entries.push_back({Cluster::Num, words[n - 1], inv.numeral(n), false});
  }
  ToyDomain toy{Lexicon::from_entries(entries, false),
                AnnotationSet{},
                TokenSubset::all(),  // decode over the full inventory
                Vocab{},
                {},
                {},
                {}};

  std::vector<AbstractPair> patterns;
  auto pat = [&](const std::string& utt, const std::string& prog, const std::string& align) {
    patterns.push_back(parse_abstract_pair(utt, prog, align));
  };
  // the five toy patterns; the warm start sees augmented data from the first
  // two only, the rest must be discovered by weakly-supervised search
  pat("there is a C-Color C-Shape",
      "Exist Filter ALL_ITEMS lambda And C-Color x C-Shape x", "0:0 1:1");
  pat("there are C-QuantMod C-Num C-Color item",
      "C-QuantMod C-Num Count Filter ALL_ITEMS lambda C-Color x", "0:0 1:1 2:2");
  pat("there is no C-Color C-Shape",
      "Not Exist Filter ALL_ITEMS lambda And C-Color x C-Shape x", "0:0 1:1");
  pat("there are C-QuantMod C-Num C-Color C-Shape touching the wall",
      "C-QuantMod C-Num Count Filter ALL_ITEMS lambda And And C-Color x C-Shape x "
      "IsTouchingWall x Side.Any",
      "0:0 1:1 2:2 3:3");
  pat("there are C-QuantMod C-Num C-Size C-Color C-Shape",
      "C-QuantMod C-Num Count Filter ALL_ITEMS lambda And And C-Color x C-Size x "
      "C-Shape x",
      "0:0 1:1 2:3 3:2 4:4");
  toy.annotations = AnnotationSet::from_pairs(patterns, toy.lex);

  // weak-supervision groups: a balanced draw from every pattern, 4 KBs
  // each, labels from the gold program (patterns 0-2 are warm-start covered;
  // 3-4 must be discovered)
  std::vector<GeneratedPair> sampled;
  for (const AbstractPair& pattern : patterns) {
    const AnnotationSet one = AnnotationSet::from_pairs({pattern}, toy.lex);
    int want = 12;
    std::vector<GeneratedPair> drawn;
    while (want > 0 && drawn.empty()) {
      try {
        drawn = generate(one, toy.lex, want, seed + 1 + want);
      } catch (const Error&) {
        --want;  // pattern has fewer distinct instantiations than requested
      }
    }
    sampled.insert(sampled.end(), drawn.begin(), drawn.end());
  }
  std::vector<std::string> vocab_source;
  for (const auto& p : sampled) {
    std::string joined;
    for (const auto& t : p.utterance) joined += t + " ";
    vocab_source.push_back(joined);
  }
  toy.vocab = build_vocab(vocab_source, 1);

  WorldSpec spec;
  spec.items_per_box = {2, 2, 2};
  std::uint64_t world_seed = seed * 100000;
  for (const auto& p : sampled) {
    ExampleGroup g;
    for (const auto& t : p.utterance) g.raw_utterance += t + " ";
    g.utterance = p.utterance;
    // worlds resampled until the labels are mixed, mirroring the source
    // dataset's deliberately balanced image pairing; degenerate groups are
    // kept after a bounded number of tries
    for (int attempt = 0; attempt < 50; ++attempt) {
      g.pairs.clear();
      bool any_true = false, any_false = false;
      for (int j = 0; j < 4; ++j) {
        const KnowledgeBase kb = sample_world(world_seed++, spec);
        const bool label = execute(p.program, kb);
        (label ? any_true : any_false) = true;
        g.pairs.emplace_back(kb, label);
      }
      if (any_true && any_false) break;
    }
    toy.groups.push_back(std::move(g));
  }

  // warm-start data: the first three patterns only
  const AnnotationSet warm_ann =
      AnnotationSet::from_pairs({patterns[0], patterns[1], patterns[2]}, toy.lex);
  auto warm = generate(warm_ann, toy.lex, 60, seed + 2);
  const GeneratedSplit split = split_generated(warm, 8, seed + 3);
  toy.warm_train = split.train;
  toy.warm_val = split.validation;
  return toy;
}

TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.emb = 8;
  cfg.lstm = 12;
  cfg.hidden = 16;
  cfg.head_hidden = 12;
  cfg.history = 3;
  cfg.beam_size = 20;
  cfg.top_d = 10;
  cfg.max_len = 16;
  cfg.min_count = 1;
  cfg.lr = 0.005;
  cfg.batch_size = 4;
  cfg.seed = seed;
  cfg.use_cbow = false;
  return cfg;
}


}  // namespace absparse::testing
