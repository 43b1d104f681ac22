#pragma once

#include <map>
#include <string>
#include <vector>

namespace absparse {

// ---------------------------------------------------------------------------
// Utterance preprocessing: lowercasing, edit-distance-1 spelling correction,
// rule-based lemmatization, and UNK replacement for rare words. The vocab is
// built from the training split only.
// ---------------------------------------------------------------------------

inline constexpr const char* kUnkToken = "UNK";

// Lowercases and splits into alphanumeric runs; punctuation is dropped.
// The UNK symbol passes through unchanged so preprocessing is idempotent.
std::vector<std::string> tokenize(const std::string& raw);

// Small rule-based stemmer (plural -s/-es, -ing, -ed) with an exception list.
std::string lemmatize(const std::string& token);

struct Vocab {
  int min_count = 5;
  std::map<std::string, int> raw_counts;    // post-lowercase, pre-lemma (spell correction)
  std::map<std::string, int> lemma_counts;  // final forms (UNK decision)

  bool frequent_raw(const std::string& tok) const;
  bool frequent_lemma(const std::string& tok) const;
};

Vocab build_vocab(const std::vector<std::string>& raw_utterances, int min_count = 5);

// Returns the in-vocab token at edit distance 1 with the highest training
// frequency (ties: lexicographically smallest), or empty if none exists.
std::string spell_correct(const std::string& token, const Vocab& vocab);

// lowercase -> spell-correct -> lemmatize -> UNK, in that order.
std::vector<std::string> preprocess(const std::string& raw, const Vocab& vocab);

// Dense id space over the final vocabulary for the neural model. Token order
// is deterministic (sorted), UNK last.
struct TokenIndex {
  std::vector<std::string> tokens;
  std::map<std::string, int> ids;
  int unk_id = 0;

  static TokenIndex build(const Vocab& vocab);
  int size() const { return static_cast<int>(tokens.size()); }
  int id(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& toks) const;
};

}  // namespace absparse
