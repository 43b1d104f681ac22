#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absparse/lang.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// The seven-cluster abstraction: a small lexicon mapping utterance tokens to
// program tokens, abstract utterance/program construction with token-level
// alignment, and de-abstraction.
// ---------------------------------------------------------------------------

enum class Cluster : std::uint8_t { Color, Size, Shape, Num, QuantMod, Location, SpaceRel };

inline constexpr int kNumClusters = 7;

std::string cluster_label(Cluster c);  // "C-Color", "C-Size", ...
std::optional<Cluster> cluster_from_label(std::string_view label);

struct LexiconEntry {
  Cluster cluster = Cluster::Color;
  std::string utterance_token;  // possibly a multiword phrase, space-joined
  TokenId program_token = 0;
  bool generic = false;  // added programmatically, not counted as named
};

// Immutable after load. The shipped file carries the 25 named mappings;
// numeral tokens (digits and number words up to nine) are added generically.
class Lexicon {
 public:
  // Format: one entry per line, `cluster<TAB>utterance_token<TAB>program_token`.
  // Validates the per-cluster named counts and that program tokens within a
  // cluster share a signature shape, so substitution preserves typing.
  static Lexicon load(const std::string& path);

  // Assembly without the shipped-count validation, for toy domains.
  static Lexicon from_entries(std::vector<LexiconEntry> named, bool add_generic_numerals = true);

  const LexiconEntry* find_utterance(std::string_view token) const;
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::vector<const LexiconEntry*> cluster_entries(Cluster c) const;
  std::vector<const LexiconEntry*> entries_for_program_token(TokenId t) const;
  int named_count(Cluster c) const;
  int max_phrase_len() const { return max_phrase_len_; }

 private:
  Lexicon() = default;
  void index();
  void check_signature_homogeneity() const;

  std::vector<LexiconEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_utterance_;
  int max_phrase_len_ = 1;
};

struct AbstractSlot {
  int position = 0;  // index into the abstract token sequence
  Cluster cluster = Cluster::Color;
  std::string original;  // the concrete token/phrase that was abstracted
};

struct AbstractUtterance {
  std::vector<std::string> tokens;  // plain tokens and cluster labels
  std::vector<AbstractSlot> slots;  // one per cluster label, ascending position

  std::string key() const;  // space-joined tokens, the cache/annotation key
};

struct AbstractProgram {
  std::vector<std::string> tokens;  // program token names and cluster labels
  std::vector<int> slot_positions;  // positions holding cluster labels, ascending
  std::vector<int> alignment;       // program slot index -> utterance slot index

  std::string tokens_text() const;
  std::string alignment_text() const;  // "0:1 1:2 ..." pairs

  bool operator==(const AbstractProgram& o) const {
    return tokens == o.tokens && alignment == o.alignment;
  }
};

struct AbstractPair {
  AbstractUtterance utterance;
  AbstractProgram program;
};

// Replaces lexicon tokens by cluster labels; multiword phrases are matched
// longest-first; unknown tokens pass through unchanged.
AbstractUtterance abstract_utterance(const std::vector<std::string>& x, const Lexicon& lex);

// Replaces a program token by a cluster label iff the utterance contains an
// unused token mapping to it (leftmost-unused-first), recording the alignment.
AbstractProgram abstract_program(const std::vector<std::string>& x, const Program& z,
                                 const Lexicon& lex);
AbstractProgram abstract_program(const AbstractUtterance& xbar, const Program& z,
                                 const Lexicon& lex);

struct DeabstractError : Error {
  using Error::Error;
};

// Instantiates every cluster slot of zbar from xbar's aligned original tokens
// via the lexicon. Throws DeabstractError when an aligned slot is missing, a
// token is unmapped, clusters disagree, or the result is not well-typed.
Program deabstract(const AbstractProgram& zbar, const AbstractUtterance& xbar,
                   const Lexicon& lex);

// First min(t, |zbar|) tokens with only the slots inside the prefix
// substituted. No typing check; the caller steps its own stack.
std::vector<TokenId> deabstract_prefix(const AbstractProgram& zbar,
                                       const AbstractUtterance& xbar, const Lexicon& lex,
                                       int t);

// Three-line serialization: abstract utterance, abstract program, alignment.
std::string serialize_abstract_pair(const AbstractPair& pair);
AbstractPair parse_abstract_pair(const std::string& utterance_line,
                                 const std::string& program_line,
                                 const std::string& alignment_line);

}  // namespace absparse
