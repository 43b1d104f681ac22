#include "absparse/abstraction.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace absparse {

namespace {

constexpr std::array<const char*, kNumClusters> kClusterLabels = {
    "C-Color", "C-Size", "C-Shape", "C-Num", "C-QuantMod", "C-Location", "C-SpaceRel"};

const char* const kNumberWords[] = {"one", "two",   "three", "four", "five",
                                    "six", "seven", "eight", "nine"};

}  // namespace

std::string cluster_label(Cluster c) { return kClusterLabels[static_cast<int>(c)]; }

std::optional<Cluster> cluster_from_label(std::string_view label) {
  for (int i = 0; i < kNumClusters; ++i)
    if (label == kClusterLabels[i]) return static_cast<Cluster>(i);
  return std::nullopt;
}

// -- lexicon -----------------------------------------------------------------

void Lexicon::index() {
  by_utterance_.clear();
  max_phrase_len_ = 1;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.utterance_token.empty()) throw Error("lexicon entry with empty utterance token");
    auto [it, inserted] = by_utterance_.emplace(e.utterance_token, i);
    if (!inserted)
      throw Error("duplicate lexicon utterance token: '" + e.utterance_token + "'");
    const int words =
        1 + static_cast<int>(std::count(e.utterance_token.begin(), e.utterance_token.end(), ' '));
    max_phrase_len_ = std::max(max_phrase_len_, words);
  }
}

void Lexicon::check_signature_homogeneity() const {
  const auto& inv = TokenInventory::instance();
  for (int c = 0; c < kNumClusters; ++c) {
    const TokenSignature* first = nullptr;
    for (const auto& e : entries_) {
      if (e.cluster != static_cast<Cluster>(c)) continue;
      const TokenSignature& s = inv.sig(e.program_token);
      if (!first) {
        first = &s;
        continue;
      }
      if (s.kind != first->kind || s.arg_types != first->arg_types ||
          s.return_type != first->return_type)
        throw Error("lexicon cluster " + cluster_label(static_cast<Cluster>(c)) +
                    " mixes token signatures ('" + first->name + "' vs '" + s.name +
                    "'); substitution would break typing");
    }
  }
}

Lexicon Lexicon::from_entries(std::vector<LexiconEntry> named, bool add_generic_numerals) {
  const auto& inv = TokenInventory::instance();
  Lexicon lex;
  lex.entries_ = std::move(named);
  if (add_generic_numerals) {
    auto have = [&](const std::string& tok) {
      return std::any_of(lex.entries_.begin(), lex.entries_.end(),
                         [&](const LexiconEntry& e) { return e.utterance_token == tok; });
    };
    for (int n = 1; n <= 9; ++n) {
      const std::string digit = std::to_string(n);
      if (!have(digit))
        lex.entries_.push_back(LexiconEntry{Cluster::Num, digit, inv.numeral(n), true});
      if (!have(kNumberWords[n - 1]))
        lex.entries_.push_back(
            LexiconEntry{Cluster::Num, kNumberWords[n - 1], inv.numeral(n), true});
    }
  }
  lex.index();
  lex.check_signature_homogeneity();
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  const auto& inv = TokenInventory::instance();
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon: " + path);
  std::vector<LexiconEntry> named;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cluster_s, utt, prog;
    if (!std::getline(ls, cluster_s, '\t') || !std::getline(ls, utt, '\t') ||
        !std::getline(ls, prog))
      throw Error("lexicon line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    const auto cluster = cluster_from_label(cluster_s);
    if (!cluster)
      throw Error("lexicon line " + std::to_string(line_no) + ": unknown cluster '" + cluster_s +
                  "'");
    named.push_back(LexiconEntry{*cluster, utt, inv.id(prog), false});
  }

  Lexicon lex = from_entries(std::move(named), /*add_generic_numerals=*/true);

  // shipped-lexicon contract: the named per-cluster counts of the abstraction
  static constexpr std::array<int, kNumClusters> kExpected = {3, 3, 4, 2, 5, 2, 6};
  int total = 0;
  for (int c = 0; c < kNumClusters; ++c) {
    const int n = lex.named_count(static_cast<Cluster>(c));
    total += n;
    const bool ok = (static_cast<Cluster>(c) == Cluster::Num) ? n >= kExpected[c]
                                                              : n == kExpected[c];
    if (!ok)
      throw Error("lexicon " + path + ": cluster " + cluster_label(static_cast<Cluster>(c)) +
                  " has " + std::to_string(n) + " named entries, expected " +
                  std::to_string(kExpected[c]));
  }
  if (total != 25)
    throw Error("lexicon " + path + ": expected 25 named mappings, found " +
                std::to_string(total));
  return lex;
}

const LexiconEntry* Lexicon::find_utterance(std::string_view token) const {
  auto it = by_utterance_.find(token);
  if (it == by_utterance_.end()) return nullptr;
  return &entries_[it->second];
}

std::vector<const LexiconEntry*> Lexicon::cluster_entries(Cluster c) const {
  std::vector<const LexiconEntry*> out;
  for (const auto& e : entries_)
    if (e.cluster == c) out.push_back(&e);
  return out;
}

std::vector<const LexiconEntry*> Lexicon::entries_for_program_token(TokenId t) const {
  std::vector<const LexiconEntry*> out;
  for (const auto& e : entries_)
    if (e.program_token == t) out.push_back(&e);
  return out;
}

int Lexicon::named_count(Cluster c) const {
  int n = 0;
  for (const auto& e : entries_)
    if (e.cluster == c && !e.generic) ++n;
  return n;
}

// -- abstraction -------------------------------------------------------------

std::string AbstractUtterance::key() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string AbstractProgram::tokens_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string AbstractProgram::alignment_text() const {
  if (alignment.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < alignment.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(i) + ":" + std::to_string(alignment[i]);
  }
  return out;
}

AbstractUtterance abstract_utterance(const std::vector<std::string>& x, const Lexicon& lex) {
  AbstractUtterance out;
  std::size_t i = 0;
  while (i < x.size()) {
    const LexiconEntry* entry = nullptr;
    int matched_len = 0;
    const int max_len =
        std::min<std::size_t>(lex.max_phrase_len(), x.size() - i);
    for (int len = max_len; len >= 1; --len) {
      std::string phrase = x[i];
      for (int k = 1; k < len; ++k) phrase += ' ' + x[i + k];
      if (const LexiconEntry* e = lex.find_utterance(phrase)) {
        entry = e;
        matched_len = len;
        break;
      }
    }
    if (entry) {
      std::string phrase = x[i];
      for (int k = 1; k < matched_len; ++k) phrase += ' ' + x[i + k];
      out.slots.push_back(
          AbstractSlot{static_cast<int>(out.tokens.size()), entry->cluster, phrase});
      out.tokens.push_back(cluster_label(entry->cluster));
      i += matched_len;
    } else {
      out.tokens.push_back(x[i]);
      ++i;
    }
  }
  return out;
}

AbstractProgram abstract_program(const std::vector<std::string>& x, const Program& z,
                                 const Lexicon& lex) {
  return abstract_program(abstract_utterance(x, lex), z, lex);
}

AbstractProgram abstract_program(const AbstractUtterance& xbar, const Program& z,
                                 const Lexicon& lex) {
  const auto& inv = TokenInventory::instance();
  AbstractProgram out;
  std::vector<char> used(xbar.slots.size(), 0);
  for (TokenId t : z.tokens) {
    int match = -1;
    for (std::size_t j = 0; j < xbar.slots.size(); ++j) {
      if (used[j]) continue;
      const LexiconEntry* e = lex.find_utterance(xbar.slots[j].original);
      if (e && e->program_token == t) {
        match = static_cast<int>(j);
        break;
      }
    }
    if (match >= 0) {
      used[match] = 1;
      out.slot_positions.push_back(static_cast<int>(out.tokens.size()));
      out.alignment.push_back(match);
      out.tokens.push_back(cluster_label(xbar.slots[match].cluster));
    } else {
      out.tokens.push_back(inv.sig(t).name);
    }
  }
  return out;
}

namespace {

TokenId slot_token(const AbstractProgram& zbar, const AbstractUtterance& xbar,
                   const Lexicon& lex, std::size_t slot) {
  const int j = zbar.alignment[slot];
  if (j < 0 || j >= static_cast<int>(xbar.slots.size()))
    throw DeabstractError("alignment refers to missing utterance slot " + std::to_string(j));
  const AbstractSlot& uslot = xbar.slots[j];
  const auto cluster =
      cluster_from_label(zbar.tokens[zbar.slot_positions[slot]]);
  if (!cluster || *cluster != uslot.cluster)
    throw DeabstractError("cluster mismatch between program slot and utterance slot");
  const LexiconEntry* e = lex.find_utterance(uslot.original);
  if (!e || e->cluster != uslot.cluster)
    throw DeabstractError("utterance token '" + uslot.original + "' has no lexicon mapping");
  return e->program_token;
}

}  // namespace

Program deabstract(const AbstractProgram& zbar, const AbstractUtterance& xbar,
                   const Lexicon& lex) {
  const auto& inv = TokenInventory::instance();
  Program z;
  z.tokens.reserve(zbar.tokens.size());
  std::size_t next_slot = 0;
  for (std::size_t p = 0; p < zbar.tokens.size(); ++p) {
    if (next_slot < zbar.slot_positions.size() &&
        zbar.slot_positions[next_slot] == static_cast<int>(p)) {
      z.tokens.push_back(slot_token(zbar, xbar, lex, next_slot));
      ++next_slot;
    } else {
      const auto id = inv.find(zbar.tokens[p]);
      if (!id) throw DeabstractError("unknown program token '" + zbar.tokens[p] + "'");
      z.tokens.push_back(*id);
    }
  }
  if (!well_typed(z))
    throw DeabstractError("de-abstracted program is not well-typed: " + z.text());
  return z;
}

std::vector<TokenId> deabstract_prefix(const AbstractProgram& zbar,
                                       const AbstractUtterance& xbar, const Lexicon& lex,
                                       int t) {
  const auto& inv = TokenInventory::instance();
  const std::size_t len = std::min<std::size_t>(std::max(t, 0), zbar.tokens.size());
  std::vector<TokenId> out;
  out.reserve(len);
  std::size_t next_slot = 0;
  for (std::size_t p = 0; p < len; ++p) {
    while (next_slot < zbar.slot_positions.size() &&
           zbar.slot_positions[next_slot] < static_cast<int>(p))
      ++next_slot;
    if (next_slot < zbar.slot_positions.size() &&
        zbar.slot_positions[next_slot] == static_cast<int>(p)) {
      out.push_back(slot_token(zbar, xbar, lex, next_slot));
      ++next_slot;
    } else {
      const auto id = inv.find(zbar.tokens[p]);
      if (!id) throw DeabstractError("unknown program token '" + zbar.tokens[p] + "'");
      out.push_back(*id);
    }
  }
  return out;
}

// -- serialization -----------------------------------------------------------

std::string serialize_abstract_pair(const AbstractPair& pair) {
  return pair.utterance.key() + "\n" + pair.program.tokens_text() + "\n" +
         pair.program.alignment_text() + "\n";
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

AbstractPair parse_abstract_pair(const std::string& utterance_line,
                                 const std::string& program_line,
                                 const std::string& alignment_line) {
  const auto& inv = TokenInventory::instance();
  AbstractPair pair;
  pair.utterance.tokens = split_ws(utterance_line);
  for (std::size_t i = 0; i < pair.utterance.tokens.size(); ++i)
    if (auto c = cluster_from_label(pair.utterance.tokens[i]))
      pair.utterance.slots.push_back(AbstractSlot{static_cast<int>(i), *c, ""});

  pair.program.tokens = split_ws(program_line);
  for (std::size_t i = 0; i < pair.program.tokens.size(); ++i) {
    const std::string& tok = pair.program.tokens[i];
    if (cluster_from_label(tok)) {
      pair.program.slot_positions.push_back(static_cast<int>(i));
    } else if (!inv.find(tok)) {
      throw Error("abstract program token '" + tok + "' is neither a cluster label nor a DSL token");
    }
  }

  pair.program.alignment.assign(pair.program.slot_positions.size(), -1);
  for (const std::string& pairs : split_ws(alignment_line)) {
    if (pairs == "-") continue;
    const auto colon = pairs.find(':');
    if (colon == std::string::npos)
      throw Error("malformed alignment entry '" + pairs + "' (want progSlot:uttSlot)");
    const int p = std::stoi(pairs.substr(0, colon));
    const int u = std::stoi(pairs.substr(colon + 1));
    if (p < 0 || p >= static_cast<int>(pair.program.alignment.size()))
      throw Error("alignment names program slot " + std::to_string(p) + " out of range");
    if (u < 0 || u >= static_cast<int>(pair.utterance.slots.size()))
      throw Error("alignment names utterance slot " + std::to_string(u) + " out of range");
    pair.program.alignment[p] = u;
  }
  for (std::size_t i = 0; i < pair.program.alignment.size(); ++i) {
    const int u = pair.program.alignment[i];
    if (u < 0)
      throw Error("program slot " + std::to_string(i) + " is unaligned");
    const auto pc = cluster_from_label(pair.program.tokens[pair.program.slot_positions[i]]);
    if (pair.utterance.slots[u].cluster != *pc)
      throw Error("program slot " + std::to_string(i) + " aligned across clusters");
  }
  return pair;
}

}  // namespace absparse
