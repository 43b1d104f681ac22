#include "absparse/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace absparse {

std::vector<std::string> tokenize(const std::string& raw) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < raw.size()) {
    // keep the UNK sentinel as-is
    if (raw.compare(i, 3, kUnkToken) == 0 &&
        (i + 3 == raw.size() || !std::isalnum(static_cast<unsigned char>(raw[i + 3])))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      out.push_back(kUnkToken);
      i += 3;
      continue;
    }
    const unsigned char c = static_cast<unsigned char>(raw[i]);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
    ++i;
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

namespace {

const std::set<std::string>& lemma_exceptions() {
  static const std::set<std::string> ex = {
      // -s endings that are not plurals
      "is", "as", "its", "this", "has", "was", "does", "goes", "yes", "less",
      "unless", "across", "plus", "us", "thus", "always",
      // -ing forms kept verbatim (annotation patterns use them)
      "touching", "nothing", "something", "anything", "ring", "king", "thing",
      // -ed forms that are lexical
      "red", "colored",
  };
  return ex;
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::string(suffix).size();
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

bool is_consonant(char c) { return c != 'a' && c != 'e' && c != 'i' && c != 'o' && c != 'u'; }

// "stacking" -> "stack", "sitting" -> "sitt" -> "sit"
std::string undouble(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 3 && stem[n - 1] == stem[n - 2] && is_consonant(stem[n - 1]) &&
      stem[n - 1] != 's' && stem[n - 1] != 'l')
    stem.pop_back();
  return stem;
}

}  // namespace

std::string lemmatize(const std::string& token) {
  if (token.size() <= 3 || lemma_exceptions().count(token)) return token;
  if (ends_with(token, "ies") && token.size() > 4)
    return token.substr(0, token.size() - 3) + "y";
  if (ends_with(token, "es")) {
    const std::string stem = token.substr(0, token.size() - 2);
    if (ends_with(stem, "x") || ends_with(stem, "ss") || ends_with(stem, "z") ||
        ends_with(stem, "ch") || ends_with(stem, "sh"))
      return stem;
  }
  if (ends_with(token, "s") && !ends_with(token, "ss") && !ends_with(token, "us") &&
      !ends_with(token, "is"))
    return token.substr(0, token.size() - 1);
  if (ends_with(token, "ing") && token.size() > 5)
    return undouble(token.substr(0, token.size() - 3));
  if (ends_with(token, "ed") && token.size() > 4)
    return undouble(token.substr(0, token.size() - 2));
  return token;
}

bool Vocab::frequent_raw(const std::string& tok) const {
  auto it = raw_counts.find(tok);
  return it != raw_counts.end() && it->second >= min_count;
}

bool Vocab::frequent_lemma(const std::string& tok) const {
  auto it = lemma_counts.find(tok);
  return it != lemma_counts.end() && it->second >= min_count;
}

Vocab build_vocab(const std::vector<std::string>& raw_utterances, int min_count) {
  Vocab v;
  v.min_count = min_count;
  for (const std::string& raw : raw_utterances) {
    for (const std::string& tok : tokenize(raw)) {
      v.raw_counts[tok] += 1;
      v.lemma_counts[lemmatize(tok)] += 1;
    }
  }
  return v;
}

namespace {

bool edit_distance_one(const std::string& a, const std::string& b) {
  const std::size_t la = a.size(), lb = b.size();
  if (la == lb) {
    int diff = 0;
    for (std::size_t i = 0; i < la; ++i)
      if (a[i] != b[i] && ++diff > 1) return false;
    return diff == 1;
  }
  const std::string& shorter = la < lb ? a : b;
  const std::string& longer = la < lb ? b : a;
  if (longer.size() - shorter.size() != 1) return false;
  std::size_t i = 0, j = 0;
  bool skipped = false;
  while (i < shorter.size()) {
    if (shorter[i] == longer[j]) {
      ++i;
      ++j;
    } else if (!skipped) {
      skipped = true;
      ++j;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string spell_correct(const std::string& token, const Vocab& vocab) {
  std::string best;
  int best_count = 0;
  for (const auto& [word, count] : vocab.raw_counts) {
    if (count < vocab.min_count) continue;
    if (!edit_distance_one(token, word)) continue;
    if (count > best_count || (count == best_count && word < best)) {
      best = word;
      best_count = count;
    }
  }
  return best;
}

std::vector<std::string> preprocess(const std::string& raw, const Vocab& vocab) {
  std::vector<std::string> out;
  for (std::string tok : tokenize(raw)) {
    if (tok == kUnkToken) {
      out.push_back(tok);
      continue;
    }
    if (!vocab.frequent_raw(tok)) {
      const std::string corrected = spell_correct(tok, vocab);
      if (!corrected.empty()) tok = corrected;
    }
    tok = lemmatize(tok);
    out.push_back(vocab.frequent_lemma(tok) ? tok : kUnkToken);
  }
  return out;
}

TokenIndex TokenIndex::build(const Vocab& vocab) {
  TokenIndex idx;
  for (const auto& [tok, count] : vocab.lemma_counts)
    if (count >= vocab.min_count && tok != kUnkToken)
      idx.tokens.push_back(tok);  // map order: sorted
  idx.tokens.push_back(kUnkToken);
  for (std::size_t i = 0; i < idx.tokens.size(); ++i)
    idx.ids.emplace(idx.tokens[i], static_cast<int>(i));
  idx.unk_id = static_cast<int>(idx.tokens.size()) - 1;
  return idx;
}

int TokenIndex::id(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? unk_id : it->second;
}

std::vector<int> TokenIndex::encode(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(id(t));
  return out;
}

}  // namespace absparse
