#include "absparse/search.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace absparse {

// -- cache ---------------------------------------------------------------------

void Cache::update(const std::string& key, const AbstractProgram& zbar, int reward) {
  std::lock_guard<std::mutex> lock(*mutex_);
  auto& entries = map_[key];
  for (CacheEntry& e : entries) {
    if (e.program == zbar) {
      e.reward_sum += reward;
      e.count += 1;
      return;
    }
  }
  entries.push_back(CacheEntry{zbar, reward, 1});
}

const std::vector<CacheEntry>* Cache::find(const std::string& key) const {
  auto it = map_.find(key);
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<CacheEntry> Cache::top(const std::string& key, int d) const {
  const auto* entries = find(key);
  if (!entries || d <= 0) return {};
  std::vector<std::size_t> order(entries->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const CacheEntry& ea = (*entries)[a];
    const CacheEntry& eb = (*entries)[b];
    if (ea.average() != eb.average()) return ea.average() > eb.average();
    return ea.count > eb.count;  // stable sort keeps insertion order on full ties
  });
  std::vector<CacheEntry> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < d; ++i)
    out.push_back((*entries)[order[i]]);
  return out;
}

std::size_t Cache::entry_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : map_) n += v.size();
  return n;
}

void Cache::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write cache: " + path);
  for (const auto& [key, entries] : map_) {
    out << "key " << key << "\n";
    for (const CacheEntry& e : entries) {
      out << "  " << e.reward_sum << " " << e.count << " | " << e.program.tokens_text()
          << " | " << e.program.alignment_text() << "\n";
    }
  }
}

Cache Cache::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cache: " + path);
  Cache cache;
  std::string line, key;
  while (std::getline(in, line)) {
    if (line.rfind("key ", 0) == 0) {
      key = line.substr(4);
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    long long reward_sum = 0, count = 0;
    std::string sep;
    ls >> reward_sum >> count >> sep;
    if (sep != "|") throw Error("cache " + path + ": malformed entry line: " + line);
    std::string rest;
    std::getline(ls, rest);
    const auto bar = rest.find(" | ");
    if (bar == std::string::npos) throw Error("cache " + path + ": missing alignment: " + line);
    AbstractPair pair = parse_abstract_pair(key, rest.substr(0, bar), rest.substr(bar + 3));
    auto& entries = cache.map_[key];
    entries.push_back(CacheEntry{pair.program, reward_sum, count});
  }
  return cache;
}

// -- beam search -----------------------------------------------------------------

namespace {

struct BeamEntry {
  std::vector<TokenId> tokens;
  std::vector<int> dense;  // same tokens as dense model ids
  TypeStack stack;
  double score = 0.0;
  bool from_cache = false;
};

bool entry_order(const BeamEntry& a, const BeamEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

// A cached abstract program being injected step by step.
struct Injection {
  std::vector<TokenId> tokens;  // full de-abstracted program
  BeamEntry prefix;             // grown one token per step, re-scored by the model
  bool alive = true;
};

}  // namespace

std::vector<AbstractProgram> truncate_programs(const std::vector<AbstractProgram>& programs,
                                               int t) {
  std::vector<AbstractProgram> out;
  out.reserve(programs.size());
  for (const AbstractProgram& p : programs) {
    AbstractProgram prefix;
    const std::size_t len = std::min<std::size_t>(std::max(t, 0), p.tokens.size());
    prefix.tokens.assign(p.tokens.begin(), p.tokens.begin() + len);
    for (std::size_t s = 0; s < p.slot_positions.size(); ++s) {
      if (p.slot_positions[s] < static_cast<int>(len)) {
        prefix.slot_positions.push_back(p.slot_positions[s]);
        prefix.alignment.push_back(p.alignment[s]);
      }
    }
    out.push_back(std::move(prefix));
  }
  return out;
}

std::vector<ScoredProgram> beam_decode(const std::vector<std::string>& x_tokens,
                                       const Model& model, const Lexicon& lex,
                                       const Cache* cache, const DecodeOptions& opts,
                                       DecodeTrace* trace) {
  const ModelParams& p = model.params;
  const ProgVocab& pv = model.prog_vocab;
  const std::vector<int> x_ids = model.encode_utterance(x_tokens);
  const EncoderOutput enc = encode(x_ids, p);

  const AbstractUtterance xbar = abstract_utterance(x_tokens, lex);
  std::vector<AbstractProgram> retrieved;
  if (cache && opts.use_cache)
    for (const CacheEntry& e : cache->top(xbar.key(), opts.top_d))
      retrieved.push_back(e.program);

  // De-abstract retrieved programs up front; entries that fail to
  // de-abstract, exceed the vocabulary, or are ill-typed are skipped.
  std::vector<Injection> injections;
  for (const AbstractProgram& zbar : retrieved) {
    try {
      const Program z = deabstract(zbar, xbar, lex);
      bool in_vocab = true;
      for (TokenId t : z.tokens) in_vocab &= pv.dense_id(t) >= 0;
      if (!in_vocab || static_cast<int>(z.tokens.size()) > opts.max_len) continue;
      Injection inj;
      inj.tokens = z.tokens;
      injections.push_back(std::move(inj));
    } catch (const DeabstractError&) {
      continue;
    }
  }

  std::map<std::vector<TokenId>, ScoredProgram> finished;
  auto finish = [&](const BeamEntry& e) {
    auto it = finished.find(e.tokens);
    if (it == finished.end())
      finished.emplace(e.tokens, ScoredProgram{Program{e.tokens}, e.score, e.from_cache});
  };

  std::vector<BeamEntry> beam;
  beam.push_back(BeamEntry{});  // empty prefix, stack [Bool]

  auto step_logprobs = [&](const BeamEntry& e) {
    const StepCache step = decode_step(
        enc, history_window(e.dense, e.dense.size(), p.dims.history, p.bos()), p);
    std::vector<int> valid;
    std::vector<TokenId> valid_tok;
    for (TokenId t : e.stack.valid_next()) {
      const int j = pv.dense_id(t);
      if (j >= 0) {
        valid.push_back(j);
        valid_tok.push_back(t);
      }
    }
    return std::make_tuple(masked_logprobs(step.logits, valid), valid, valid_tok);
  };

  for (int t = 1; t <= opts.max_len; ++t) {
    // exhaustive expansion of the active beam
    std::vector<BeamEntry> children;
    for (const BeamEntry& e : beam) {
      const auto [logps, valid, valid_tok] = step_logprobs(e);
      for (std::size_t vi = 0; vi < valid.size(); ++vi) {
        BeamEntry child = e;
        child.tokens.push_back(valid_tok[vi]);
        child.dense.push_back(valid[vi]);
        child.stack.push_token(valid_tok[vi]);
        child.score += logps[vi];
        if (child.stack.complete())
          finish(child);
        else
          children.push_back(std::move(child));
      }
    }
    std::sort(children.begin(), children.end(), entry_order);
    if (static_cast<int>(children.size()) > opts.beam_size)
      children.resize(opts.beam_size);
    beam = std::move(children);

    // cache prefix injection (added after pruning; never evicts)
    if (opts.every_step_injection) {
      for (Injection& inj : injections) {
        if (!inj.alive) continue;
        const std::size_t len = inj.prefix.tokens.size();
        if (len >= inj.tokens.size() || static_cast<int>(len) != t - 1) {
          // completed earlier or lagging behind (should not happen)
          if (len >= inj.tokens.size()) inj.alive = false;
          continue;
        }
        const TokenId next = inj.tokens[len];
        const auto [logps, valid, valid_tok] = step_logprobs(inj.prefix);
        const auto it = std::find(valid_tok.begin(), valid_tok.end(), next);
        if (it == valid_tok.end()) {
          inj.alive = false;  // prefix not expandable under the mask
          continue;
        }
        inj.prefix.tokens.push_back(next);
        inj.prefix.dense.push_back(pv.dense_id(next));
        inj.prefix.stack.push_token(next);
        inj.prefix.score += logps[static_cast<std::size_t>(it - valid_tok.begin())];
        inj.prefix.from_cache = true;
        if (inj.prefix.stack.complete()) {
          finish(inj.prefix);
          inj.alive = false;
          continue;
        }
        const bool already = std::any_of(beam.begin(), beam.end(), [&](const BeamEntry& b) {
          return b.tokens == inj.prefix.tokens;
        });
        if (!already) beam.push_back(inj.prefix);
      }
    }
    if (trace) {
      trace->beams.emplace_back();
      for (const BeamEntry& e : beam) trace->beams.back().emplace_back(e.tokens, e.score);
    }
    if (beam.empty()) break;
  }

  // B_T: the top-|B| completed programs found by the search
  std::vector<ScoredProgram> out;
  out.reserve(finished.size());
  for (auto& [toks, sp] : finished) out.push_back(std::move(sp));
  std::sort(out.begin(), out.end(), [](const ScoredProgram& a, const ScoredProgram& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.program.tokens < b.program.tokens;
  });
  if (static_cast<int>(out.size()) > opts.beam_size) out.resize(opts.beam_size);

  // ... unioned with de-abstract(A): the retrieved programs always return
  for (const Injection& inj : injections) {
    Program z{inj.tokens};
    const bool present = std::any_of(out.begin(), out.end(), [&](const ScoredProgram& sp) {
      return sp.program.tokens == z.tokens;
    });
    if (present) continue;
    try {
      const double lp = sequence_logprob(x_ids, z, p, pv);
      out.push_back(ScoredProgram{std::move(z), lp, true});
    } catch (const Error&) {
      continue;
    }
  }
  std::sort(out.begin(), out.end(), [](const ScoredProgram& a, const ScoredProgram& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.program.tokens < b.program.tokens;
  });
  return out;
}

void update_cache(Cache& cache, const std::vector<std::string>& x_tokens,
                  const std::vector<Program>& programs, const std::vector<int>& rewards,
                  const Lexicon& lex) {
  const AbstractUtterance xbar = abstract_utterance(x_tokens, lex);
  const std::string key = xbar.key();
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const AbstractProgram zbar = abstract_program(xbar, programs[i], lex);
    cache.update(key, zbar, rewards[i]);
  }
}

}  // namespace absparse
