#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "absparse/abstraction.hpp"
#include "absparse/neural.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// Type-constrained beam search plus the abstract-example cache: abstract
// programs that earned reward are retrieved by abstract utterance and
// injected back into decoding, both as per-step prefixes and as full
// programs unioned into the returned set.
// ---------------------------------------------------------------------------

struct CacheEntry {
  AbstractProgram program;
  long long reward_sum = 0;
  long long count = 0;

  double average() const { return count > 0 ? static_cast<double>(reward_sum) / count : 0.0; }
};

class Cache {
 public:
  // Appends or merges: entries are identified by abstract tokens + alignment.
  void update(const std::string& key, const AbstractProgram& zbar, int reward);

  // Top d entries by average reward; ties broken by higher count, then
  // insertion order. Missing key yields an empty list.
  std::vector<CacheEntry> top(const std::string& key, int d) const;

  const std::vector<CacheEntry>* find(const std::string& key) const;
  std::size_t key_count() const { return map_.size(); }
  std::size_t entry_count() const;

  void save(const std::string& path) const;
  static Cache load(const std::string& path);

  const std::map<std::string, std::vector<CacheEntry>>& contents() const { return map_; }

 private:
  std::map<std::string, std::vector<CacheEntry>> map_;
  // writes serialized; decode workers share reads
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

struct DecodeOptions {
  int beam_size = 40;
  int top_d = 10;
  int max_len = kMaxProgramLen;
  bool use_cache = true;            // false reproduces the -BeamCache ablation
  bool every_step_injection = true; // false reproduces -EveryStepBeamCache
};

struct ScoredProgram {
  Program program;
  double logprob = 0.0;  // log p'_theta(z | x)
  bool from_cache = false;
};

// Per-step beam snapshots (prefix tokens and scores), for tests and debugging.
struct DecodeTrace {
  std::vector<std::vector<std::pair<std::vector<TokenId>, double>>> beams;
};

// Algorithm: expand beam prefixes exhaustively over type-valid tokens, keep
// the top-|B| by cumulative masked log-probability; completed programs move
// to a finished pool. With a cache, de-abstracted prefixes of the top-D
// retrieved abstract programs are added after pruning each step, and the
// de-abstracted full programs are unioned into the returned set.
std::vector<ScoredProgram> beam_decode(const std::vector<std::string>& x_tokens,
                                       const Model& model, const Lexicon& lex,
                                       const Cache* cache, const DecodeOptions& opts,
                                       DecodeTrace* trace = nullptr);

// Abstracts each program against x and folds its reward into the cache.
void update_cache(Cache& cache, const std::vector<std::string>& x_tokens,
                  const std::vector<Program>& programs, const std::vector<int>& rewards,
                  const Lexicon& lex);

// Prefixes of length min(t, |zbar|), per retrieved abstract program.
std::vector<AbstractProgram> truncate_programs(const std::vector<AbstractProgram>& programs,
                                               int t);

}  // namespace absparse
