#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "absparse/augment.hpp"
#include "absparse/metrics.hpp"
#include "absparse/search.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// Training: supervised maximum likelihood on augmented data, weak supervision
// with 4-KB tied rewards and meritocratic weighting, and re-ranker training.
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 8;
  int beam_size = 40;
  int top_d = 10;
  double beta = 0.5;  // meritocratic exponent
  int history = 4;    // K decoded tokens fed back
  int emb = 12;
  int lstm = 30;
  int hidden = 50;
  int head_hidden = 50;
  int epochs = 10;
  std::uint64_t seed = 1;
  int max_len = kMaxProgramLen;
  int min_count = 5;  // vocabulary threshold
  int patience = 5;   // early stopping on dev consistency
  bool one_example_reward = false;  // OneExampleReward ablation
  bool no_cache = false;            // -BeamCache ablation
  bool cache_final_only = false;    // -EveryStepBeamCache ablation
  bool no_warmstart = false;        // Randomer-style from-scratch start
  bool use_cbow = true;

  DecodeOptions decode_options() const;
  static TrainConfig load(const std::string& path);  // flat key=value lines
  void save(const std::string& path) const;
};

// -- rewards -------------------------------------------------------------------

// The tying rule on its own: 1 iff every denotation matches its label.
bool reward_denotations(const std::vector<bool>& denotations, const std::vector<bool>& labels);

// R(z, {(k_j, y_j)}) = 1 iff z executes to y_j on every k_j.
int tied_reward(const Program& z, const ExampleGroup& group);

// Per-pair rewards, one per (k_j, y_j); the OneExampleReward ablation.
std::vector<int> per_example_rewards(const Program& z, const ExampleGroup& group);

// w(z) proportional to p'(z|x)^beta * R(z), normalized over the candidate
// set; all-zero when nothing is rewarded. Computed in log space.
std::vector<double> meritocratic_weights(const std::vector<double>& logprobs,
                                         const std::vector<int>& rewards, double beta);

// -- model assembly --------------------------------------------------------------

Model build_model(const Vocab& vocab, const ProgVocab& prog_vocab, const TrainConfig& cfg,
                  const std::vector<std::vector<std::string>>* cbow_sentences = nullptr);

// Budgeted greedy decode under the type mask: always returns a complete
// program within max_len tokens.
Program greedy_decode(const Model& model, const std::vector<std::string>& x_tokens,
                      int max_len = kMaxProgramLen);

// -- training loops ---------------------------------------------------------------

struct SupervisedStats {
  double final_train_loss = 0.0;
  double best_val_exact = 0.0;
  int best_epoch = -1;
};

// Adam on the masked sequence NLL; keeps the best-validation parameters.
// Throws Error on divergence (non-finite loss).
SupervisedStats train_supervised(Model& model, const std::vector<GeneratedPair>& train,
                                 const std::vector<GeneratedPair>& val, const TrainConfig& cfg,
                                 std::ostream* log = nullptr);

struct WeakStats {
  double final_top1_tied = 0.0;
  double dev_accuracy = 0.0;
  double dev_consistency = 0.0;
  int epochs_run = 0;
};

// Weakly-supervised training: per group, beam-decode with the cache, compute
// tied rewards, take a meritocratic gradient step on rewarded programs, and
// update the cache. Groups ineligible for tying (size != 4) are skipped
// unless one_example_reward is set.
WeakStats train_weak(Model& model, const std::vector<ExampleGroup>& groups,
                     const TrainConfig& cfg, Cache& cache, const Lexicon& lex,
                     const std::vector<ExampleGroup>* dev = nullptr,
                     std::ostream* log = nullptr);

// Gradient ascent on the beam-normalized re-ranker objective; theta is fixed.
void train_rerank(Model& rerank_model, const Model& theta,
                  const std::vector<ExampleGroup>& groups, const TrainConfig& cfg,
                  const Cache* cache, const Lexicon& lex, std::ostream* log = nullptr);

// -- shared evaluation helpers -----------------------------------------------------

// Top-ranked program per group (model only, or combined with a re-ranker per
// the final ranking score p' * p^g). Empty beams fall back to TRUE.
RuleParseResult neural_parse(const Model& model, const Model* rerank_model,
                             const std::vector<std::string>& x_tokens, const Lexicon& lex,
                             const Cache* cache, const DecodeOptions& opts);

// Fraction of groups whose top-ranked program earns tied reward 1.
double top1_tied_reward(const Model& model, const std::vector<ExampleGroup>& groups,
                        const Lexicon& lex, const Cache* cache, const DecodeOptions& opts);

}  // namespace absparse
