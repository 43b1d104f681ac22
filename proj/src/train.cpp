#include "absparse/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace absparse {

DecodeOptions TrainConfig::decode_options() const {
  DecodeOptions opts;
  opts.beam_size = beam_size;
  opts.top_d = top_d;
  opts.max_len = max_len;
  opts.use_cache = !no_cache;
  opts.every_step_injection = !cache_final_only;
  return opts;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config " + path + " line " + std::to_string(line_no) + ": want key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    auto as_int = [&] { return std::stoi(val); };
    auto as_bool = [&] { return val == "1" || val == "true" || val == "yes"; };
    if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "beam_size") cfg.beam_size = as_int();
    else if (key == "top_d") cfg.top_d = as_int();
    else if (key == "beta") cfg.beta = std::stod(val);
    else if (key == "history") cfg.history = as_int();
    else if (key == "emb") cfg.emb = as_int();
    else if (key == "lstm") cfg.lstm = as_int();
    else if (key == "hidden") cfg.hidden = as_int();
    else if (key == "head_hidden") cfg.head_hidden = as_int();
    else if (key == "epochs") cfg.epochs = as_int();
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "max_len") cfg.max_len = as_int();
    else if (key == "min_count") cfg.min_count = as_int();
    else if (key == "patience") cfg.patience = as_int();
    else if (key == "one_example_reward") cfg.one_example_reward = as_bool();
    else if (key == "no_cache") cfg.no_cache = as_bool();
    else if (key == "cache_final_only") cfg.cache_final_only = as_bool();
    else if (key == "no_warmstart") cfg.no_warmstart = as_bool();
    else if (key == "use_cbow") cfg.use_cbow = as_bool();
    else throw Error("config " + path + ": unknown key '" + key + "'");
  }
  if (cfg.beta < 0.0 || cfg.beta > 1.0) throw Error("config: beta must be in [0,1]");
  return cfg;
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config: " + path);
  out << "lr=" << lr << "\nbatch_size=" << batch_size << "\nbeam_size=" << beam_size
      << "\ntop_d=" << top_d << "\nbeta=" << beta << "\nhistory=" << history
      << "\nemb=" << emb << "\nlstm=" << lstm << "\nhidden=" << hidden
      << "\nhead_hidden=" << head_hidden << "\nepochs=" << epochs << "\nseed=" << seed
      << "\nmax_len=" << max_len << "\nmin_count=" << min_count << "\npatience=" << patience
      << "\none_example_reward=" << (one_example_reward ? 1 : 0)
      << "\nno_cache=" << (no_cache ? 1 : 0)
      << "\ncache_final_only=" << (cache_final_only ? 1 : 0)
      << "\nno_warmstart=" << (no_warmstart ? 1 : 0) << "\nuse_cbow=" << (use_cbow ? 1 : 0)
      << "\n";
}

// -- rewards -------------------------------------------------------------------

bool reward_denotations(const std::vector<bool>& denotations,
                        const std::vector<bool>& labels) {
  if (denotations.size() != labels.size())
    throw Error("reward_denotations: size mismatch");
  for (std::size_t i = 0; i < denotations.size(); ++i)
    if (denotations[i] != labels[i]) return false;
  return true;
}

int tied_reward(const Program& z, const ExampleGroup& group) {
  std::vector<bool> denots, labels;
  denots.reserve(group.pairs.size());
  labels.reserve(group.pairs.size());
  for (const auto& [kb, label] : group.pairs) {
    denots.push_back(execute(z, kb));
    labels.push_back(label);
  }
  return reward_denotations(denots, labels) ? 1 : 0;
}

std::vector<int> per_example_rewards(const Program& z, const ExampleGroup& group) {
  std::vector<int> out;
  out.reserve(group.pairs.size());
  for (const auto& [kb, label] : group.pairs)
    out.push_back(execute(z, kb) == label ? 1 : 0);
  return out;
}

std::vector<double> meritocratic_weights(const std::vector<double>& logprobs,
                                         const std::vector<int>& rewards, double beta) {
  std::vector<double> w(logprobs.size(), 0.0);
  double max_l = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logprobs.size(); ++i)
    if (rewards[i]) max_l = std::max(max_l, beta * logprobs[i]);
  if (!std::isfinite(max_l)) return w;  // nothing rewarded
  double sum = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    if (!rewards[i]) continue;
    w[i] = std::exp(beta * logprobs[i] - max_l);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// -- model assembly ----------------------------------------------------------------

Model build_model(const Vocab& vocab, const ProgVocab& prog_vocab, const TrainConfig& cfg,
                  const std::vector<std::vector<std::string>>* cbow_sentences) {
  Model model;
  model.vocab = vocab;
  model.utt_index = TokenIndex::build(vocab);
  model.prog_vocab = prog_vocab;
  ModelDims dims;
  dims.utt_vocab = model.utt_index.size();
  dims.prog_vocab = prog_vocab.size();
  dims.emb = cfg.emb;
  dims.lstm = cfg.lstm;
  dims.hidden = cfg.hidden;
  dims.history = cfg.history;
  dims.head_hidden = cfg.head_hidden;
  model.params = ModelParams::init(dims, cfg.seed);
  if (cfg.use_cbow && cbow_sentences && !cbow_sentences->empty()) {
    std::vector<std::vector<int>> id_sentences;
    id_sentences.reserve(cbow_sentences->size());
    for (const auto& sent : *cbow_sentences)
      id_sentences.push_back(model.utt_index.encode(sent));
    model.params.emb_x =
        cbow_embeddings(id_sentences, dims.utt_vocab, dims.emb, 2, 15, 0.05, cfg.seed);
  }
  return model;
}

Program greedy_decode(const Model& model, const std::vector<std::string>& x_tokens,
                      int max_len) {
  const TokenSubset subset = model.prog_vocab.subset();
  const CompletionCostTable costs = CompletionCostTable::compute(subset);

  const std::vector<int> x_ids = model.encode_utterance(x_tokens);
  const EncoderOutput enc = encode(x_ids, model.params);
  TypeStack stack;
  Program z;
  std::vector<int> dense;
  while (!stack.complete()) {
    const StepCache step = decode_step(
        enc, history_window(dense, dense.size(), model.params.dims.history,
                            model.params.bos()),
        model.params);
    TokenId best = -1;
    int best_dense = -1;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (TokenId t : stack.valid_next(subset)) {
      TypeStack after = stack;
      after.push_token(t);
      if (static_cast<int>(z.tokens.size()) + 1 + costs.stack_cost(after) > max_len) continue;
      const int j = model.prog_vocab.dense_id(t);
      if (step.logits[j] > best_logit) {
        best_logit = step.logits[j];
        best = t;
        best_dense = j;
      }
    }
    if (best < 0) throw Error("greedy decode has no budget-feasible token");
    stack.push_token(best);
    z.tokens.push_back(best);
    dense.push_back(best_dense);
  }
  return z;
}

// -- supervised -----------------------------------------------------------------

SupervisedStats train_supervised(Model& model, const std::vector<GeneratedPair>& train,
                                 const std::vector<GeneratedPair>& val,
                                 const TrainConfig& cfg, std::ostream* log) {
  if (train.empty()) throw Error("train_supervised: empty training set");
  ModelParams& p = model.params;
  ModelParams grads = ModelParams::zeros_like(p);
  Adam adam(p, cfg.lr);
  std::mt19937_64 rng(cfg.seed ^ 0x5e9d0c0deULL);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  SupervisedStats stats;
  ModelParams best = p;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int in_batch = 0;
    for (std::size_t i : order) {
      const GeneratedPair& ex = train[i];
      const std::vector<int> x_ids = model.encode_utterance(ex.utterance);
      const double loss = weighted_nll_backward(x_ids, {&ex.program}, {1.0}, p,
                                                model.prog_vocab, grads);
      if (!std::isfinite(loss))
        throw Error("supervised training diverged: non-finite loss at epoch " +
                    std::to_string(epoch));
      epoch_loss += loss;
      if (++in_batch == cfg.batch_size) {
        adam.step(p, grads);
        in_batch = 0;
      }
    }
    if (in_batch > 0) adam.step(p, grads);
    epoch_loss /= static_cast<double>(train.size());

    double val_exact = 0.0;
    if (!val.empty()) {
      int hits = 0;
      for (const GeneratedPair& ex : val)
        if (greedy_decode(model, ex.utterance, cfg.max_len) == ex.program) ++hits;
      val_exact = static_cast<double>(hits) / static_cast<double>(val.size());
    }
    if (log)
      *log << "sup epoch " << epoch << " loss " << epoch_loss << " val_exact " << val_exact
           << "\n";
    stats.final_train_loss = epoch_loss;
    if (val.empty() || val_exact >= stats.best_val_exact) {
      stats.best_val_exact = val_exact;
      stats.best_epoch = epoch;
      best = p;
    }
  }
  p = best;
  return stats;
}

// -- weak supervision -------------------------------------------------------------

namespace {

struct GroupDecodeOutcome {
  std::vector<ScoredProgram> programs;
  std::vector<int> tied;  // tied reward per program
};

GroupDecodeOutcome decode_and_reward(const Model& model, const ExampleGroup& group,
                                     const Lexicon& lex, const Cache* cache,
                                     const DecodeOptions& opts) {
  GroupDecodeOutcome out;
  out.programs = beam_decode(group.utterance, model, lex, cache, opts);
  out.tied.reserve(out.programs.size());
  for (const ScoredProgram& sp : out.programs)
    out.tied.push_back(tied_reward(sp.program, group));
  return out;
}

}  // namespace

RuleParseResult neural_parse(const Model& model, const Model* rerank_model,
                             const std::vector<std::string>& x_tokens, const Lexicon& lex,
                             const Cache* cache, const DecodeOptions& opts) {
  const std::vector<ScoredProgram> beam = beam_decode(x_tokens, model, lex, cache, opts);
  if (beam.empty()) return {};
  if (!rerank_model) return RuleParseResult{beam.front().program};

  // final ranking score: p'_theta(z|x) * p^g_psi(z|x), in log space
  const std::vector<int> x_ids = rerank_model->encode_utterance(x_tokens);
  Vec scores(beam.size());
  for (std::size_t i = 0; i < beam.size(); ++i)
    scores[i] = rerank_score(x_ids, beam[i].program, rerank_model->params,
                             rerank_model->prog_vocab);
  const double mx = scores.maxCoeff();
  const double lse = mx + std::log((scores.array() - mx).exp().sum());
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < beam.size(); ++i) {
    const double combined = beam[i].logprob + (scores[i] - lse);
    if (combined > best_score) {
      best_score = combined;
      best = i;
    }
  }
  return RuleParseResult{beam[best].program};
}

double top1_tied_reward(const Model& model, const std::vector<ExampleGroup>& groups,
                        const Lexicon& lex, const Cache* cache, const DecodeOptions& opts) {
  if (groups.empty()) return 0.0;
  int hits = 0;
  for (const ExampleGroup& g : groups) {
    const auto beam = beam_decode(g.utterance, model, lex, cache, opts);
    if (!beam.empty() && tied_reward(beam.front().program, g) == 1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(groups.size());
}

WeakStats train_weak(Model& model, const std::vector<ExampleGroup>& groups,
                     const TrainConfig& cfg, Cache& cache, const Lexicon& lex,
                     const std::vector<ExampleGroup>* dev, std::ostream* log) {
  ModelParams& p = model.params;
  ModelParams grads = ModelParams::zeros_like(p);
  Adam adam(p, cfg.lr);
  std::mt19937_64 rng(cfg.seed ^ 0xbea7cac4eULL);
  const DecodeOptions opts = cfg.decode_options();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].tied_eligible() || cfg.one_example_reward) order.push_back(i);
  if (order.empty()) throw Error("train_weak: no eligible utterance groups");

  WeakStats stats;
  double best_dev_consistency = -1.0;
  int epochs_since_best = 0;
  ModelParams best = p;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    int in_batch = 0;
    long long rewarded_groups = 0;
    double epoch_loss = 0.0;
    for (std::size_t gi : order) {
      const ExampleGroup& group = groups[gi];
      const GroupDecodeOutcome outcome =
          decode_and_reward(model, group, lex, cfg.no_cache ? nullptr : &cache, opts);
      if (outcome.programs.empty()) continue;

      std::vector<const Program*> progs;
      std::vector<double> logprobs;
      progs.reserve(outcome.programs.size());
      for (const ScoredProgram& sp : outcome.programs) {
        progs.push_back(&sp.program);
        logprobs.push_back(sp.logprob);
      }

      std::vector<double> weights;
      if (!cfg.one_example_reward) {
        weights = meritocratic_weights(logprobs, outcome.tied, cfg.beta);
      } else {
        // per-pair rewards, averaged over the group's KBs
        weights.assign(progs.size(), 0.0);
        const std::size_t n_pairs = group.pairs.size();
        std::vector<std::vector<int>> rewards_by_pair(n_pairs,
                                                      std::vector<int>(progs.size(), 0));
        for (std::size_t zi = 0; zi < progs.size(); ++zi) {
          const auto rs = per_example_rewards(*progs[zi], group);
          for (std::size_t j = 0; j < n_pairs; ++j) rewards_by_pair[j][zi] = rs[j];
        }
        for (std::size_t j = 0; j < n_pairs; ++j) {
          const auto w = meritocratic_weights(logprobs, rewards_by_pair[j], cfg.beta);
          for (std::size_t zi = 0; zi < progs.size(); ++zi)
            weights[zi] += w[zi] / static_cast<double>(n_pairs);
        }
      }

      // cache updates happen after reward computation, before the next decode
      if (!cfg.no_cache) {
        std::vector<Program> zs;
        zs.reserve(outcome.programs.size());
        for (const ScoredProgram& sp : outcome.programs) zs.push_back(sp.program);
        if (!cfg.one_example_reward) {
          update_cache(cache, group.utterance, zs, outcome.tied, lex);
        } else {
          for (std::size_t j = 0; j < group.pairs.size(); ++j) {
            std::vector<int> rewards;
            rewards.reserve(zs.size());
            for (const Program& z : zs)
              rewards.push_back(execute(z, group.pairs[j].first) == group.pairs[j].second ? 1
                                                                                          : 0);
            update_cache(cache, group.utterance, zs, rewards, lex);
          }
        }
      }

      double wsum = 0.0;
      for (double w : weights) wsum += w;
      if (wsum <= 0.0) continue;  // no rewarded program: zero-gradient skip
      ++rewarded_groups;

      const std::vector<int> x_ids = model.encode_utterance(group.utterance);
      const double loss =
          weighted_nll_backward(x_ids, progs, weights, p, model.prog_vocab, grads);
      if (!std::isfinite(loss))
        throw Error("weak training diverged: non-finite loss at epoch " +
                    std::to_string(epoch));
      epoch_loss += loss;
      if (++in_batch == cfg.batch_size) {
        adam.step(p, grads);
        in_batch = 0;
      }
    }
    if (in_batch > 0) adam.step(p, grads);

    stats.epochs_run = epoch;
    const double hit_rate =
        static_cast<double>(rewarded_groups) / static_cast<double>(order.size());
    if (dev && !dev->empty()) {
      DecodeOptions dev_opts = opts;
      dev_opts.use_cache = false;  // measure the model itself
      Metrics m = evaluate(
          [&](const ExampleGroup& g) {
            return neural_parse(model, nullptr, g.utterance, lex, nullptr, dev_opts);
          },
          *dev);
      stats.dev_accuracy = m.accuracy;
      stats.dev_consistency = m.consistency;
      if (log)
        *log << "weak epoch " << epoch << " loss " << epoch_loss << " reward_hit " << hit_rate
             << " dev_acc " << m.accuracy << " dev_con " << m.consistency << " cache_keys "
             << cache.key_count() << "\n";
      if (m.consistency > best_dev_consistency) {
        best_dev_consistency = m.consistency;
        best = p;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= cfg.patience) {
        if (log) *log << "weak early stop at epoch " << epoch << "\n";
        break;
      }
    } else if (log) {
      *log << "weak epoch " << epoch << " loss " << epoch_loss << " reward_hit " << hit_rate
           << " cache_keys " << cache.key_count() << "\n";
    }
  }
  if (dev && !dev->empty() && best_dev_consistency >= 0.0) p = best;

  DecodeOptions final_opts = opts;
  stats.final_top1_tied = top1_tied_reward(model, groups, lex,
                                           cfg.no_cache ? nullptr : &cache, final_opts);
  return stats;
}

void train_rerank(Model& rerank_model, const Model& theta,
                  const std::vector<ExampleGroup>& groups, const TrainConfig& cfg,
                  const Cache* cache, const Lexicon& lex, std::ostream* log) {
  ModelParams& psi = rerank_model.params;
  ModelParams grads = ModelParams::zeros_like(psi);
  Adam adam(psi, cfg.lr);
  std::mt19937_64 rng(cfg.seed ^ 0x4e4a11bULL);
  const DecodeOptions opts = cfg.decode_options();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].tied_eligible() || cfg.one_example_reward) order.push_back(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int in_batch = 0;
    for (std::size_t gi : order) {
      const ExampleGroup& group = groups[gi];
      const GroupDecodeOutcome outcome = decode_and_reward(theta, group, lex, cache, opts);
      if (outcome.programs.empty()) continue;
      std::vector<const Program*> progs;
      for (const ScoredProgram& sp : outcome.programs) progs.push_back(&sp.program);
      const std::vector<int> x_ids = rerank_model.encode_utterance(group.utterance);
      const double loss = rerank_loss_backward(x_ids, progs, outcome.tied, psi,
                                               rerank_model.prog_vocab, grads);
      epoch_loss += loss;
      if (++in_batch == cfg.batch_size) {
        adam.step(psi, grads);
        in_batch = 0;
      }
    }
    if (in_batch > 0) adam.step(psi, grads);
    if (log) *log << "rerank epoch " << epoch << " loss " << epoch_loss << "\n";
  }
}

}  // namespace absparse
