#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "absparse/lang.hpp"
#include "absparse/text.hpp"

namespace absparse {

// ---------------------------------------------------------------------------
// The parametric models: a Bi-LSTM encoder, a feed-forward attention decoder
// defining p_theta(z_t | x, z_{1:t-1}), the type-masked renormalized model,
// and the globally-normalized re-ranker s_psi. Gradients are hand-derived
// and validated against central finite differences.
// ---------------------------------------------------------------------------

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense id space over the decodable program tokens.
struct ProgVocab {
  std::vector<TokenId> tokens;  // dense index -> TokenId
  std::vector<int> dense;       // TokenId -> dense index, -1 if absent

  static ProgVocab full();
  static ProgVocab from_subset(const TokenSubset& subset);
  int size() const { return static_cast<int>(tokens.size()); }
  int dense_id(TokenId t) const { return dense[static_cast<std::size_t>(t)]; }
  TokenSubset subset() const;
};

struct ModelDims {
  int utt_vocab = 0;
  int prog_vocab = 0;
  int emb = 12;
  int lstm = 30;
  int hidden = 50;
  int history = 4;      // K
  int head_hidden = 50; // re-ranker scoring head

  int enc_state() const { return 2 * lstm; }
  int q_input() const { return enc_state() + utt_vocab + history * emb; }
  int out_input() const { return hidden + enc_state(); }
  bool operator==(const ModelDims&) const = default;
};

struct LstmParams {
  Mat Wx;  // 4L x emb
  Mat Wh;  // 4L x L
  Mat b;   // 4L x 1
};

struct ModelParams {
  ModelDims dims;
  Mat emb_x;    // utt_vocab x emb
  Mat emb_z;    // (prog_vocab + 1) x emb; the extra row is BOS
  LstmParams fwd, bwd;
  Mat W_q;      // hidden x q_input
  Mat W_alpha;  // hidden x enc_state
  Mat W_s;      // emb x out_input
  Mat head_W1;  // head_hidden x hidden
  Mat head_b1;  // head_hidden x 1
  Mat head_w2;  // head_hidden x 1
  Mat head_b2;  // 1 x 1

  static ModelParams init(const ModelDims& dims, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  int bos() const { return dims.prog_vocab; }
  // Stable name -> tensor view used by the optimizer, checkpoints, and
  // gradient checks.
  std::vector<std::pair<std::string, Mat*>> named_tensors();
  std::vector<std::pair<std::string, const Mat*>> named_tensors() const;
  void check_finite(const char* where) const;  // throws Error naming the tensor
};

struct EncoderOutput {
  Mat states;   // |x| x enc_state, row i = [h^F_i ; h^B_i]
  Vec summary;  // x_hat = [h^F_n ; h^B_1]
  Vec bow;      // v_hat, bag-of-words counts normalized by length
};

// Caches for backward passes.
struct LstmStepCache {
  Vec input, h_prev, c_prev;
  Vec gi, gf, go, gg, c, tanh_c;
};

struct EncCache {
  std::vector<int> x_ids;
  std::vector<LstmStepCache> fwd, bwd;
  EncoderOutput out;
};

struct StepCache {
  std::vector<int> history;  // K dense ids, oldest first, BOS-padded
  Vec u, pre_q, q;
  Vec att_scores, alpha, context, w;  // w = W_s [q; c]
  Vec logits;                         // over prog_vocab
};

// Gradients flowing back into the shared encoder output.
struct EncBackGrads {
  Mat d_states;
  Vec d_summary;
  void init(const EncoderOutput& out);
};

// -- forward -----------------------------------------------------------------

EncoderOutput encode(const std::vector<int>& x_ids, const ModelParams& p);
EncCache encode_cached(const std::vector<int>& x_ids, const ModelParams& p);

// History window [z_{t-K}, ..., z_{t-1}] as dense ids, BOS-padded on the left.
std::vector<int> history_window(const std::vector<int>& z_dense, std::size_t t, int K, int bos);

StepCache decode_step(const EncoderOutput& enc, const std::vector<int>& history,
                      const ModelParams& p);
Vec decode_dist(const EncoderOutput& enc, const std::vector<int>& history,
                const ModelParams& p);

// Zeroes tokens invalid for the stack and renormalizes; if every valid token
// has zero raw mass, falls back to uniform over the valid set and counts the
// occurrence in `underflow_guard_hits`.
Vec masked_dist(const Vec& dist, const TypeStack& stack, const ProgVocab& pv);
extern std::uint64_t underflow_guard_hits;

// Masked log-softmax over the valid candidates, directly from logits.
// Returns the log-probabilities of `candidates` (dense ids).
std::vector<double> masked_logprobs(const Vec& logits, const std::vector<int>& candidates);

// log p'_theta(z | x): sum of per-step masked log-probabilities. Throws on
// ill-typed programs or tokens outside the program vocabulary.
double sequence_logprob(const std::vector<int>& x_ids, const Program& z,
                        const ModelParams& p, const ProgVocab& pv);

// Re-ranker score s_psi(x, z): the decoder state after feeding the candidate
// program, passed through the scoring head.
double rerank_score(const std::vector<int>& x_ids, const Program& z, const ModelParams& psi,
                    const ProgVocab& pv);

// -- backward ----------------------------------------------------------------

// Accumulates d(loss)/d(params) for one decoder step given d(loss)/d(logits).
void decode_step_backward(const EncCache& enc, const StepCache& step, const Vec& d_logits,
                          const ModelParams& p, ModelParams& grads, EncBackGrads& enc_grads);

// BPTT through both LSTM directions; call once per utterance after all step
// gradients are accumulated.
void encoder_backward(const EncCache& enc, const ModelParams& p, const EncBackGrads& enc_grads,
                      ModelParams& grads);

// Weighted teacher-forced negative log-likelihood of programs; adds
// weight_i * (-log p'(z_i|x)) to the loss and its gradient to `grads`.
double weighted_nll_backward(const std::vector<int>& x_ids,
                             const std::vector<const Program*>& programs,
                             const std::vector<double>& weights, const ModelParams& p,
                             const ProgVocab& pv, ModelParams& grads);

// Re-ranker objective for one beam: -log(sum_z softmax(s_psi)_z * reward_z).
// Returns the loss and accumulates gradients; skips (returns 0) when no
// program is rewarded.
double rerank_loss_backward(const std::vector<int>& x_ids,
                            const std::vector<const Program*>& beam,
                            const std::vector<int>& rewards, const ModelParams& psi,
                            const ProgVocab& pv, ModelParams& grads);

double rerank_score_backward(const std::vector<int>& x_ids, const Program& z,
                             const ModelParams& psi, const ProgVocab& pv, double d_score,
                             ModelParams& grads);

// -- optimization ------------------------------------------------------------

class Adam {
 public:
  Adam(const ModelParams& params, double lr);
  void step(ModelParams& params, ModelParams& grads);  // consumes grads (zeroed after)

 private:
  double lr_, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long step_count_ = 0;
  std::vector<Mat> m_, v_;
};

// CBOW pretraining of utterance embeddings (window 2, full softmax).
Mat cbow_embeddings(const std::vector<std::vector<int>>& sentences, int vocab, int dim,
                    int window = 2, int epochs = 15, double lr = 0.05,
                    std::uint64_t seed = 1);

// -- model bundle ------------------------------------------------------------

// Parameters plus the vocabularies they are bound to; the unit stored in
// checkpoint files. The preprocessing vocabulary travels with the model so
// a checkpoint is usable on raw utterances by itself.
struct Model {
  Vocab vocab;
  TokenIndex utt_index;
  ProgVocab prog_vocab;
  ModelParams params;

  std::vector<std::string> preprocess_raw(const std::string& raw) const {
    return preprocess(raw, vocab);
  }

  std::vector<int> encode_utterance(const std::vector<std::string>& tokens) const;
  void save(const std::string& path) const;
  static Model load(const std::string& path);
};

}  // namespace absparse
