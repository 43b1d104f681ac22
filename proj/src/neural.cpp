#include "absparse/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace absparse {

std::uint64_t underflow_guard_hits = 0;

// -- vocabularies --------------------------------------------------------------

ProgVocab ProgVocab::full() {
  const auto& inv = TokenInventory::instance();
  ProgVocab pv;
  pv.dense.assign(inv.size(), -1);
  for (TokenId t = 0; t < inv.size(); ++t) {
    pv.dense[t] = static_cast<int>(pv.tokens.size());
    pv.tokens.push_back(t);
  }
  return pv;
}

ProgVocab ProgVocab::from_subset(const TokenSubset& subset) {
  const auto& inv = TokenInventory::instance();
  ProgVocab pv;
  pv.dense.assign(inv.size(), -1);
  for (TokenId t = 0; t < inv.size(); ++t) {
    if (!subset.contains(t)) continue;
    pv.dense[t] = static_cast<int>(pv.tokens.size());
    pv.tokens.push_back(t);
  }
  return pv;
}

TokenSubset ProgVocab::subset() const {
  TokenSubset s;
  s.member.assign(dense.size(), 0);
  for (TokenId t : tokens) s.member[t] = 1;
  return s;
}

// -- parameters ----------------------------------------------------------------

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p;
  p.dims = dims;
  const int L = dims.lstm;
  p.emb_x = Mat(dims.utt_vocab, dims.emb);
  p.emb_z = Mat(dims.prog_vocab + 1, dims.emb);
  for (LstmParams* lp : {&p.fwd, &p.bwd}) {
    lp->Wx = Mat(4 * L, dims.emb);
    lp->Wh = Mat(4 * L, L);
    lp->b = Mat(4 * L, 1);
  }
  p.W_q = Mat(dims.hidden, dims.q_input());
  p.W_alpha = Mat(dims.hidden, dims.enc_state());
  p.W_s = Mat(dims.emb, dims.out_input());
  p.head_W1 = Mat(dims.head_hidden, dims.hidden);
  p.head_b1 = Mat(dims.head_hidden, 1);
  p.head_w2 = Mat(dims.head_hidden, 1);
  p.head_b2 = Mat(1, 1);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  for (auto& [name, t] : p.named_tensors()) {
    (void)name;
    for (Eigen::Index c = 0; c < t->cols(); ++c)
      for (Eigen::Index r = 0; r < t->rows(); ++r) (*t)(r, c) = d(rng);
  }
  p.fwd.b.setZero();
  p.bwd.b.setZero();
  p.head_b1.setZero();
  p.head_b2.setZero();
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p = other;
  for (auto& [name, t] : p.named_tensors()) {
    (void)name;
    t->setZero();
  }
  return p;
}

std::vector<std::pair<std::string, Mat*>> ModelParams::named_tensors() {
  return {
      {"emb_x", &emb_x},       {"emb_z", &emb_z},       {"fwd.Wx", &fwd.Wx},
      {"fwd.Wh", &fwd.Wh},     {"fwd.b", &fwd.b},       {"bwd.Wx", &bwd.Wx},
      {"bwd.Wh", &bwd.Wh},     {"bwd.b", &bwd.b},       {"W_q", &W_q},
      {"W_alpha", &W_alpha},   {"W_s", &W_s},           {"head_W1", &head_W1},
      {"head_b1", &head_b1},   {"head_w2", &head_w2},   {"head_b2", &head_b2},
  };
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::named_tensors() const {
  auto mut = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Mat*>> out;
  out.reserve(mut.size());
  for (auto& [n, t] : mut) out.emplace_back(n, t);
  return out;
}

void ModelParams::check_finite(const char* where) const {
  for (const auto& [name, t] : named_tensors())
    if (!t->allFinite())
      throw Error(std::string(where) + ": non-finite values in tensor " + name);
}

// -- LSTM ----------------------------------------------------------------------

namespace {

Vec sigmoid(const Vec& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

LstmStepCache lstm_step(const LstmParams& lp, const Vec& input, const Vec& h_prev,
                        const Vec& c_prev, int L) {
  LstmStepCache s;
  s.input = input;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  const Vec pre = lp.Wx * input + lp.Wh * h_prev + lp.b.col(0);
  s.gi = sigmoid(pre.segment(0, L));
  s.gf = sigmoid(pre.segment(L, L));
  s.go = sigmoid(pre.segment(2 * L, L));
  s.gg = pre.segment(3 * L, L).array().tanh().matrix();
  s.c = (s.gf.array() * c_prev.array() + s.gi.array() * s.gg.array()).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  return s;
}

Vec lstm_h(const LstmStepCache& s) { return (s.go.array() * s.tanh_c.array()).matrix(); }

// BPTT over one direction; caches and d_h are in processing order.
void lstm_backward(const LstmParams& lp, const std::vector<LstmStepCache>& steps,
                   const std::vector<Vec>& d_h_ext, int L, LstmParams& grads,
                   std::vector<Vec>& d_inputs) {
  const int n = static_cast<int>(steps.size());
  d_inputs.assign(n, Vec());
  Vec dh_carry = Vec::Zero(L);
  Vec dc_carry = Vec::Zero(L);
  for (int j = n - 1; j >= 0; --j) {
    const LstmStepCache& s = steps[j];
    const Vec dh = d_h_ext[j] + dh_carry;
    const Vec dgo = (dh.array() * s.tanh_c.array()).matrix();
    const Vec dc =
        dc_carry + (dh.array() * s.go.array() * (1.0 - s.tanh_c.array().square())).matrix();
    const Vec dgi = (dc.array() * s.gg.array()).matrix();
    const Vec dgg = (dc.array() * s.gi.array()).matrix();
    const Vec dgf = (dc.array() * s.c_prev.array()).matrix();
    dc_carry = (dc.array() * s.gf.array()).matrix();

    Vec dpre(4 * L);
    dpre.segment(0, L) = (dgi.array() * s.gi.array() * (1.0 - s.gi.array())).matrix();
    dpre.segment(L, L) = (dgf.array() * s.gf.array() * (1.0 - s.gf.array())).matrix();
    dpre.segment(2 * L, L) = (dgo.array() * s.go.array() * (1.0 - s.go.array())).matrix();
    dpre.segment(3 * L, L) = (dgg.array() * (1.0 - s.gg.array().square())).matrix();

    grads.Wx += dpre * s.input.transpose();
    grads.Wh += dpre * s.h_prev.transpose();
    grads.b.col(0) += dpre;
    d_inputs[j] = lp.Wx.transpose() * dpre;
    dh_carry = lp.Wh.transpose() * dpre;
  }
}

}  // namespace

// -- encoder -------------------------------------------------------------------

EncCache encode_cached(const std::vector<int>& x_ids, const ModelParams& p) {
  if (x_ids.empty()) throw Error("cannot encode an empty utterance");
  const int n = static_cast<int>(x_ids.size());
  const int L = p.dims.lstm;
  EncCache cache;
  cache.x_ids = x_ids;

  Vec h = Vec::Zero(L), c = Vec::Zero(L);
  for (int i = 0; i < n; ++i) {
    LstmStepCache s = lstm_step(p.fwd, p.emb_x.row(x_ids[i]).transpose(), h, c, L);
    h = lstm_h(s);
    c = s.c;
    cache.fwd.push_back(std::move(s));
  }
  Vec hb = Vec::Zero(L), cb = Vec::Zero(L);
  for (int i = n - 1; i >= 0; --i) {
    LstmStepCache s = lstm_step(p.bwd, p.emb_x.row(x_ids[i]).transpose(), hb, cb, L);
    hb = lstm_h(s);
    cb = s.c;
    cache.bwd.push_back(std::move(s));
  }

  cache.out.states = Mat(n, 2 * L);
  for (int i = 0; i < n; ++i) {
    cache.out.states.row(i).head(L) = lstm_h(cache.fwd[i]).transpose();
    cache.out.states.row(i).tail(L) = lstm_h(cache.bwd[n - 1 - i]).transpose();
  }
  cache.out.summary = Vec(2 * L);
  cache.out.summary.head(L) = lstm_h(cache.fwd[n - 1]);
  cache.out.summary.tail(L) = lstm_h(cache.bwd[n - 1]);  // h^B_1: last processed

  cache.out.bow = Vec::Zero(p.dims.utt_vocab);
  for (int id : x_ids) cache.out.bow[id] += 1.0;
  cache.out.bow /= static_cast<double>(n);
  return cache;
}

EncoderOutput encode(const std::vector<int>& x_ids, const ModelParams& p) {
  return encode_cached(x_ids, p).out;
}

void EncBackGrads::init(const EncoderOutput& out) {
  d_states = Mat::Zero(out.states.rows(), out.states.cols());
  d_summary = Vec::Zero(out.summary.size());
}

void encoder_backward(const EncCache& enc, const ModelParams& p, const EncBackGrads& g,
                      ModelParams& grads) {
  const int n = static_cast<int>(enc.x_ids.size());
  const int L = p.dims.lstm;

  std::vector<Vec> d_h_fwd(n), d_h_bwd(n);
  for (int i = 0; i < n; ++i) {
    d_h_fwd[i] = g.d_states.row(i).head(L).transpose();
    // bwd caches are in processing order: position n-1-j
    d_h_bwd[i] = g.d_states.row(n - 1 - i).tail(L).transpose();
  }
  d_h_fwd[n - 1] += g.d_summary.head(L);
  d_h_bwd[n - 1] += g.d_summary.tail(L);  // summary tail is h^B_1, processed last

  std::vector<Vec> d_in_fwd, d_in_bwd;
  lstm_backward(p.fwd, enc.fwd, d_h_fwd, L, grads.fwd, d_in_fwd);
  lstm_backward(p.bwd, enc.bwd, d_h_bwd, L, grads.bwd, d_in_bwd);

  for (int i = 0; i < n; ++i) {
    grads.emb_x.row(enc.x_ids[i]) += d_in_fwd[i].transpose();
    grads.emb_x.row(enc.x_ids[n - 1 - i]) += d_in_bwd[i].transpose();
  }
}

// -- decoder -------------------------------------------------------------------

std::vector<int> history_window(const std::vector<int>& z_dense, std::size_t t, int K,
                                int bos) {
  std::vector<int> hist(K, bos);
  for (int k = 0; k < K; ++k) {
    const long long idx = static_cast<long long>(t) - K + k;
    if (idx >= 0 && idx < static_cast<long long>(z_dense.size()))
      hist[k] = z_dense[static_cast<std::size_t>(idx)];
  }
  return hist;
}

StepCache decode_step(const EncoderOutput& enc, const std::vector<int>& history,
                      const ModelParams& p) {
  const ModelDims& d = p.dims;
  const int K = d.history;
  StepCache s;
  s.history = history;

  s.u = Vec(d.q_input());
  s.u.head(d.enc_state()) = enc.summary;
  s.u.segment(d.enc_state(), d.utt_vocab) = enc.bow;
  for (int k = 0; k < K; ++k)
    s.u.segment(d.enc_state() + d.utt_vocab + k * d.emb, d.emb) =
        p.emb_z.row(history[k]).transpose();

  s.pre_q = p.W_q * s.u;
  s.q = s.pre_q.cwiseMax(0.0);

  s.att_scores = enc.states * (p.W_alpha.transpose() * s.q);
  const double mx = s.att_scores.maxCoeff();
  Vec ex = (s.att_scores.array() - mx).exp().matrix();
  s.alpha = ex / ex.sum();
  s.context = enc.states.transpose() * s.alpha;

  Vec oc(d.out_input());
  oc.head(d.hidden) = s.q;
  oc.tail(d.enc_state()) = s.context;
  s.w = p.W_s * oc;
  s.logits = p.emb_z.topRows(d.prog_vocab) * s.w;
  return s;
}

Vec decode_dist(const EncoderOutput& enc, const std::vector<int>& history,
                const ModelParams& p) {
  const StepCache s = decode_step(enc, history, p);
  const double mx = s.logits.maxCoeff();
  Vec ex = (s.logits.array() - mx).exp().matrix();
  return ex / ex.sum();
}

Vec masked_dist(const Vec& dist, const TypeStack& stack, const ProgVocab& pv) {
  std::vector<int> valid;
  for (TokenId t : stack.valid_next()) {
    const int j = pv.dense_id(t);
    if (j >= 0) valid.push_back(j);
  }
  if (valid.empty()) throw Error("masked_dist: no valid token for the current stack");
  Vec out = Vec::Zero(dist.size());
  double sum = 0.0;
  for (int j : valid) {
    out[j] = dist[j];
    sum += dist[j];
  }
  if (sum <= 0.0) {
    ++underflow_guard_hits;
    for (int j : valid) out[j] = 1.0 / static_cast<double>(valid.size());
    return out;
  }
  out /= sum;
  return out;
}

std::vector<double> masked_logprobs(const Vec& logits, const std::vector<int>& candidates) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int j : candidates) mx = std::max(mx, logits[j]);
  double sum = 0.0;
  for (int j : candidates) sum += std::exp(logits[j] - mx);
  const double log_z = mx + std::log(sum);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (int j : candidates) out.push_back(logits[j] - log_z);
  return out;
}

namespace {

std::vector<int> to_dense(const Program& z, const ProgVocab& pv) {
  std::vector<int> out;
  out.reserve(z.tokens.size());
  for (TokenId t : z.tokens) {
    const int j = pv.dense_id(t);
    if (j < 0)
      throw Error("program token '" + TokenInventory::instance().sig(t).name +
                  "' is outside the model vocabulary");
    out.push_back(j);
  }
  return out;
}

std::vector<int> valid_dense(const TypeStack& stack, const ProgVocab& pv) {
  std::vector<int> out;
  for (TokenId t : stack.valid_next()) {
    const int j = pv.dense_id(t);
    if (j >= 0) out.push_back(j);
  }
  return out;
}

}  // namespace

double sequence_logprob(const std::vector<int>& x_ids, const Program& z,
                        const ModelParams& p, const ProgVocab& pv) {
  if (!well_typed(z)) throw TypeError("sequence_logprob over ill-typed program");
  const EncoderOutput enc = encode(x_ids, p);
  const std::vector<int> z_dense = to_dense(z, pv);
  TypeStack stack;
  double total = 0.0;
  for (std::size_t t = 0; t < z_dense.size(); ++t) {
    const StepCache step =
        decode_step(enc, history_window(z_dense, t, p.dims.history, p.bos()), p);
    const std::vector<int> valid = valid_dense(stack, pv);
    const auto it = std::find(valid.begin(), valid.end(), z_dense[t]);
    if (it == valid.end())
      throw Error("program token invalid under the type mask at step " + std::to_string(t));
    const auto logps = masked_logprobs(step.logits, valid);
    total += logps[static_cast<std::size_t>(it - valid.begin())];
    stack.push_token(z.tokens[t]);
  }
  return total;
}

void decode_step_backward(const EncCache& enc, const StepCache& s, const Vec& d_logits,
                          const ModelParams& p, ModelParams& grads, EncBackGrads& eg) {
  const ModelDims& d = p.dims;
  const int V = d.prog_vocab;

  const Vec dw = p.emb_z.topRows(V).transpose() * d_logits;
  grads.emb_z.topRows(V) += d_logits * s.w.transpose();

  Vec oc(d.out_input());
  oc.head(d.hidden) = s.q;
  oc.tail(d.enc_state()) = s.context;
  grads.W_s += dw * oc.transpose();
  const Vec d_oc = p.W_s.transpose() * dw;
  Vec dq = d_oc.head(d.hidden);
  const Vec d_context = d_oc.tail(d.enc_state());

  // attention
  const Vec d_alpha = enc.out.states * d_context;
  const double adot = s.alpha.dot(d_alpha);
  const Vec d_scores = (s.alpha.array() * (d_alpha.array() - adot)).matrix();
  const Vec u_a = p.W_alpha.transpose() * s.q;
  eg.d_states += d_scores * u_a.transpose() + s.alpha * d_context.transpose();
  const Vec d_u_a = enc.out.states.transpose() * d_scores;
  grads.W_alpha += s.q * d_u_a.transpose();
  dq += p.W_alpha * d_u_a;

  // q = relu(W_q u)
  const Vec d_pre = (dq.array() * (s.pre_q.array() > 0.0).cast<double>()).matrix();
  grads.W_q += d_pre * s.u.transpose();
  const Vec d_u = p.W_q.transpose() * d_pre;
  eg.d_summary += d_u.head(d.enc_state());
  for (int k = 0; k < d.history; ++k)
    grads.emb_z.row(s.history[k]) +=
        d_u.segment(d.enc_state() + d.utt_vocab + k * d.emb, d.emb).transpose();
}

double weighted_nll_backward(const std::vector<int>& x_ids,
                             const std::vector<const Program*>& programs,
                             const std::vector<double>& weights, const ModelParams& p,
                             const ProgVocab& pv, ModelParams& grads) {
  const EncCache enc = encode_cached(x_ids, p);
  EncBackGrads eg;
  eg.init(enc.out);
  double loss = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const double weight = weights[i];
    if (weight == 0.0) continue;
    any = true;
    const Program& z = *programs[i];
    const std::vector<int> z_dense = to_dense(z, pv);
    TypeStack stack;
    for (std::size_t t = 0; t < z_dense.size(); ++t) {
      const StepCache step =
          decode_step(enc.out, history_window(z_dense, t, p.dims.history, p.bos()), p);
      const std::vector<int> valid = valid_dense(stack, pv);
      const auto it = std::find(valid.begin(), valid.end(), z_dense[t]);
      if (it == valid.end())
        throw Error("program token invalid under the type mask at step " + std::to_string(t));
      const auto logps = masked_logprobs(step.logits, valid);
      loss -= weight * logps[static_cast<std::size_t>(it - valid.begin())];

      Vec d_logits = Vec::Zero(p.dims.prog_vocab);
      for (std::size_t vi = 0; vi < valid.size(); ++vi)
        d_logits[valid[vi]] = weight * std::exp(logps[vi]);
      d_logits[z_dense[t]] -= weight;
      decode_step_backward(enc, step, d_logits, p, grads, eg);
      stack.push_token(z.tokens[t]);
    }
    if (!stack.complete()) throw Error("weighted_nll_backward over incomplete program");
  }
  if (any) encoder_backward(enc, p, eg, grads);
  return loss;
}

// -- re-ranker -----------------------------------------------------------------

namespace {

struct RerankCache {
  StepCache qstate;  // only u/pre_q/q fields used
  Vec hid_pre, hid;
  double score = 0.0;
};

RerankCache rerank_forward(const EncoderOutput& enc, const std::vector<int>& z_dense,
                           const ModelParams& psi) {
  const ModelDims& d = psi.dims;
  RerankCache rc;
  StepCache& s = rc.qstate;
  s.history = history_window(z_dense, z_dense.size(), d.history, psi.dims.prog_vocab);
  s.u = Vec(d.q_input());
  s.u.head(d.enc_state()) = enc.summary;
  s.u.segment(d.enc_state(), d.utt_vocab) = enc.bow;
  for (int k = 0; k < d.history; ++k)
    s.u.segment(d.enc_state() + d.utt_vocab + k * d.emb, d.emb) =
        psi.emb_z.row(s.history[k]).transpose();
  s.pre_q = psi.W_q * s.u;
  s.q = s.pre_q.cwiseMax(0.0);

  rc.hid_pre = psi.head_W1 * s.q + psi.head_b1.col(0);
  rc.hid = rc.hid_pre.cwiseMax(0.0);
  rc.score = psi.head_w2.col(0).dot(rc.hid) + psi.head_b2(0, 0);
  return rc;
}

void rerank_backward(const RerankCache& rc, double d_score,
                     const ModelParams& psi, ModelParams& grads, EncBackGrads& eg) {
  const ModelDims& d = psi.dims;
  const StepCache& s = rc.qstate;
  grads.head_b2(0, 0) += d_score;
  grads.head_w2.col(0) += d_score * rc.hid;
  const Vec d_hid =
      (d_score * psi.head_w2.col(0).array() * (rc.hid_pre.array() > 0.0).cast<double>())
          .matrix();
  grads.head_W1 += d_hid * s.q.transpose();
  grads.head_b1.col(0) += d_hid;
  const Vec dq = psi.head_W1.transpose() * d_hid;
  const Vec d_pre = (dq.array() * (s.pre_q.array() > 0.0).cast<double>()).matrix();
  grads.W_q += d_pre * s.u.transpose();
  const Vec d_u = psi.W_q.transpose() * d_pre;
  eg.d_summary += d_u.head(d.enc_state());
  for (int k = 0; k < d.history; ++k)
    grads.emb_z.row(s.history[k]) +=
        d_u.segment(d.enc_state() + d.utt_vocab + k * d.emb, d.emb).transpose();
}

}  // namespace

double rerank_score(const std::vector<int>& x_ids, const Program& z, const ModelParams& psi,
                    const ProgVocab& pv) {
  const EncoderOutput enc = encode(x_ids, psi);
  return rerank_forward(enc, to_dense(z, pv), psi).score;
}

double rerank_score_backward(const std::vector<int>& x_ids, const Program& z,
                             const ModelParams& psi, const ProgVocab& pv, double d_score,
                             ModelParams& grads) {
  const EncCache enc = encode_cached(x_ids, psi);
  EncBackGrads eg;
  eg.init(enc.out);
  const RerankCache rc = rerank_forward(enc.out, to_dense(z, pv), psi);
  rerank_backward(rc, d_score, psi, grads, eg);
  encoder_backward(enc, psi, eg, grads);
  return rc.score;
}

double rerank_loss_backward(const std::vector<int>& x_ids,
                            const std::vector<const Program*>& beam,
                            const std::vector<int>& rewards, const ModelParams& psi,
                            const ProgVocab& pv, ModelParams& grads) {
  bool any_rewarded = false;
  for (int r : rewards) any_rewarded |= (r != 0);
  if (!any_rewarded || beam.empty()) return 0.0;

  const EncCache enc = encode_cached(x_ids, psi);
  EncBackGrads eg;
  eg.init(enc.out);

  std::vector<RerankCache> caches;
  caches.reserve(beam.size());
  Vec scores(beam.size());
  for (std::size_t i = 0; i < beam.size(); ++i) {
    caches.push_back(rerank_forward(enc.out, to_dense(*beam[i], pv), psi));
    scores[i] = caches.back().score;
  }
  const double mx = scores.maxCoeff();
  Vec prob = (scores.array() - mx).exp().matrix();
  prob /= prob.sum();
  double objective = 0.0;
  for (std::size_t i = 0; i < beam.size(); ++i)
    if (rewards[i]) objective += prob[i];

  // L = -log sum_z p^g(z) R(z);  dL/ds_i = -p_i (R_i - objective) / objective
  for (std::size_t i = 0; i < beam.size(); ++i) {
    const double d_score = -prob[i] * ((rewards[i] ? 1.0 : 0.0) - objective) / objective;
    rerank_backward(caches[i], d_score, psi, grads, eg);
  }
  encoder_backward(enc, psi, eg, grads);
  return -std::log(objective);
}

// -- optimizer -----------------------------------------------------------------

Adam::Adam(const ModelParams& params, double lr) : lr_(lr) {
  for (const auto& [name, t] : params.named_tensors()) {
    (void)name;
    m_.push_back(Mat::Zero(t->rows(), t->cols()));
    v_.push_back(Mat::Zero(t->rows(), t->cols()));
  }
}

void Adam::step(ModelParams& params, ModelParams& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, step_count_);
  const double bc2 = 1.0 - std::pow(beta2_, step_count_);
  auto ps = params.named_tensors();
  auto gs = grads.named_tensors();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Mat& p = *ps[i].second;
    Mat& g = *gs[i].second;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * g.array().square()).matrix();
    p.array() -=
        lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    g.setZero();
  }
}

// -- CBOW ----------------------------------------------------------------------

Mat cbow_embeddings(const std::vector<std::vector<int>>& sentences, int vocab, int dim,
                    int window, int epochs, double lr, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.5 / dim, 0.5 / dim);
  Mat w_in(vocab, dim), w_out(vocab, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (int r = 0; r < vocab; ++r) w_in(r, c) = d(rng);
    for (int r = 0; r < vocab; ++r) w_out(r, c) = d(rng);
  }

  std::vector<std::pair<int, int>> positions;  // (sentence, center)
  for (std::size_t si = 0; si < sentences.size(); ++si)
    for (std::size_t t = 0; t < sentences[si].size(); ++t)
      positions.emplace_back(static_cast<int>(si), static_cast<int>(t));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(positions.begin(), positions.end(), rng);
    for (const auto& [si, t] : positions) {
      const auto& sent = sentences[si];
      std::vector<int> ctx;
      for (int k = -window; k <= window; ++k) {
        const int j = t + k;
        if (k != 0 && j >= 0 && j < static_cast<int>(sent.size())) ctx.push_back(sent[j]);
      }
      if (ctx.empty()) continue;
      Vec mean = Vec::Zero(dim);
      for (int id : ctx) mean += w_in.row(id).transpose();
      mean /= static_cast<double>(ctx.size());

      Vec logits = w_out * mean;
      const double mx = logits.maxCoeff();
      Vec prob = (logits.array() - mx).exp().matrix();
      prob /= prob.sum();
      prob[sent[t]] -= 1.0;  // d(loss)/d(logits)

      const Vec d_mean = w_out.transpose() * prob;
      w_out -= lr * prob * mean.transpose();
      const Vec upd = (lr / static_cast<double>(ctx.size())) * d_mean;
      for (int id : ctx) w_in.row(id) -= upd.transpose();
    }
  }
  return w_in;
}

// -- checkpoints ---------------------------------------------------------------

std::vector<int> Model::encode_utterance(const std::vector<std::string>& tokens) const {
  return utt_index.encode(tokens);
}

namespace {

void write_hex_row(std::ostream& out, const Mat& m, Eigen::Index r) {
  char buf[64];
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::snprintf(buf, sizeof buf, "%a", m(r, c));
    out << (c ? " " : "") << buf;
  }
  out << "\n";
}

}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path);
  const auto& inv = TokenInventory::instance();
  out << "absparse-ckpt v1\n";
  out << "vocab " << vocab.min_count << " " << vocab.raw_counts.size() << " "
      << vocab.lemma_counts.size() << "\n";
  for (const auto& [tok, count] : vocab.raw_counts) out << tok << " " << count << "\n";
  for (const auto& [tok, count] : vocab.lemma_counts) out << tok << " " << count << "\n";
  out << "utt_vocab " << utt_index.tokens.size() << "\n";
  for (const auto& t : utt_index.tokens) out << t << "\n";
  out << "prog_vocab " << prog_vocab.tokens.size() << "\n";
  for (TokenId t : prog_vocab.tokens) out << inv.sig(t).name << "\n";
  const ModelDims& d = params.dims;
  out << "dims " << d.emb << " " << d.lstm << " " << d.hidden << " " << d.history << " "
      << d.head_hidden << "\n";
  for (const auto& [name, t] : params.named_tensors()) {
    out << "tensor " << name << " " << t->rows() << " " << t->cols() << "\n";
    for (Eigen::Index r = 0; r < t->rows(); ++r) write_hex_row(out, *t, r);
  }
  out << "end\n";
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "absparse-ckpt v1")
    throw Error("checkpoint " + path + ": bad header '" + line + "'");

  Model m;
  const auto& inv = TokenInventory::instance();
  std::string word;
  std::size_t n = 0;

  std::size_t n_raw = 0, n_lemma = 0;
  in >> word >> m.vocab.min_count >> n_raw >> n_lemma;
  if (word != "vocab") throw Error("checkpoint: expected vocab");
  for (std::size_t i = 0; i < n_raw + n_lemma; ++i) {
    std::string tok;
    int count = 0;
    in >> tok >> count;
    (i < n_raw ? m.vocab.raw_counts : m.vocab.lemma_counts)[tok] = count;
  }

  in >> word >> n;
  if (word != "utt_vocab") throw Error("checkpoint: expected utt_vocab");
  std::getline(in, line);
  m.utt_index.tokens.resize(n);
  for (auto& t : m.utt_index.tokens) std::getline(in, t);
  for (std::size_t i = 0; i < n; ++i) m.utt_index.ids.emplace(m.utt_index.tokens[i], (int)i);
  {
    auto it = m.utt_index.ids.find(kUnkToken);
    m.utt_index.unk_id = it == m.utt_index.ids.end() ? (int)n - 1 : it->second;
  }

  in >> word >> n;
  if (word != "prog_vocab") throw Error("checkpoint: expected prog_vocab");
  std::getline(in, line);
  m.prog_vocab.dense.assign(inv.size(), -1);
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    const TokenId t = inv.id(line);
    m.prog_vocab.dense[t] = static_cast<int>(m.prog_vocab.tokens.size());
    m.prog_vocab.tokens.push_back(t);
  }

  ModelDims dims;
  in >> word >> dims.emb >> dims.lstm >> dims.hidden >> dims.history >> dims.head_hidden;
  if (word != "dims") throw Error("checkpoint: expected dims");
  dims.utt_vocab = static_cast<int>(m.utt_index.tokens.size());
  dims.prog_vocab = m.prog_vocab.size();
  m.params = ModelParams::init(dims, 0);

  for (auto& [name, t] : m.params.named_tensors()) {
    std::string tag, tname;
    Eigen::Index rows = 0, cols = 0;
    in >> tag >> tname >> rows >> cols;
    if (tag != "tensor" || tname != name)
      throw Error("checkpoint: expected tensor " + name + ", found " + tname);
    if (rows != t->rows() || cols != t->cols())
      throw Error("checkpoint: tensor " + name + " has unexpected shape");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        in >> word;
        (*t)(r, c) = std::strtod(word.c_str(), nullptr);
      }
  }
  in >> word;
  if (word != "end") throw Error("checkpoint: missing end marker");
  m.params.check_finite("checkpoint load");
  return m;
}

}  // namespace absparse
