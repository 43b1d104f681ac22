// Acceptance suite. Criteria 1-7 are dataset-free properties and must pass;
// criteria 8-11 need the public CNLVR structured-representation release and
// are skipped unless CNLVR_DATA_DIR points at it (train.json / dev.json).
// Set ABSPARSE_RUN_LONG=1 to run the multi-hour training criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "absparse/augment.hpp"
#include "absparse/metrics.hpp"
#include "absparse/search.hpp"
#include "absparse/train.hpp"
#include "naive_interp.hpp"
#include "toy_domain.hpp"

using namespace absparse;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << detail
            << std::endl;
  if (!pass) ++failures;
}

void skip(int criterion, const std::string& why) {
  std::cout << "[SKIP] criterion " << criterion << ": " << why << std::endl;
}

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::string data_file(const char* name) {
  return std::string(ABSPARSE_DATA_DIR) + "/" + name;
}

// ---------------------------------------------------------------------------
// 1. Type-stack soundness: 10,000 random programs, all complete, well-typed,
//    and executable on 100 random KBs.
// ---------------------------------------------------------------------------
void criterion_1() {
  std::vector<KnowledgeBase> worlds;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    WorldSpec spec;
    spec.items_per_box = {static_cast<int>(seed % 4), static_cast<int>((seed / 2) % 5),
                          static_cast<int>(1 + seed % 3)};
    worlds.push_back(sample_world(seed, spec));
  }
  long long bad = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Program z;
    try {
      z = random_program(seed, kMaxProgramLen);
    } catch (const std::exception&) {
      ++bad;
      continue;
    }
    if (!well_typed(z) || z.tokens.size() > kMaxProgramLen) {
      ++bad;
      continue;
    }
    for (const KnowledgeBase& kb : worlds) {
      try {
        (void)execute(z, kb);
      } catch (const std::exception&) {
        ++bad;
        break;
      }
    }
  }
  report(1, bad == 0,
         "type-stack soundness over 10,000 random programs (failures: " +
             std::to_string(bad) + ", tolerated: 0)");
}

// ---------------------------------------------------------------------------
// 2. Executor agrees with the naive tree-interpreter oracle on 1,000 pairs.
// ---------------------------------------------------------------------------
void criterion_2() {
  long long disagreements = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    WorldSpec spec;
    spec.items_per_box = {static_cast<int>(1 + i % 3), static_cast<int>(i % 5),
                          static_cast<int>(2 + i % 2)};
    const KnowledgeBase kb = sample_world(i * 13 + 5, spec);
    const Program z = random_program(i * 7 + 3, kMaxProgramLen);
    const bool main_result = execute(z, kb);
    const bool oracle = absparse::testing::naive_execute(z.text(), kb);
    if (main_result != oracle) ++disagreements;
  }
  report(2, disagreements == 0,
         "executor vs naive oracle on 1,000 (program, KB) pairs (disagreements: " +
             std::to_string(disagreements) + ")");
}

// ---------------------------------------------------------------------------
// 3. De-abstraction round-trip over 1,000 augmented pairs.
// ---------------------------------------------------------------------------
void criterion_3() {
  const Lexicon lex = Lexicon::load(data_file("lexicon.tsv"));
  const AnnotationSet ann = AnnotationSet::load(data_file("annotations.txt"), lex);
  const auto pairs = generate(ann, lex, 1000, 2024);
  long long bad = 0;
  for (const auto& p : pairs) {
    try {
      const AbstractUtterance xbar = abstract_utterance(p.utterance, lex);
      const AbstractProgram zbar = abstract_program(xbar, p.program, lex);
      if (!(deabstract(zbar, xbar, lex) == p.program)) ++bad;
    } catch (const std::exception&) {
      ++bad;
    }
  }
  report(3, bad == 0,
         "abstract -> de-abstract recovers 1,000/1,000 augmented programs (misses: " +
             std::to_string(bad) + ")");
}

// ---------------------------------------------------------------------------
// 4. Gradient checks at dims <= 8 against central finite differences.
// ---------------------------------------------------------------------------
double max_rel_error(ModelParams& p, const std::function<double(const ModelParams&)>& loss,
                     ModelParams& grads) {
  const double h = 1e-5;
  double worst = 0.0;
  auto ps = p.named_tensors();
  auto gs = grads.named_tensors();
  for (std::size_t ti = 0; ti < ps.size(); ++ti) {
    Mat& tensor = *ps[ti].second;
    const Mat& grad = *gs[ti].second;
    for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        const double saved = tensor(r, c);
        tensor(r, c) = saved + h;
        const double up = loss(p);
        tensor(r, c) = saved - h;
        const double down = loss(p);
        tensor(r, c) = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grad(r, c);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
      }
    }
  }
  return worst;
}

void criterion_4() {
  const TokenSubset subset = TokenSubset::of(
      {"Exist", "ALL_ITEMS", "Filter", "lambda", "IsYellow", "IsBlue", "x", "And", "Not"});
  const ProgVocab pv = ProgVocab::from_subset(subset);
  ModelDims dims;
  dims.utt_vocab = 6;
  dims.prog_vocab = pv.size();
  dims.emb = 4;
  dims.lstm = 6;
  dims.hidden = 8;
  dims.history = 3;
  dims.head_hidden = 7;

  const std::vector<int> x = {0, 2, 4, 1};
  const Program z =
      Program::parse("Exist Filter ALL_ITEMS lambda And IsYellow x Not IsBlue x");

  ModelParams p = ModelParams::init(dims, 77);
  ModelParams grads = ModelParams::zeros_like(p);
  weighted_nll_backward(x, {&z}, {1.0}, p, pv, grads);
  const double nll_err = max_rel_error(
      p,
      [&](const ModelParams& params) {
        ModelParams scratch = ModelParams::zeros_like(params);
        return weighted_nll_backward(x, {&z}, {1.0}, params, pv, scratch);
      },
      grads);

  ModelParams psi = ModelParams::init(dims, 78);
  const Program z2 = Program::parse("Exist ALL_ITEMS");
  const std::vector<const Program*> beam = {&z, &z2};
  const std::vector<int> rewards = {1, 0};
  ModelParams psi_grads = ModelParams::zeros_like(psi);
  rerank_loss_backward(x, beam, rewards, psi, pv, psi_grads);
  const double rr_err = max_rel_error(
      psi,
      [&](const ModelParams& params) {
        ModelParams scratch = ModelParams::zeros_like(params);
        return rerank_loss_backward(x, beam, rewards, params, pv, scratch);
      },
      psi_grads);

  std::ostringstream detail;
  detail << "gradient checks: encoder+decoder NLL max rel err " << nll_err
         << ", re-ranker max rel err " << rr_err << " (tolerance 1e-4)";
  report(4, nll_err <= 1e-4 && rr_err <= 1e-4, detail.str());
}

// ---------------------------------------------------------------------------
// 5. Tied-reward rate under coin-flip denotations.
// ---------------------------------------------------------------------------
void criterion_5() {
  std::mt19937_64 rng(20240501);
  std::bernoulli_distribution coin(0.5);
  const int trials = 10000;
  long long single = 0, tied = 0;
  for (int i = 0; i < trials; ++i) {
    std::vector<bool> denots, labels;
    for (int j = 0; j < 4; ++j) {
      denots.push_back(coin(rng));
      labels.push_back(coin(rng));
    }
    single += denots[0] == labels[0] ? 1 : 0;
    tied += reward_denotations(denots, labels) ? 1 : 0;
  }
  const double p1 = single / double(trials);
  const double p4 = tied / double(trials);
  std::ostringstream detail;
  detail << "coin-flip acceptance: single-KB " << p1 << " (want 0.50 +- 0.02), tied " << p4
         << " (want 0.0625 +- 0.01)";
  report(5, std::abs(p1 - 0.5) <= 0.02 && std::abs(p4 - 1.0 / 16) <= 0.01, detail.str());
}

// ---------------------------------------------------------------------------
// 6. Algorithm-1 retrieval guarantee: a cached correct abstract program makes
//    the correct concrete program appear in the returned set, 50/50 cases.
// ---------------------------------------------------------------------------
void criterion_6() {
  using absparse::testing::ToyDomain;
  ToyDomain toy = absparse::testing::build_toy_domain(1);
  TrainConfig cfg = absparse::testing::toy_config(1);
  Model model = build_model(toy.vocab, ProgVocab::from_subset(toy.subset), cfg);

  // seed the cache with the correct abstract program of every pattern (reward 1)
  Cache cache;
  for (const AbstractPair& pattern : toy.annotations.pairs()) {
    const AnnotationSet one = AnnotationSet::from_pairs({pattern}, toy.lex);
    const auto seeds = generate(one, toy.lex, 1, 99);
    update_cache(cache, seeds[0].utterance, {seeds[0].program}, {1}, toy.lex);
  }

  DecodeOptions opts = cfg.decode_options();
  opts.beam_size = 4;  // deliberately starved; retrieval must still deliver

  const auto cases = generate(toy.annotations, toy.lex, 50, 123);
  int hits = 0;
  for (const auto& c : cases) {
    const auto got = beam_decode(c.utterance, model, toy.lex, &cache, opts);
    for (const ScoredProgram& sp : got)
      if (sp.program == c.program) {
        ++hits;
        break;
      }
  }
  report(6, hits == 50,
         "cache retrieval guarantee: correct program returned for " + std::to_string(hits) +
             "/50 same-pattern utterances");
}

// ---------------------------------------------------------------------------
// 7. Toy end-to-end: weak training from a warm start reaches top-1 tied
//    reward >= 0.9 within 30 epochs; -BeamCache and OneExampleReward stay
//    strictly lower on the same seeds.
// ---------------------------------------------------------------------------
double run_weak_variant(const absparse::testing::ToyDomain& toy, const Model& warm, TrainConfig cfg) {
  Model model = warm;  // value copy: each variant trains from the same start
  Cache cache;
  const WeakStats stats = train_weak(model, toy.groups, cfg, cache, toy.lex);
  return stats.final_top1_tied;
}

void criterion_7() {
  const std::vector<std::uint64_t> seeds = {11, 22, 33};
  double full_sum = 0, nocache_sum = 0, oneex_sum = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed : seeds) {
    absparse::testing::ToyDomain toy = absparse::testing::build_toy_domain(seed);
    TrainConfig cfg = absparse::testing::toy_config(seed);

    Model warm = build_model(toy.vocab, ProgVocab::from_subset(toy.subset), cfg);
    TrainConfig sup_cfg = cfg;
    sup_cfg.epochs = 200;
    sup_cfg.lr = 0.01;
    train_supervised(warm, toy.warm_train, toy.warm_val, sup_cfg);

    TrainConfig weak_cfg = cfg;
    weak_cfg.epochs = 30;

    const double full = run_weak_variant(toy, warm, weak_cfg);

    TrainConfig nocache_cfg = weak_cfg;
    nocache_cfg.no_cache = true;
    const double nocache = run_weak_variant(toy, warm, nocache_cfg);

    TrainConfig oneex_cfg = weak_cfg;
    oneex_cfg.one_example_reward = true;
    const double oneex = run_weak_variant(toy, warm, oneex_cfg);

    full_sum += full;
    nocache_sum += nocache;
    oneex_sum += oneex;
    per_seed << " [seed " << seed << ": full " << full << ", -BeamCache " << nocache
             << ", OneExampleReward " << oneex << "]";
  }
  const double full = full_sum / seeds.size();
  const double nocache = nocache_sum / seeds.size();
  const double oneex = oneex_sum / seeds.size();
  std::ostringstream detail;
  detail << "toy weak supervision: full " << full << " (want >= 0.9), -BeamCache " << nocache
         << ", OneExampleReward " << oneex << " (both want strictly lower);" << per_seed.str();
  report(7, full >= 0.9 && nocache < full && oneex < full, detail.str());
}

// ---------------------------------------------------------------------------
// 8-11. Dataset-dependent criteria (public CNLVR release).
// ---------------------------------------------------------------------------
struct CnlvrData {
  std::vector<ExampleGroup> train_groups, dev_groups;
  Vocab vocab;
};

bool load_cnlvr(const std::string& dir, CnlvrData& out, std::string& err) {
  try {
    const CnlvrFieldMap map = CnlvrFieldMap::load(data_file("cnlvr_map.json"));
    const auto train = load_corpus(dir + "/train.json", CorpusFormat::Cnlvr, &map);
    const auto dev = load_corpus(dir + "/dev.json", CorpusFormat::Cnlvr, &map);
    out.train_groups = group_by_utterance(train);
    out.dev_groups = group_by_utterance(dev);
    std::vector<std::string> train_sentences;
    for (const auto& g : out.train_groups) train_sentences.push_back(g.raw_utterance);
    out.vocab = build_vocab(train_sentences, 5);
    for (auto* groups : {&out.train_groups, &out.dev_groups})
      for (auto& g : *groups) g.utterance = preprocess(g.raw_utterance, out.vocab);
    return true;
  } catch (const std::exception& e) {
    err = e.what();
    return false;
  }
}

void criteria_8_to_11() {
  const char* dir = std::getenv("CNLVR_DATA_DIR");
  if (!dir) {
    for (int c : {8, 9, 10, 11})
      skip(c, "CNLVR_DATA_DIR not set (public CNLVR release required)");
    return;
  }
  CnlvrData data;
  std::string err;
  if (!load_cnlvr(dir, data, err)) {
    for (int c : {8, 9, 10, 11}) skip(c, "could not load CNLVR data: " + err);
    return;
  }
  const Lexicon lex = Lexicon::load(data_file("lexicon.tsv"));
  const AnnotationSet ann = AnnotationSet::load(data_file("annotations.txt"), lex);

  {
    std::vector<std::vector<std::string>> utterances;
    for (const auto& g : data.train_groups) utterances.push_back(g.utterance);
    const CoverageReport cov = coverage_report(utterances, lex);
    const double top200 = cov.top_k_coverage(200);
    std::ostringstream detail;
    detail << "top-200 abstract patterns cover " << top200 << " of "
           << cov.total_utterances << " training utterances (want 0.45..0.55)";
    report(8, top200 >= 0.45 && top200 <= 0.55, detail.str());
  }

  {
    const Metrics m = evaluate(
        [&](const ExampleGroup& g) { return rule_parse(g.utterance, ann, lex); },
        data.dev_groups);
    std::ostringstream detail;
    detail << "rule-based parser dev accuracy " << 100 * m.accuracy
           << " (want 60..70), consistency " << 100 * m.consistency;
    report(9, m.accuracy >= 0.60 && m.accuracy <= 0.70, detail.str());
  }

  if (!std::getenv("ABSPARSE_RUN_LONG")) {
    skip(10, "ABSPARSE_RUN_LONG not set (supervised training takes ~2h on CPU)");
    skip(11, "ABSPARSE_RUN_LONG not set (weak training is an overnight run)");
    return;
  }

  TrainConfig cfg;  // paper defaults: dims 12/30/50, beam 40, D 10, Adam 1e-3
  cfg.min_count = 5;
  const auto pairs = generate(ann, lex, 6158, cfg.seed);
  const GeneratedSplit split = split_generated(pairs, 560, cfg.seed);
  std::vector<std::vector<std::string>> cbow_sentences;
  for (const auto& g : data.train_groups) cbow_sentences.push_back(g.utterance);

  Model sup = build_model(data.vocab, ProgVocab::full(), cfg, &cbow_sentences);
  TrainConfig sup_cfg = cfg;
  sup_cfg.epochs = 20;
  train_supervised(sup, split.train, split.validation, sup_cfg, &std::cout);

  Model sup_rerank = build_model(data.vocab, ProgVocab::full(), cfg, &cbow_sentences);
  TrainConfig rr_cfg = cfg;
  rr_cfg.epochs = 3;
  rr_cfg.no_cache = true;
  train_rerank(sup_rerank, sup, data.train_groups, rr_cfg, nullptr, lex, &std::cout);

  {
    DecodeOptions opts = cfg.decode_options();
    opts.use_cache = false;
    const Metrics m = evaluate(
        [&](const ExampleGroup& g) {
          return neural_parse(sup, &sup_rerank, g.utterance, lex, nullptr, opts);
        },
        data.dev_groups);
    std::ostringstream detail;
    detail << "supervised + re-ranker dev accuracy " << 100 * m.accuracy << " (want >= 72)";
    report(10, m.accuracy >= 0.72, detail.str());
  }

  {
    Model weak = sup;
    Cache cache;
    TrainConfig weak_cfg = cfg;
    weak_cfg.epochs = 30;
    train_weak(weak, data.train_groups, weak_cfg, cache, lex, &data.dev_groups, &std::cout);
    Model weak_rerank = build_model(data.vocab, ProgVocab::full(), cfg, &cbow_sentences);
    TrainConfig rr2 = cfg;
    rr2.epochs = 3;
    train_rerank(weak_rerank, weak, data.train_groups, rr2, &cache, lex, &std::cout);
    DecodeOptions opts = cfg.decode_options();
    opts.use_cache = false;
    const Metrics m = evaluate(
        [&](const ExampleGroup& g) {
          return neural_parse(weak, &weak_rerank, g.utterance, lex, nullptr, opts);
        },
        data.dev_groups);
    std::ostringstream detail;
    detail << "weakly-supervised + re-ranker dev accuracy " << 100 * m.accuracy
           << " (want >= 78), consistency " << 100 * m.consistency << " (want >= 58)";
    report(11, m.accuracy >= 0.78 && m.consistency >= 0.58, detail.str());
  }
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criteria_8_to_11();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT") << " ("
            << secs << "s)" << std::endl;
  return failures == 0 ? 0 : 1;
}
