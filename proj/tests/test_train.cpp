#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "absparse/train.hpp"

using namespace absparse;

namespace {

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

ExampleGroup group_for(const Program& gold, const std::string& utterance, int n_pairs,
                       std::uint64_t seed) {
  ExampleGroup g;
  g.raw_utterance = utterance;
  g.utterance = toks(utterance);
  WorldSpec spec;
  spec.items_per_box = {2, 2, 2};
  for (int j = 0; j < n_pairs; ++j) {
    const KnowledgeBase kb = sample_world(seed * 97 + j, spec);
    g.pairs.emplace_back(kb, execute(gold, kb));
  }
  return g;
}

}  // namespace

TEST_CASE("tied reward is 1 only when all four denotations match") {
  CHECK(reward_denotations({true, false, true, true}, {true, false, true, true}));
  CHECK_FALSE(reward_denotations({true, false, true, true}, {true, false, true, false}));
  CHECK_FALSE(reward_denotations({false, false, false, false}, {true, false, false, false}));

  const Program gold =
      Program::parse("Exist Filter ALL_ITEMS lambda IsYellow x");
  const ExampleGroup g = group_for(gold, "there is a yellow item", 4, 3);
  CHECK(tied_reward(gold, g) == 1);
  // a program wrong on at least one KB earns nothing
  int disagreements = 0;
  const Program other = Program::parse("Exist Filter ALL_ITEMS lambda IsBlue x");
  for (const auto& [kb, label] : g.pairs)
    disagreements += execute(other, kb) != label ? 1 : 0;
  if (disagreements > 0) CHECK(tied_reward(other, g) == 0);
  CHECK(per_example_rewards(gold, g) == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("coin-flip denotations: acceptance halves per KB and hits 1/16 tied") {
  std::mt19937_64 rng(123);
  std::bernoulli_distribution coin(0.5);
  const int trials = 10000;
  int single_hits = 0, tied_hits = 0;
  for (int i = 0; i < trials; ++i) {
    std::vector<bool> denots, labels;
    for (int j = 0; j < 4; ++j) {
      denots.push_back(coin(rng));
      labels.push_back(coin(rng));
    }
    single_hits += denots[0] == labels[0] ? 1 : 0;
    tied_hits += reward_denotations(denots, labels) ? 1 : 0;
  }
  CHECK(single_hits / double(trials) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(tied_hits / double(trials) == doctest::Approx(1.0 / 16).epsilon(0.16));
}

TEST_CASE("meritocratic weights specialize at the beta extremes") {
  const std::vector<double> logprobs = {-1.0, -2.0, -3.0, -0.5};
  const std::vector<int> rewards = {1, 1, 0, 1};

  // beta = 1: proportional to model probability among rewarded programs
  const auto w1 = meritocratic_weights(logprobs, rewards, 1.0);
  const double z = std::exp(-1.0) + std::exp(-2.0) + std::exp(-0.5);
  CHECK(w1[0] == doctest::Approx(std::exp(-1.0) / z));
  CHECK(w1[1] == doctest::Approx(std::exp(-2.0) / z));
  CHECK(w1[2] == 0.0);
  CHECK(w1[3] == doctest::Approx(std::exp(-0.5) / z));

  // beta = 0: uniform over rewarded programs
  const auto w0 = meritocratic_weights(logprobs, rewards, 0.0);
  for (std::size_t i = 0; i < w0.size(); ++i)
    CHECK(w0[i] == doctest::Approx(rewards[i] ? 1.0 / 3 : 0.0));

  // weights always sum to 1 when anything is rewarded
  const auto wh = meritocratic_weights(logprobs, rewards, 0.5);
  CHECK(wh[0] + wh[1] + wh[2] + wh[3] == doctest::Approx(1.0));

  // nothing rewarded: all-zero
  const auto none = meritocratic_weights(logprobs, {0, 0, 0, 0}, 0.5);
  for (double v : none) CHECK(v == 0.0);

  // extreme log-probabilities stay finite in log space
  const auto wx = meritocratic_weights({-700.0, -701.0}, {1, 1}, 0.5);
  CHECK(wx[0] + wx[1] == doctest::Approx(1.0));
}

TEST_CASE("train config round-trips through the flat key=value format") {
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 4;
  cfg.beam_size = 17;
  cfg.beta = 0.25;
  cfg.one_example_reward = true;
  cfg.no_cache = true;
  cfg.seed = 99;
  const std::string path = "/tmp/absparse_test_cfg.txt";
  cfg.save(path);
  const TrainConfig back = TrainConfig::load(path);
  CHECK(back.lr == cfg.lr);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.beam_size == cfg.beam_size);
  CHECK(back.beta == cfg.beta);
  CHECK(back.one_example_reward == cfg.one_example_reward);
  CHECK(back.no_cache == cfg.no_cache);
  CHECK(back.seed == cfg.seed);
  std::remove(path.c_str());

  const DecodeOptions opts = back.decode_options();
  CHECK(opts.beam_size == 17);
  CHECK_FALSE(opts.use_cache);
}

TEST_CASE("supervised training memorizes a single example") {
  Vocab vocab;
  vocab.min_count = 1;
  for (const char* w : {"there", "is", "a", "yellow", "square"}) {
    vocab.raw_counts[w] = 9;
    vocab.lemma_counts[w] = 9;
  }
  TrainConfig cfg;
  cfg.emb = 4;
  cfg.lstm = 5;
  cfg.hidden = 8;
  cfg.history = 2;
  cfg.epochs = 150;
  cfg.lr = 0.01;
  cfg.batch_size = 1;
  cfg.use_cbow = false;
  const TokenSubset subset = TokenSubset::of(
      {"Exist", "ALL_ITEMS", "Filter", "lambda", "IsYellow", "IsSquare", "IsBlue", "x",
       "And"});
  Model model = build_model(vocab, ProgVocab::from_subset(subset), cfg);

  GeneratedPair ex;
  ex.utterance = toks("there is a yellow square");
  ex.program = Program::parse("Exist Filter ALL_ITEMS lambda And IsYellow x IsSquare x");
  const SupervisedStats stats = train_supervised(model, {ex}, {}, cfg);
  CHECK(stats.final_train_loss < 0.01);
  CHECK(greedy_decode(model, ex.utterance, 12) == ex.program);
}

TEST_CASE("fixed seeds give bit-identical training runs") {
  Vocab vocab;
  vocab.min_count = 1;
  for (const char* w : {"a", "b", "yellow", "blue"}) {
    vocab.raw_counts[w] = 9;
    vocab.lemma_counts[w] = 9;
  }
  TrainConfig cfg;
  cfg.emb = 3;
  cfg.lstm = 4;
  cfg.hidden = 5;
  cfg.history = 2;
  cfg.epochs = 5;
  cfg.use_cbow = false;
  const TokenSubset subset =
      TokenSubset::of({"Exist", "ALL_ITEMS", "Filter", "lambda", "IsYellow", "IsBlue", "x"});

  std::vector<GeneratedPair> data;
  GeneratedPair e1{toks("a yellow b"),
                   Program::parse("Exist Filter ALL_ITEMS lambda IsYellow x")};
  GeneratedPair e2{toks("a blue b"),
                   Program::parse("Exist Filter ALL_ITEMS lambda IsBlue x")};
  data = {e1, e2};

  auto run = [&]() {
    Model m = build_model(vocab, ProgVocab::from_subset(subset), cfg);
    train_supervised(m, data, {}, cfg);
    const std::string path = "/tmp/absparse_test_det.ckpt";
    m.save(path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::remove(path.c_str());
    return ss.str();
  };
  CHECK(run() == run());
}
