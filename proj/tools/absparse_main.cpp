// absparse: weakly-supervised semantic parsing over structured scenes.
//
// Subcommands cover the full pipeline: corpus ingestion, synthetic worlds,
// abstraction coverage, the rule-based parser, data augmentation, supervised
// and weakly-supervised training, re-ranker training, evaluation, single
// utterance parsing, and cache inspection.

#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "absparse/augment.hpp"
#include "absparse/metrics.hpp"
#include "absparse/search.hpp"
#include "absparse/train.hpp"

using namespace absparse;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
  std::uint64_t seed = 1;
  bool deterministic = false;
  int workers = 1;
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "RNG seed");
  cmd->add_flag("--deterministic", opts.deterministic,
                "force bit-reproducible output (single worker)");
  cmd->add_option("--workers", opts.workers, "parallel workers for evaluation");
  cmd->add_option("--config", opts.config_path, "flat key=value training config file");
}

TrainConfig make_config(const CommonOpts& opts) {
  TrainConfig cfg;
  if (!opts.config_path.empty()) cfg = TrainConfig::load(opts.config_path);
  cfg.seed = opts.seed;
  return cfg;
}

int effective_workers(const CommonOpts& opts) {
  if (opts.deterministic) return 1;
  return std::max(1, opts.workers);
}

std::vector<ExampleGroup> load_groups(const std::string& path, const Vocab& vocab) {
  auto groups = group_by_utterance(load_corpus(path, CorpusFormat::Canonical));
  for (auto& g : groups) g.utterance = preprocess(g.raw_utterance, vocab);
  return groups;
}

Vocab corpus_vocab(const std::string& path, int min_count) {
  std::vector<std::string> sentences;
  for (const auto& rec : load_corpus(path, CorpusFormat::Canonical))
    sentences.push_back(rec.sentence);
  return build_vocab(sentences, min_count);
}

std::vector<GeneratedPair> load_generated(const std::string& path, const Vocab& vocab) {
  std::vector<GeneratedPair> out;
  std::size_t index = 0;
  for (const auto& rec : load_corpus(path, CorpusFormat::Canonical)) {
    if (!rec.program_text)
      throw Error("record " + std::to_string(index) + " of " + path +
                  " has no program column (needed for supervised training)");
    out.push_back(GeneratedPair{preprocess(rec.sentence, vocab),
                                Program::parse(*rec.program_text)});
    ++index;
  }
  return out;
}

// Evaluation with optional worker parallelism. Parsing is read-only over the
// model; results land in a preallocated slot per group, so the output is
// identical for any worker count.
Metrics evaluate_parallel(const GroupParser& parser, const std::vector<ExampleGroup>& groups,
                          int workers, std::vector<GroupVerdict>* verdicts) {
  if (workers <= 1) return evaluate(parser, groups, verdicts);
  std::vector<RuleParseResult> parses(groups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= groups.size()) return;
      parses[i] = parser(groups[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::size_t cursor = 0;
  return evaluate([&](const ExampleGroup&) { return parses[cursor++]; }, groups, verdicts);
}

void write_report(const std::string& path, const Metrics& m,
                  const std::vector<GroupVerdict>& verdicts) {
  ordered_json j;
  j["format"] = "absparse-report v1";
  j["accuracy"] = m.accuracy;
  j["consistency"] = m.consistency;
  j["examples"] = m.n_examples;
  j["groups"] = m.n_groups;
  ordered_json jv = ordered_json::array();
  for (const auto& v : verdicts) {
    ordered_json e;
    e["utterance"] = v.utterance;
    e["program"] = v.program;
    e["fallback"] = v.fallback;
    e["predictions"] = v.predictions;
    e["labels"] = v.labels;
    e["consistent"] = v.consistent;
    jv.push_back(e);
  }
  j["verdicts"] = jv;
  std::ofstream out(path);
  if (!out) throw Error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly-supervised semantic parser for visual reasoning over structured scenes"};
  app.require_subcommand(1);

  try {
    // ---- ingest ------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "convert a corpus to the canonical format");
    std::string in_path, out_path, format = "canonical", map_path;
    ingest->add_option("--in", in_path, "input corpus")->required();
    ingest->add_option("--out", out_path, "output canonical corpus")->required();
    ingest->add_option("--format", format, "input format: canonical|cnlvr");
    ingest->add_option("--map", map_path, "field map config for the cnlvr format");
    ingest->callback([&]() {
      std::vector<CorpusRecord> records;
      if (format == "cnlvr") {
        if (map_path.empty()) throw Error("--format cnlvr requires --map");
        const CnlvrFieldMap map = CnlvrFieldMap::load(map_path);
        records = load_corpus(in_path, CorpusFormat::Cnlvr, &map);
      } else if (format == "canonical") {
        records = load_corpus(in_path, CorpusFormat::Canonical);
      } else {
        throw Error("unknown format '" + format + "'");
      }
      save_corpus(records, out_path);
      std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
    });

    // ---- sample-world --------------------------------------------------------
    auto* sample = app.add_subcommand("sample-world", "generate a synthetic knowledge base");
    CommonOpts sample_opts;
    std::string boxes_spec = "2,2,2";
    add_common(sample, sample_opts);
    sample->add_option("--boxes", boxes_spec, "items per box, e.g. 2,3,1");
    sample->callback([&]() {
      WorldSpec spec;
      std::istringstream in(boxes_spec);
      std::string part;
      for (int b = 0; b < kNumBoxes && std::getline(in, part, ','); ++b)
        spec.items_per_box[b] = std::stoi(part);
      CorpusRecord rec;
      rec.sentence = "";
      rec.label = false;
      rec.kb = sample_world(sample_opts.seed, spec);
      std::cout << record_to_json(rec) << "\n";
    });

    // ---- coverage -------------------------------------------------------------
    auto* coverage = app.add_subcommand("coverage", "abstract pattern coverage of a corpus");
    std::string cov_corpus, cov_lexicon, cov_report;
    int cov_topk = 200;
    coverage->add_option("--corpus", cov_corpus)->required();
    coverage->add_option("--lexicon", cov_lexicon)->required();
    coverage->add_option("--top", cov_topk, "patterns counted for cumulative coverage");
    coverage->add_option("--report", cov_report, "write the histogram as JSON");
    coverage->callback([&]() {
      const Lexicon lex = Lexicon::load(cov_lexicon);
      const auto records = load_corpus(cov_corpus, CorpusFormat::Canonical);
      std::vector<std::string> sentences;
      for (const auto& r : records) sentences.push_back(r.sentence);
      const Vocab vocab = build_vocab(sentences, 5);
      std::vector<std::vector<std::string>> utterances;
      for (const auto& g : group_by_utterance(records))
        utterances.push_back(preprocess(g.raw_utterance, vocab));
      const CoverageReport report = coverage_report(utterances, lex);
      std::cout << "utterances: " << report.total_utterances << "\n"
                << "distinct abstract patterns: " << report.distinct_patterns() << "\n"
                << "top-" << cov_topk << " coverage: " << report.top_k_coverage(cov_topk)
                << "\n";
      if (!cov_report.empty()) {
        ordered_json j;
        j["format"] = "absparse-coverage v1";
        j["utterances"] = report.total_utterances;
        j["distinct_patterns"] = report.distinct_patterns();
        j["top_k"] = cov_topk;
        j["top_k_coverage"] = report.top_k_coverage(cov_topk);
        ordered_json hist = ordered_json::array();
        for (const auto& [pattern, count] : report.histogram)
          hist.push_back(ordered_json{{"pattern", pattern}, {"count", count}});
        j["histogram"] = hist;
        std::ofstream(cov_report) << j.dump(2) << "\n";
      }
    });

    // ---- rule-parse -------------------------------------------------------------
    auto* rule = app.add_subcommand("rule-parse", "rule-based parsing via annotated patterns");
    CommonOpts rule_opts;
    std::string rule_corpus, rule_ann, rule_lexicon, rule_utt, rule_report;
    add_common(rule, rule_opts);
    rule->add_option("--corpus", rule_corpus, "canonical corpus to evaluate on");
    rule->add_option("--annotations", rule_ann)->required();
    rule->add_option("--lexicon", rule_lexicon)->required();
    rule->add_option("--utterance", rule_utt, "parse a single utterance instead");
    rule->add_option("--report", rule_report, "write per-group verdicts as JSON");
    rule->callback([&]() {
      const Lexicon lex = Lexicon::load(rule_lexicon);
      const AnnotationSet ann = AnnotationSet::load(rule_ann, lex);
      if (!rule_utt.empty()) {
        const auto tokens = tokenize(rule_utt);
        std::vector<std::string> lemmas;
        for (const auto& t : tokens) lemmas.push_back(lemmatize(t));
        const RuleParseResult r = rule_parse(lemmas, ann, lex);
        if (r.program)
          std::cout << r.program->text() << "\n";
        else
          std::cout << "TRUE (fallback)\n";
        return;
      }
      if (rule_corpus.empty()) throw Error("need --corpus or --utterance");
      const Vocab vocab = corpus_vocab(rule_corpus, 5);
      const auto groups = load_groups(rule_corpus, vocab);
      std::vector<GroupVerdict> verdicts;
      const Metrics m = evaluate(
          [&](const ExampleGroup& g) { return rule_parse(g.utterance, ann, lex); }, groups,
          &verdicts);
      std::cout << "accuracy " << m.accuracy << " consistency " << m.consistency << " over "
                << m.n_examples << " examples / " << m.n_groups << " groups\n";
      if (!rule_report.empty()) write_report(rule_report, m, verdicts);
    });

    // ---- augment -------------------------------------------------------------
    auto* augment = app.add_subcommand("augment", "generate utterance-program pairs");
    CommonOpts aug_opts;
    std::string aug_ann, aug_lexicon, aug_out, aug_val_out;
    int aug_n = 6158, aug_val_size = 0;
    add_common(augment, aug_opts);
    augment->add_option("--annotations", aug_ann)->required();
    augment->add_option("--lexicon", aug_lexicon)->required();
    augment->add_option("--n", aug_n, "number of distinct pairs");
    augment->add_option("--out", aug_out)->required();
    augment->add_option("--val-out", aug_val_out, "validation split output");
    augment->add_option("--val-size", aug_val_size, "validation pair count");
    augment->callback([&]() {
      const Lexicon lex = Lexicon::load(aug_lexicon);
      const AnnotationSet ann = AnnotationSet::load(aug_ann, lex);
      std::vector<std::string> warnings;
      const auto pairs = generate(ann, lex, aug_n, aug_opts.seed, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      if (aug_val_size > 0 && !aug_val_out.empty()) {
        const GeneratedSplit split = split_generated(pairs, aug_val_size, aug_opts.seed);
        save_corpus(pairs_to_corpus(split.train, aug_opts.seed + 1), aug_out);
        save_corpus(pairs_to_corpus(split.validation, aug_opts.seed + 2), aug_val_out);
        std::cout << "wrote " << split.train.size() << " train / " << split.validation.size()
                  << " validation pairs\n";
      } else {
        save_corpus(pairs_to_corpus(pairs, aug_opts.seed + 1), aug_out);
        std::cout << "wrote " << pairs.size() << " pairs to " << aug_out << "\n";
      }
    });

    // ---- train-sup ----------------------------------------------------------
    auto* tsup = app.add_subcommand("train-sup", "supervised training on generated pairs");
    CommonOpts tsup_opts;
    std::string tsup_corpus, tsup_val, tsup_out;
    bool tsup_no_cbow = false;
    int tsup_epochs = 0;
    add_common(tsup, tsup_opts);
    tsup->add_option("--corpus", tsup_corpus, "generated corpus with program column")
        ->required();
    tsup->add_option("--val-corpus", tsup_val, "held-out generated corpus");
    tsup->add_option("--out", tsup_out, "checkpoint path")->required();
    tsup->add_option("--epochs", tsup_epochs, "override config epochs");
    tsup->add_flag("--no-cbow", tsup_no_cbow, "random embedding init instead of CBOW");
    tsup->callback([&]() {
      TrainConfig cfg = make_config(tsup_opts);
      if (tsup_epochs > 0) cfg.epochs = tsup_epochs;
      if (tsup_no_cbow) cfg.use_cbow = false;
      const Vocab vocab = corpus_vocab(tsup_corpus, cfg.min_count);
      const auto train = load_generated(tsup_corpus, vocab);
      std::vector<GeneratedPair> val;
      if (!tsup_val.empty()) val = load_generated(tsup_val, vocab);
      std::vector<std::vector<std::string>> cbow;
      for (const auto& p : train) cbow.push_back(p.utterance);
      Model model = build_model(vocab, ProgVocab::full(), cfg, &cbow);
      const SupervisedStats stats = train_supervised(model, train, val, cfg, &std::cout);
      model.save(tsup_out);
      std::cout << "best val exact-match " << stats.best_val_exact << " (epoch "
                << stats.best_epoch << "); checkpoint written to " << tsup_out << "\n";
    });

    // ---- train-weak ------------------------------------------------------------
    auto* tweak = app.add_subcommand("train-weak", "weakly-supervised training");
    CommonOpts tweak_opts;
    std::string tweak_corpus, tweak_dev, tweak_init, tweak_out, tweak_cache_out,
        tweak_lexicon, tweak_cache_in;
    bool f_no_cache = false, f_cache_final = false, f_one_example = false,
         f_no_warmstart = false;
    int tweak_epochs = 0;
    add_common(tweak, tweak_opts);
    tweak->add_option("--corpus", tweak_corpus)->required();
    tweak->add_option("--dev-corpus", tweak_dev, "dev corpus for early stopping");
    tweak->add_option("--init", tweak_init, "supervised warm-start checkpoint");
    tweak->add_option("--lexicon", tweak_lexicon)->required();
    tweak->add_option("--out", tweak_out)->required();
    tweak->add_option("--cache-out", tweak_cache_out, "serialize the abstract cache");
    tweak->add_option("--cache-in", tweak_cache_in, "start from a serialized cache");
    tweak->add_option("--epochs", tweak_epochs, "override config epochs");
    tweak->add_flag("--no-cache", f_no_cache, "disable the abstract cache (-BeamCache)");
    tweak->add_flag("--cache-final-only", f_cache_final,
                    "no per-step prefix injection (-EveryStepBeamCache)");
    tweak->add_flag("--one-example-reward", f_one_example,
                    "per-KB rewards instead of tied rewards (OneExampleReward)");
    tweak->add_flag("--no-warmstart", f_no_warmstart, "random initialization (Randomer-style)");
    tweak->callback([&]() {
      TrainConfig cfg = make_config(tweak_opts);
      if (tweak_epochs > 0) cfg.epochs = tweak_epochs;
      cfg.no_cache = f_no_cache;
      cfg.cache_final_only = f_cache_final;
      cfg.one_example_reward = f_one_example;
      cfg.no_warmstart = f_no_warmstart;
      const Lexicon lex = Lexicon::load(tweak_lexicon);

      Model model;
      if (!cfg.no_warmstart) {
        if (tweak_init.empty()) throw Error("need --init (or --no-warmstart)");
        model = Model::load(tweak_init);
      } else {
        const Vocab vocab = corpus_vocab(tweak_corpus, cfg.min_count);
        model = build_model(vocab, ProgVocab::full(), cfg);
      }
      auto groups = load_groups(tweak_corpus, model.vocab);
      std::vector<ExampleGroup> dev;
      if (!tweak_dev.empty()) dev = load_groups(tweak_dev, model.vocab);

      Cache cache;
      if (!tweak_cache_in.empty()) cache = Cache::load(tweak_cache_in);
      const WeakStats stats = train_weak(model, groups, cfg, cache, lex,
                                         dev.empty() ? nullptr : &dev, &std::cout);
      model.save(tweak_out);
      if (!tweak_cache_out.empty()) cache.save(tweak_cache_out);
      std::cout << "final top-1 tied reward " << stats.final_top1_tied << " after "
                << stats.epochs_run << " epochs; checkpoint written to " << tweak_out << "\n";
    });

    // ---- train-rerank ------------------------------------------------------------
    auto* trr = app.add_subcommand("train-rerank", "train the discriminative re-ranker");
    CommonOpts trr_opts;
    std::string trr_corpus, trr_model, trr_out, trr_lexicon, trr_cache;
    int trr_epochs = 0;
    add_common(trr, trr_opts);
    trr->add_option("--corpus", trr_corpus)->required();
    trr->add_option("--model", trr_model, "trained parser checkpoint (theta, kept fixed)")
        ->required();
    trr->add_option("--lexicon", trr_lexicon)->required();
    trr->add_option("--cache", trr_cache, "serialized cache used during decoding");
    trr->add_option("--out", trr_out)->required();
    trr->add_option("--epochs", trr_epochs, "override config epochs");
    trr->callback([&]() {
      TrainConfig cfg = make_config(trr_opts);
      if (trr_epochs > 0) cfg.epochs = trr_epochs;
      const Lexicon lex = Lexicon::load(trr_lexicon);
      const Model theta = Model::load(trr_model);
      auto groups = load_groups(trr_corpus, theta.vocab);
      Cache cache;
      const Cache* cache_ptr = nullptr;
      if (!trr_cache.empty()) {
        cache = Cache::load(trr_cache);
        cache_ptr = &cache;
      } else {
        cfg.no_cache = true;
      }
      Model psi = build_model(theta.vocab, theta.prog_vocab, cfg);
      train_rerank(psi, theta, groups, cfg, cache_ptr, lex, &std::cout);
      psi.save(trr_out);
      std::cout << "re-ranker checkpoint written to " << trr_out << "\n";
    });

    // ---- eval ---------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained parser");
    CommonOpts eval_opts;
    std::string eval_model, eval_rerank, eval_corpus, eval_lexicon, eval_report, eval_cache;
    bool eval_use_cache = false;
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--model", eval_model)->required();
    eval_cmd->add_option("--rerank", eval_rerank, "re-ranker checkpoint");
    eval_cmd->add_option("--corpus", eval_corpus)->required();
    eval_cmd->add_option("--lexicon", eval_lexicon)->required();
    eval_cmd->add_option("--cache", eval_cache, "serialized cache for retrieval");
    eval_cmd->add_flag("--use-cache", eval_use_cache, "inject cache programs at eval time");
    eval_cmd->add_option("--report", eval_report, "metrics + per-group verdicts JSON");
    eval_cmd->callback([&]() {
      const TrainConfig cfg = make_config(eval_opts);
      const Lexicon lex = Lexicon::load(eval_lexicon);
      const Model model = Model::load(eval_model);
      Model rerank_model;
      const Model* rerank_ptr = nullptr;
      if (!eval_rerank.empty()) {
        rerank_model = Model::load(eval_rerank);
        rerank_ptr = &rerank_model;
      }
      Cache cache;
      const Cache* cache_ptr = nullptr;
      DecodeOptions opts = cfg.decode_options();
      opts.use_cache = false;
      if (eval_use_cache) {
        if (eval_cache.empty()) throw Error("--use-cache requires --cache");
        cache = Cache::load(eval_cache);
        cache_ptr = &cache;
        opts.use_cache = true;
      }
      const auto groups = load_groups(eval_corpus, model.vocab);
      std::vector<GroupVerdict> verdicts;
      const Metrics m = evaluate_parallel(
          [&](const ExampleGroup& g) {
            return neural_parse(model, rerank_ptr, g.utterance, lex, cache_ptr, opts);
          },
          groups, effective_workers(eval_opts), &verdicts);
      std::cout << "accuracy " << m.accuracy << " consistency " << m.consistency << " over "
                << m.n_examples << " examples / " << m.n_groups << " groups\n";
      if (!eval_report.empty()) write_report(eval_report, m, verdicts);
    });

    // ---- parse ---------------------------------------------------------------------
    auto* parse_cmd = app.add_subcommand("parse", "parse a single utterance");
    CommonOpts parse_opts;
    std::string parse_model, parse_rerank, parse_utt, parse_lexicon, parse_cache;
    int parse_beam = 0;
    add_common(parse_cmd, parse_opts);
    parse_cmd->add_option("--model", parse_model)->required();
    parse_cmd->add_option("--rerank", parse_rerank);
    parse_cmd->add_option("--lexicon", parse_lexicon)->required();
    parse_cmd->add_option("--cache", parse_cache);
    parse_cmd->add_option("--utterance", parse_utt)->required();
    parse_cmd->add_option("--beam", parse_beam, "print the top beam candidates");
    parse_cmd->callback([&]() {
      const TrainConfig cfg = make_config(parse_opts);
      const Lexicon lex = Lexicon::load(parse_lexicon);
      const Model model = Model::load(parse_model);
      Model rerank_model;
      const Model* rerank_ptr = nullptr;
      if (!parse_rerank.empty()) {
        rerank_model = Model::load(parse_rerank);
        rerank_ptr = &rerank_model;
      }
      Cache cache;
      const Cache* cache_ptr = nullptr;
      DecodeOptions opts = cfg.decode_options();
      opts.use_cache = false;
      if (!parse_cache.empty()) {
        cache = Cache::load(parse_cache);
        cache_ptr = &cache;
        opts.use_cache = true;
      }
      const auto tokens = model.preprocess_raw(parse_utt);
      std::cout << "tokens: " << join_tokens(tokens) << "\n";
      if (parse_beam > 0) {
        DecodeOptions bopts = opts;
        bopts.beam_size = parse_beam;
        for (const auto& sp : beam_decode(tokens, model, lex, cache_ptr, bopts))
          std::cout << sp.logprob << (sp.from_cache ? "  [cache] " : "  ") << sp.program.text()
                    << "\n";
        return;
      }
      const RuleParseResult r = neural_parse(model, rerank_ptr, tokens, lex, cache_ptr, opts);
      if (r.program)
        std::cout << r.program->text() << "\n";
      else
        std::cout << "TRUE (fallback: empty beam)\n";
    });

    // ---- cache-dump -------------------------------------------------------------------
    auto* cdump = app.add_subcommand("cache-dump", "inspect a serialized abstract cache");
    std::string cdump_path;
    int cdump_top = 3;
    cdump->add_option("--cache", cdump_path)->required();
    cdump->add_option("--top", cdump_top, "entries shown per abstract utterance");
    cdump->callback([&]() {
      const Cache cache = Cache::load(cdump_path);
      std::cout << cache.key_count() << " abstract utterances, " << cache.entry_count()
                << " cached programs\n";
      for (const auto& [key, entries] : cache.contents()) {
        std::cout << key << "\n";
        const auto top = cache.top(key, cdump_top);
        for (const auto& e : top)
          std::cout << "  avg " << e.average() << " count " << e.count << "  "
                    << e.program.tokens_text() << "\n";
      }
    });

    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
