// biaslens command-line front end. Each subcommand runs one stage on files;
// `run` executes the whole config-driven pipeline.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "biaslens/biaslens.hpp"

using namespace biaslens;

namespace {

template <class F>
void with_output(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_output(path);
  body(out);
  if (!out.flush()) throw DataError("failed writing '" + path + "'");
}

Vocabulary load_vocab(const std::string& path) {
  auto in = open_input(path);
  return read_vocab(in);
}

std::vector<Sentence> load_corpus(const std::string& path, unsigned threads) {
  auto in = open_input(path);
  return tokenize_normalize(in, threads);
}

std::shared_ptr<const EmbeddingModel> load_model(const std::string& path) {
  auto in = open_input(path);
  return std::make_shared<const EmbeddingModel>(read_embx(in));
}

std::shared_ptr<const CoocMatrix> load_cooc(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  return std::make_shared<const CoocMatrix>(read_cooc(in, vocab));
}

std::vector<WordId> lookup_words(const std::vector<std::string>& words, const Vocabulary& vocab) {
  std::vector<WordId> ids;
  for (const auto& w : words) {
    if (auto id = vocab.find(w))
      ids.push_back(*id);
    else
      warn("'" + w + "' is not in the vocabulary; skipped");
  }
  return ids;
}

std::vector<WordId> all_words(const Vocabulary& vocab) {
  std::vector<WordId> ids(vocab.size());
  for (WordId i = 0; i < vocab.size(); ++i) ids[i] = i;
  return ids;
}

/// Inputs shared by `bias` and `correlate`.
struct ScoringInputs {
  std::string vocab, model, cooc, z, z_prime, pairs;
  std::vector<std::string> representations{"sg"};
  std::vector<std::string> measures{"weam2nd"};
  double alpha = 0.75;
  std::uint64_t shift = 1;
  double noise_exponent = 0.75;

  void add_options(CLI::App* app) {
    app->add_option("--vocab", vocab, "vocabulary file")->required();
    app->add_option("--model", model, "trained model (.embx)");
    app->add_option("--cooc", cooc, "co-occurrence counts");
    app->add_option("--lexicon-z", z, "word list of concept Z (e.g. female)")->required();
    app->add_option("--lexicon-z-prime", z_prime, "word list of concept Z'")->required();
    app->add_option("--pairs", pairs, "x<TAB>x' pair list (directional)");
    app->add_option("--representation", representations, "sg, glove, ppmi, init_glove, esg, eglove")->delimiter(',');
    app->add_option("--measure", measures, "directional, centroid, weam2nd, weam1st")->delimiter(',');
    app->add_option("--alpha", alpha, "PPMI context smoothing");
    app->add_option("--shift", shift, "PPMI shift k");
    app->add_option("--noise-exponent", noise_exponent, "eSG noise exponent");
  }
};

/// Loads whatever the requested representations need into `set`.
void load_representations(const ScoringInputs& in, const Vocabulary& vocab, RepresentationSet& set, unsigned threads,
                          std::vector<std::pair<Representation, Measure>>& combos) {
  bool need_model = false, need_cooc = false;
  for (const auto& rs : in.representations) {
    const auto r = parse_representation(rs);
    for (const auto& ms : in.measures) {
      const auto m = parse_measure(ms);
      if (applicable(r, m))
        combos.emplace_back(r, m);
      else
        warn(ms + " does not apply to " + rs + "; skipped");
    }
    if (r == Representation::ppmi || r == Representation::init_glove) need_cooc = true;
    if (r == Representation::sg || r == Representation::esg || r == Representation::glove || r == Representation::eglove)
      need_model = true;
  }
  if (combos.empty()) throw ConfigError("no measure applies to the given representations");
  if (need_model) {
    if (in.model.empty()) throw ConfigError("--model is required for embedding-based representations");
    auto m = load_model(in.model);
    if (m->tag == ModelTag::sgns) {
      set.set_sg(m);
      set.set_esg(std::make_unique<EsgView>(m, noise_table(vocab, in.noise_exponent), threads));
    } else {
      set.set_glove(m);
    }
  }
  if (need_cooc) {
    if (in.cooc.empty()) throw ConfigError("--cooc is required for ppmi and init_glove");
    set.set_cooc(load_cooc(in.cooc, vocab), in.alpha, in.shift);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure first- and second-order gender bias in word representations."};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // tokenize
  std::string tok_in, tok_out = "-";
  auto* tokenize = app.add_subcommand("tokenize", "normalize a raw corpus to one sentence per line");
  tokenize->add_option("input", tok_in, "raw corpus")->required();
  tokenize->add_option("-o,--output", tok_out, "output file");

  // vocab
  std::string voc_corpus, voc_out = "-";
  std::uint64_t voc_min = 5;
  auto* vocab_cmd = app.add_subcommand("vocab", "build the vocabulary");
  vocab_cmd->add_option("corpus", voc_corpus)->required();
  vocab_cmd->add_option("--min-count", voc_min);
  vocab_cmd->add_option("-o,--output", voc_out);

  // count
  std::string cnt_corpus, cnt_vocab, cnt_out = "-";
  unsigned cnt_window = 5;
  double sample = 0.0;
  std::uint64_t seed = 1;
  auto* count = app.add_subcommand("count", "count windowed co-occurrences");
  count->add_option("corpus", cnt_corpus)->required();
  count->add_option("--vocab", cnt_vocab)->required();
  count->add_option("--window", cnt_window);
  count->add_option("--sample", sample, "subsampling threshold (0 disables)");
  count->add_option("--seed", seed);
  count->add_option("-o,--output", cnt_out);

  // train-sg
  std::string sg_corpus, sg_vocab, sg_out;
  SgnsConfig sg_cfg;
  auto* train_sg = app.add_subcommand("train-sg", "train skip-gram with negative sampling");
  train_sg->add_option("corpus", sg_corpus)->required();
  train_sg->add_option("--vocab", sg_vocab)->required();
  train_sg->add_option("-o,--output", sg_out)->required();
  train_sg->add_option("--dim", sg_cfg.dim);
  train_sg->add_option("--window", sg_cfg.window);
  train_sg->add_option("--negatives", sg_cfg.negatives);
  train_sg->add_option("--epochs", sg_cfg.epochs);
  train_sg->add_option("--lr", sg_cfg.lr_start);
  train_sg->add_option("--noise-exponent", sg_cfg.noise_exponent);
  train_sg->add_option("--sample", sample);
  train_sg->add_option("--seed", seed);

  // train-glove
  std::string gl_cooc, gl_vocab, gl_out;
  GloveConfig gl_cfg;
  auto* train_gl = app.add_subcommand("train-glove", "train GloVe on co-occurrence counts");
  train_gl->add_option("cooc", gl_cooc)->required();
  train_gl->add_option("--vocab", gl_vocab)->required();
  train_gl->add_option("-o,--output", gl_out)->required();
  train_gl->add_option("--dim", gl_cfg.dim);
  train_gl->add_option("--x-max", gl_cfg.x_max);
  train_gl->add_option("--weight-exp", gl_cfg.weight_exp);
  train_gl->add_option("--epochs", gl_cfg.epochs);
  train_gl->add_option("--lr", gl_cfg.lr);
  train_gl->add_option("--seed", seed);

  // ppmi
  std::string pp_cooc, pp_vocab, pp_out = "-";
  std::vector<std::string> pp_words;
  double pp_alpha = 0.75;
  std::uint64_t pp_shift = 1;
  auto* ppmi = app.add_subcommand("ppmi", "print nonzero PPMI cells");
  ppmi->add_option("cooc", pp_cooc)->required();
  ppmi->add_option("--vocab", pp_vocab)->required();
  ppmi->add_option("--words", pp_words, "rows to print (default: all)")->delimiter(',');
  ppmi->add_option("--alpha", pp_alpha);
  ppmi->add_option("--shift", pp_shift);
  ppmi->add_option("-o,--output", pp_out);

  // reconstruct
  std::string rc_kind = "esg", rc_model, rc_cooc, rc_vocab, rc_out = "-", rc_norms;
  std::vector<std::string> rc_words, rc_contexts;
  double rc_noise = 0.75;
  auto* reconstruct = app.add_subcommand("reconstruct", "explicit rows from a trained model (esg, eglove, init_glove)");
  reconstruct->add_option("--kind", rc_kind)->check(CLI::IsMember({"esg", "eglove", "init_glove"}));
  reconstruct->add_option("--model", rc_model);
  reconstruct->add_option("--cooc", rc_cooc);
  reconstruct->add_option("--vocab", rc_vocab)->required();
  reconstruct->add_option("--words", rc_words)->delimiter(',')->required();
  reconstruct->add_option("--contexts", rc_contexts, "context columns (default: all)")->delimiter(',');
  reconstruct->add_option("--noise-exponent", rc_noise);
  reconstruct->add_option("--norms", rc_norms, "also write the eSG normalizers here");
  reconstruct->add_option("-o,--output", rc_out);

  // bias
  ScoringInputs bias_in;
  std::string bias_targets, bias_out = "-", bias_format = "json", bias_pool = "vocab";
  auto* bias = app.add_subcommand("bias", "bias report for target words");
  bias_in.add_options(bias);
  bias->add_option("--targets", bias_targets, "target word list (word[<TAB>tag])")->required();
  bias->add_option("--pool", bias_pool, "normalization pool")->check(CLI::IsMember({"vocab", "targets"}));
  bias->add_option("--format", bias_format)->check(CLI::IsMember({"json", "tsv", "svg"}));
  bias->add_option("-o,--output", bias_out);

  // correlate
  ScoringInputs cor_in;
  std::vector<std::string> cor_stats;
  std::string cor_out = "-", cor_format = "tsv";
  auto* correlate = app.add_subcommand("correlate", "correlate bias with occupation statistics");
  cor_in.add_options(correlate);
  correlate->add_option("--stats", cor_stats, "name=path of a occupation,percent_female CSV")->required();
  correlate->add_option("--format", cor_format)->check(CLI::IsMember({"json", "tsv"}));
  correlate->add_option("-o,--output", cor_out);

  // cda-experiment
  std::string cda_corpus, cda_z, cda_zp, cda_pairs, cda_occ, cda_out = "-", cda_steps;
  CdaConfig cda_cfg;
  cda_cfg.sgns.dim = 100;
  auto* cda = app.add_subcommand("cda-experiment", "bias before and after counterfactual augmentation");
  cda->add_option("corpus", cda_corpus)->required();
  cda->add_option("--lexicon-z", cda_z)->required();
  cda->add_option("--lexicon-z-prime", cda_zp)->required();
  cda->add_option("--pairs", cda_pairs)->required();
  cda->add_option("--occupations", cda_occ)->required();
  cda->add_option("--min-count", cda_cfg.prep.min_count);
  cda->add_option("--sample", cda_cfg.prep.sample);
  cda->add_option("--window", cda_cfg.window);
  cda->add_option("--dim", cda_cfg.sgns.dim);
  cda->add_option("--epochs", cda_cfg.sgns.epochs);
  cda->add_option("--seed", seed);
  cda->add_option("--steps", cda_steps, "write per-step aggregates here");
  cda->add_option("-o,--output", cda_out, "trajectories TSV");

  // report
  std::string rep_in, rep_out = "-", rep_format = "tsv";
  std::size_t rep_bins = 20;
  auto* report = app.add_subcommand("report", "render a JSON bias report");
  report->add_option("input", rep_in)->required();
  report->add_option("--format", rep_format)->check(CLI::IsMember({"json", "tsv", "svg", "hist-tsv", "hist-svg"}));
  report->add_option("--bins", rep_bins)->check(CLI::PositiveNumber);
  report->add_option("-o,--output", rep_out);

  // run
  std::string run_config;
  bool run_force = false;
  auto* run = app.add_subcommand("run", "run the pipeline described by a config file");
  run->add_option("config", run_config)->required();
  run->add_flag("--force", run_force, "rerun stages even when their artifacts are current");

  // synth
  SyntheticConfig syn_cfg;
  std::string syn_pairs, syn_out = "-", syn_stats;
  auto* synth = app.add_subcommand("synth", "generate a corpus with planted occupation bias");
  synth->add_option("--pairs", syn_pairs)->required();
  synth->add_option("--tokens", syn_cfg.tokens);
  synth->add_option("--seed", syn_cfg.seed);
  synth->add_option("--stats", syn_stats, "write the planted percentages as a statistics CSV");
  synth->add_option("-o,--output", syn_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*tokenize) {
      const auto sentences = load_corpus(tok_in, threads);
      with_output(tok_out, [&](std::ostream& o) { write_sentences(o, sentences); });
    } else if (*vocab_cmd) {
      const auto v = build_vocab(load_corpus(voc_corpus, threads), voc_min, threads);
      with_output(voc_out, [&](std::ostream& o) { write_vocab(o, v); });
    } else if (*count) {
      const auto v = load_vocab(cnt_vocab);
      const auto stream = subsample(encode(load_corpus(cnt_corpus, threads), v), v, sample, seed);
      const auto m = count_cooc(stream, v.size(), cnt_window, threads);
      with_output(cnt_out, [&](std::ostream& o) { write_cooc(o, m, v); });
    } else if (*train_sg) {
      const auto v = load_vocab(sg_vocab);
      const auto stream = subsample(encode(load_corpus(sg_corpus, threads), v), v, sample, seed);
      sg_cfg.seed = seed;
      sg_cfg.threads = threads;
      TrainLog log;
      const auto m = train_sgns(stream, v, sg_cfg, &log);
      for (std::size_t e = 0; e < log.values.size(); ++e)
        std::clog << "epoch " << e + 1 << " objective " << format_double(log.values[e]) << '\n';
      with_output(sg_out, [&](std::ostream& o) { write_embx(o, m); });
    } else if (*train_gl) {
      const auto v = load_vocab(gl_vocab);
      const auto counts = load_cooc(gl_cooc, v);
      gl_cfg.seed = seed;
      gl_cfg.threads = threads;
      TrainLog log;
      const auto m = train_glove(*counts, v, gl_cfg, &log);
      for (std::size_t e = 0; e < log.values.size(); ++e)
        std::clog << "epoch " << e << " loss " << format_double(log.values[e]) << '\n';
      with_output(gl_out, [&](std::ostream& o) { write_embx(o, m); });
    } else if (*ppmi) {
      const auto v = load_vocab(pp_vocab);
      const auto view = ppmi_matrix(load_cooc(pp_cooc, v), pp_alpha, pp_shift);
      const auto rows = pp_words.empty() ? all_words(v) : lookup_words(pp_words, v);
      with_output(pp_out, [&](std::ostream& o) {
        for (auto w : rows)
          for (const auto& [c, x] : view.sparse_row(w)) o << v.word(w) << '\t' << v.word(c) << '\t' << format_double(x) << '\n';
      });
    } else if (*reconstruct) {
      const auto v = load_vocab(rc_vocab);
      const auto rows = lookup_words(rc_words, v);
      const auto cols = rc_contexts.empty() ? all_words(v) : lookup_words(rc_contexts, v);
      if (rc_kind == "init_glove") {
        if (rc_cooc.empty()) throw ConfigError("--cooc is required for init_glove");
        const auto view = init_glove_matrix(load_cooc(rc_cooc, v));
        with_output(rc_out, [&](std::ostream& o) { dump_rows(o, view, v, rows, cols); });
      } else {
        if (rc_model.empty()) throw ConfigError("--model is required for " + rc_kind);
        const auto m = load_model(rc_model);
        m->check_vocab(v);
        if (rc_kind == "esg") {
          if (m->tag != ModelTag::sgns) throw UsageError("eSG needs a skip-gram model");
          const EsgView view(m, noise_table(v, rc_noise), threads);
          if (!rc_norms.empty()) with_output(rc_norms, [&](std::ostream& o) { write_esg_norms(o, view); });
          with_output(rc_out, [&](std::ostream& o) { dump_rows(o, view, v, rows, cols); });
        } else {
          const EGloveView view(m);
          with_output(rc_out, [&](std::ostream& o) { dump_rows(o, view, v, rows, cols); });
        }
      }
    } else if (*bias) {
      const auto v = load_vocab(bias_in.vocab);
      const auto lex = load_lexicon(bias_in.z, bias_in.z_prime, bias_in.pairs);
      RepresentationSet set(v, resolve(lex, v));
      std::vector<std::pair<Representation, Measure>> combos;
      load_representations(bias_in, v, set, threads, combos);
      if (combos.size() != 1) throw ConfigError("bias takes exactly one representation and one measure");
      std::vector<std::string> words;
      for (const auto& o : load_occupations(bias_targets)) words.push_back(o.word);
      const auto targets = lookup_words(words, v);
      if (targets.empty()) throw DataError("no target word is in the vocabulary");
      const auto pool = bias_pool == "vocab" ? all_words(v) : targets;
      const auto [r, m] = combos.front();
      const auto rep = build_report(set.scorer(r, m), v, pool, targets, to_string(m), to_string(r));
      with_output(bias_out, [&](std::ostream& o) { emit_report(o, rep, parse_report_format(bias_format)); });
    } else if (*correlate) {
      const auto v = load_vocab(cor_in.vocab);
      const auto lex = load_lexicon(cor_in.z, cor_in.z_prime, cor_in.pairs);
      RepresentationSet set(v, resolve(lex, v));
      std::vector<std::pair<Representation, Measure>> combos;
      load_representations(cor_in, v, set, threads, combos);
      std::vector<OccupationStats> collections;
      for (const auto& item : cor_stats) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--stats expects name=path, got '" + item + "'");
        const auto name = item.substr(0, eq);
        collections.push_back(load_stats(item.substr(eq + 1), parse_stats_source(name), name));
      }
      std::vector<ScoringMethod> methods;
      for (auto [r, m] : combos) methods.push_back({to_string(r), to_string(m), set.scorer(r, m)});
      const auto rows = correlation_table(methods, v, collections);
      with_output(cor_out, [&](std::ostream& o) { emit_correlation(o, rows, parse_report_format(cor_format)); });
    } else if (*cda) {
      const auto lex = load_lexicon(cda_z, cda_zp, cda_pairs);
      std::vector<std::string> neutral;
      for (const auto& o : load_occupations(cda_occ))
        if (o.tag != "female_specific" && o.tag != "male_specific") neutral.push_back(o.word);
      cda_cfg.prep.seed = cda_cfg.sgns.seed = seed;
      cda_cfg.prep.threads = cda_cfg.sgns.threads = threads;
      cda_cfg.sgns.window = cda_cfg.window;
      const auto res = cda_experiment(load_corpus(cda_corpus, threads), lex, neutral, cda_cfg);
      with_output(cda_out, [&](std::ostream& o) { write_trajectories_tsv(o, res.trajectories); });
      if (!cda_steps.empty()) with_output(cda_steps, [&](std::ostream& o) { write_steps_tsv(o, res.steps); });
    } else if (*report) {
      auto in = open_input(rep_in);
      const auto rep = read_report_json(in);
      with_output(rep_out, [&](std::ostream& o) {
        if (rep_format == "hist-tsv")
          emit_histogram(o, bias_histogram(rep, rep_bins), ReportFormat::tsv);
        else if (rep_format == "hist-svg")
          emit_histogram(o, bias_histogram(rep, rep_bins), ReportFormat::svg);
        else
          emit_report(o, rep, parse_report_format(rep_format));
      });
    } else if (*run) {
      auto cfg = Config::load(run_config);
      cfg.apply_env();
      PipelineOptions opt;
      opt.force = run_force;
      if (app.count("--threads")) opt.max_threads = threads;
      run_pipeline(cfg, opt);
    } else if (*synth) {
      syn_cfg.pairs = load_pairs(syn_pairs);
      const auto corpus = synthetic_corpus(syn_cfg);
      with_output(syn_out, [&](std::ostream& o) { write_sentences(o, corpus.sentences); });
      if (!syn_stats.empty()) {
        with_output(syn_stats, [&](std::ostream& o) {
          o << "occupation,percent_female\n";
          for (std::size_t i = 0; i < syn_cfg.occupations.size(); ++i)
            o << syn_cfg.occupations[i] << ',' << format_double(std::round(1e4 * syn_cfg.ratios[i]) / 100.0) << '\n';
        });
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
