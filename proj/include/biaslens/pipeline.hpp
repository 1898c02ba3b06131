#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "biaslens/config.hpp"
#include "biaslens/cooccur.hpp"
#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/evaluate.hpp"
#include "biaslens/explicit.hpp"
#include "biaslens/glove.hpp"
#include "biaslens/lexicon.hpp"
#include "biaslens/log.hpp"
#include "biaslens/measures.hpp"
#include "biaslens/model.hpp"
#include "biaslens/report.hpp"
#include "biaslens/sgns.hpp"

namespace biaslens {

enum class Representation { sg, glove, ppmi, init_glove, esg, eglove };

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::sg: return "sg";
    case Representation::glove: return "glove";
    case Representation::ppmi: return "ppmi";
    case Representation::init_glove: return "init_glove";
    case Representation::esg: return "esg";
    case Representation::eglove: return "eglove";
  }
  return "?";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "sg") return Representation::sg;
  if (s == "glove") return Representation::glove;
  if (s == "ppmi") return Representation::ppmi;
  if (s == "init_glove") return Representation::init_glove;
  if (s == "esg") return Representation::esg;
  if (s == "eglove") return Representation::eglove;
  throw ConfigError("unknown representation '" + s + "'");
}

inline bool is_explicit(Representation r) { return r != Representation::sg && r != Representation::glove; }

/// weam1st needs a first-order (explicit) view; the second-order measures need
/// dense vectors, which initGloVe cannot provide for unobserved cells.
inline bool applicable(Representation r, Measure m) {
  if (m == Measure::weam1st) return is_explicit(r);
  return r != Representation::init_glove;
}

enum class PoolMode { vocab, targets };

/// Validated run settings. Built from a Config before any work starts.
struct PipelineSettings {
  std::string corpus;
  std::string output_dir;
  std::string lexicon_z;
  std::string lexicon_z_prime;
  std::string lexicon_pairs;
  std::string occupations;
  std::vector<std::pair<std::string, std::string>> stats;
  std::vector<Representation> representations;
  std::vector<Measure> measures;
  PrepConfig prep;
  unsigned window = 5;
  SgnsConfig sgns;
  GloveConfig glove;
  double ppmi_alpha = 0.75;
  std::uint64_t ppmi_shift = 1;
  PoolMode pool = PoolMode::vocab;
  std::size_t bins = 20;
  bool cda = false;
  unsigned threads = 1;

  bool needs(Representation r) const {
    return std::find(representations.begin(), representations.end(), r) != representations.end();
  }
  bool needs_cooc() const {
    return needs(Representation::ppmi) || needs(Representation::init_glove) || needs(Representation::glove) ||
           needs(Representation::eglove);
  }
  bool needs_sg() const { return needs(Representation::sg) || needs(Representation::esg); }
  bool needs_glove() const { return needs(Representation::glove) || needs(Representation::eglove); }

  std::vector<std::pair<Representation, Measure>> combinations() const {
    std::vector<std::pair<Representation, Measure>> out;
    for (auto r : representations)
      for (auto m : measures)
        if (applicable(r, m)) out.emplace_back(r, m);
    return out;
  }
};

namespace detail {

inline std::string existing_input(const Config& cfg, const std::string& key) {
  auto p = cfg.path(key);
  if (!fs::is_regular_file(p)) throw ConfigError("input file for '" + key + "' not found: " + p);
  return p;
}

template <class T>
std::vector<T> unique_list(const Config& cfg, const std::string& key, T (*parse)(const std::string&)) {
  std::vector<T> out;
  for (const auto& s : cfg.get_list(key)) {
    const T v = parse(s);
    if (std::find(out.begin(), out.end(), v) != out.end()) throw ConfigError("'" + s + "' listed twice in " + key);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("key '" + key + "' must list at least one entry");
  return out;
}

}  // namespace detail

inline PipelineSettings settings_from_config(const Config& cfg) {
  PipelineSettings s;
  s.corpus = detail::existing_input(cfg, "corpus");
  s.output_dir = cfg.path("output_dir");
  s.lexicon_z = detail::existing_input(cfg, "lexicon.z");
  s.lexicon_z_prime = detail::existing_input(cfg, "lexicon.z_prime");
  if (cfg.has("lexicon.pairs")) s.lexicon_pairs = detail::existing_input(cfg, "lexicon.pairs");
  s.occupations = detail::existing_input(cfg, "occupations");
  for (const auto& [name, path] : cfg.stats_files()) {
    if (!fs::is_regular_file(path)) throw ConfigError("statistics file for '" + name + "' not found: " + path);
    s.stats.emplace_back(name, path);
  }
  s.representations = detail::unique_list<Representation>(cfg, "representations", parse_representation);
  s.measures = detail::unique_list<Measure>(cfg, "measures", parse_measure);

  auto positive = [&](const std::string& key) {
    const auto v = cfg.get_uint(key);
    if (v < 1) throw ConfigError("key '" + key + "' must be at least 1");
    return v;
  };
  auto positive_real = [&](const std::string& key) {
    const auto v = cfg.get_double(key);
    if (!(v > 0)) throw ConfigError("key '" + key + "' must be positive");
    return v;
  };
  s.threads = static_cast<unsigned>(positive("threads"));
  s.prep.min_count = positive("min_count");
  s.prep.sample = cfg.get_double("sample");
  if (s.prep.sample < 0) throw ConfigError("key 'sample' must be non-negative (0 disables subsampling)");
  s.prep.seed = cfg.get_uint("seed");
  s.prep.threads = s.threads;
  s.window = static_cast<unsigned>(positive("window"));

  s.sgns.dim = positive("sgns.dim");
  s.sgns.window = s.window;
  s.sgns.negatives = static_cast<unsigned>(cfg.get_uint("sgns.negatives"));
  s.sgns.epochs = static_cast<unsigned>(positive("sgns.epochs"));
  s.sgns.lr_start = positive_real("sgns.lr");
  s.sgns.noise_exponent = positive_real("sgns.noise_exponent");
  s.sgns.seed = s.prep.seed;
  s.sgns.threads = s.threads;

  s.glove.dim = positive("glove.dim");
  s.glove.x_max = positive_real("glove.x_max");
  s.glove.weight_exp = positive_real("glove.weight_exp");
  s.glove.epochs = static_cast<unsigned>(positive("glove.epochs"));
  s.glove.lr = positive_real("glove.lr");
  s.glove.seed = s.prep.seed;
  s.glove.threads = s.threads;

  s.ppmi_alpha = cfg.get_double("ppmi.alpha");
  if (!(s.ppmi_alpha > 0 && s.ppmi_alpha <= 1)) throw ConfigError("key 'ppmi.alpha' must lie in (0, 1]");
  s.ppmi_shift = positive("ppmi.shift");

  const auto pool = cfg.get("report.pool");
  if (pool == "vocab")
    s.pool = PoolMode::vocab;
  else if (pool == "targets")
    s.pool = PoolMode::targets;
  else
    throw ConfigError("key 'report.pool' must be vocab or targets");
  s.bins = positive("report.bins");
  s.cda = cfg.get_bool("cda.enabled");

  const bool directional = std::find(s.measures.begin(), s.measures.end(), Measure::directional) != s.measures.end();
  if ((directional || s.cda) && s.lexicon_pairs.empty())
    throw ConfigError("'lexicon.pairs' is required by the directional measure and by cda.enabled");
  if (s.combinations().empty()) throw ConfigError("no listed measure applies to any listed representation");
  for (auto r : s.representations)
    for (auto m : s.measures)
      if (!applicable(r, m)) warn(to_string(m) + " does not apply to " + to_string(r) + "; combination skipped");
  return s;
}

// ---------------------------------------------------------------------------
// Loaded representations and scorers

/// Owns every representation a run needs, so scorers can hold references.
class RepresentationSet {
 public:
  RepresentationSet(const Vocabulary& vocab, ResolvedLexicon lex) : vocab_(&vocab), lex_(std::move(lex)) {}

  void set_sg(std::shared_ptr<const EmbeddingModel> m) {
    m->check_vocab(*vocab_);
    sg_ = std::move(m);
    sg_vectors_ = std::make_unique<EmbeddingVectors>(*sg_);
  }
  void set_glove(std::shared_ptr<const EmbeddingModel> m) {
    m->check_vocab(*vocab_);
    glove_ = std::move(m);
    glove_vectors_ = std::make_unique<EmbeddingVectors>(*glove_);
    eglove_ = std::make_unique<EGloveView>(glove_);
    eglove_vectors_ = std::make_unique<ExplicitVectors<EGloveView>>(*eglove_);
  }
  void set_cooc(std::shared_ptr<const CoocMatrix> m, double alpha, std::uint64_t shift) {
    cooc_ = std::move(m);
    ppmi_ = std::make_unique<PpmiView>(cooc_, alpha, shift);
    ppmi_vectors_ = std::make_unique<ExplicitVectors<PpmiView>>(*ppmi_);
    init_glove_ = std::make_unique<InitGloveView>(cooc_);
  }
  void set_esg(std::unique_ptr<EsgView> v) {
    esg_ = std::move(v);
    esg_vectors_ = std::make_unique<ExplicitVectors<EsgView>>(*esg_);
  }

  const ResolvedLexicon& lexicon() const { return lex_; }

  Scorer scorer(Representation r, Measure m) const {
    auto missing = [&]() -> Scorer { throw UsageError("representation " + to_string(r) + " was not built"); };
    if (m == Measure::weam1st) {
      switch (r) {
        case Representation::ppmi: return ppmi_ ? first_order_scorer(*ppmi_, lex_) : missing();
        case Representation::init_glove: return init_glove_ ? first_order_scorer(*init_glove_, lex_) : missing();
        case Representation::esg: return esg_ ? first_order_scorer(*esg_, lex_) : missing();
        case Representation::eglove: return eglove_ ? first_order_scorer(*eglove_, lex_) : missing();
        default: throw UsageError("weam1st needs an explicit representation, not " + to_string(r));
      }
    }
    switch (r) {
      case Representation::sg: return sg_ ? second_order_scorer(*sg_vectors_, lex_, m) : missing();
      case Representation::glove: return glove_ ? second_order_scorer(*glove_vectors_, lex_, m) : missing();
      case Representation::ppmi: return ppmi_ ? second_order_scorer(*ppmi_vectors_, lex_, m) : missing();
      case Representation::esg: return esg_ ? second_order_scorer(*esg_vectors_, lex_, m) : missing();
      case Representation::eglove: return eglove_ ? second_order_scorer(*eglove_vectors_, lex_, m) : missing();
      case Representation::init_glove: break;
    }
    throw UsageError(to_string(m) + " is not defined on " + to_string(r));
  }

 private:
  const Vocabulary* vocab_;
  ResolvedLexicon lex_;
  std::shared_ptr<const EmbeddingModel> sg_, glove_;
  std::shared_ptr<const CoocMatrix> cooc_;
  std::unique_ptr<PpmiView> ppmi_;
  std::unique_ptr<InitGloveView> init_glove_;
  std::unique_ptr<EsgView> esg_;
  std::unique_ptr<EGloveView> eglove_;
  std::unique_ptr<EmbeddingVectors> sg_vectors_, glove_vectors_;
  std::unique_ptr<ExplicitVectors<PpmiView>> ppmi_vectors_;
  std::unique_ptr<ExplicitVectors<EsgView>> esg_vectors_;
  std::unique_ptr<ExplicitVectors<EGloveView>> eglove_vectors_;
};

// ---------------------------------------------------------------------------
// Artifact helpers

/// FNV-1a over a file's bytes.
inline std::string file_digest(const std::string& path) {
  auto in = open_input(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return hex64(h);
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  fs::create_directories(path.parent_path());
  auto out = open_output(path.string());
  body(out);
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

/// Runs `f`, prefixing any error message with the stage name while keeping its
/// type (and hence the exit code).
template <class F>
decltype(auto) in_stage(const std::string& stage, F&& f) {
  const std::string tag = "[" + stage + "] ";
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError(tag + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const DomainError& e) {
    throw DomainError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const DivergenceError& e) {
    throw DivergenceError(tag + e.what());
  } catch (const std::exception& e) {
    throw Error(tag + e.what());
  }
}

// ---------------------------------------------------------------------------
// run

struct PipelineOptions {
  bool force = false;
  /// Caps the configured worker count when nonzero.
  unsigned max_threads = 0;
  std::ostream* log = &std::clog;
};

struct StageRecord {
  std::string name;
  std::string hash;
  std::vector<std::string> outputs;  // relative to output_dir
  bool skipped = false;
};

struct PipelineResult {
  std::string config_hash;
  std::vector<StageRecord> stages;
};

namespace detail {

inline std::string chain(const std::string& upstream, const std::string& local) {
  return hex64(fnv1a(upstream + "|" + local));
}

inline std::optional<Json> read_manifest(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    Json j;
    in >> j;
    return j;
  } catch (const Json::exception&) {
    return std::nullopt;
  }
}

inline std::string file_stem(Representation r, Measure m) { return to_string(r) + "_" + to_string(m); }

}  // namespace detail

inline PipelineResult run_pipeline(const Config& cfg, const PipelineOptions& opt = {}) {
  PipelineSettings s = in_stage("config", [&] { return settings_from_config(cfg); });
  if (opt.max_threads) {
    s.threads = std::min(s.threads, opt.max_threads);
    s.prep.threads = s.sgns.threads = s.glove.threads = s.threads;
  }
  std::ostream& log = *opt.log;
  const fs::path out_dir(s.output_dir);
  fs::create_directories(out_dir);
  const auto previous = detail::read_manifest(out_dir / "manifest.json");

  PipelineResult result;
  result.config_hash = cfg.hash();

  auto key_hash = [&](std::initializer_list<std::string_view> keys) {
    return cfg.canonical(std::span(keys.begin(), keys.size()));
  };
  const std::string h_vocab = detail::chain(file_digest(s.corpus), key_hash({"min_count"}));
  const std::string h_counts = detail::chain(h_vocab, key_hash({"window", "sample", "seed"}));
  const std::string h_train = detail::chain(h_counts, key_hash({"sgns", "glove", "threads"}));
  const std::string h_reconstruct = detail::chain(h_train, "reconstruct");
  std::string inputs = file_digest(s.lexicon_z) + file_digest(s.lexicon_z_prime) + file_digest(s.occupations);
  if (!s.lexicon_pairs.empty()) inputs += file_digest(s.lexicon_pairs);
  const std::string h_measure =
      detail::chain(h_reconstruct, inputs + key_hash({"representations", "measures", "ppmi", "report"}));
  std::string stats_inputs;
  for (const auto& [name, path] : s.stats) stats_inputs += name + ":" + file_digest(path) + ";";
  const std::string h_evaluate = detail::chain(h_measure, stats_inputs + key_hash({"cda"}));

  auto up_to_date = [&](const StageRecord& st) {
    if (opt.force || !previous) return false;
    bool recorded = false;
    for (const auto& j : previous->value("stages", Json::array()))
      if (j.value("name", "") == st.name && j.value("hash", "") == st.hash) recorded = true;
    if (!recorded) return false;
    return std::all_of(st.outputs.begin(), st.outputs.end(), [&](const std::string& o) { return fs::exists(out_dir / o); });
  };
  auto begin_stage = [&](const std::string& name, const std::string& hash, std::vector<std::string> outputs) {
    StageRecord st{name, hash, std::move(outputs), false};
    st.skipped = up_to_date(st);
    log << (st.skipped ? "skip  " : "run   ") << name << '\n';
    return st;
  };

  // Lazily loaded shared inputs.
  std::optional<std::vector<Sentence>> sentences;
  auto corpus = [&]() -> const std::vector<Sentence>& {
    if (!sentences) {
      auto in = open_input(s.corpus);
      sentences = tokenize_normalize(in, s.threads);
    }
    return *sentences;
  };

  // vocab
  auto st_vocab = begin_stage("vocab", h_vocab, {"vocab.tsv"});
  const Vocabulary vocab = in_stage("vocab", [&] {
    if (st_vocab.skipped) {
      auto in = open_input((out_dir / "vocab.tsv").string());
      return read_vocab(in);
    }
    Vocabulary v = build_vocab(corpus(), s.prep.min_count, s.threads);
    write_file(out_dir / "vocab.tsv", [&](std::ostream& o) { write_vocab(o, v, h_vocab); });
    return v;
  });
  result.stages.push_back(st_vocab);

  std::optional<IdCorpus> stream_cache;
  auto stream = [&]() -> const IdCorpus& {
    if (!stream_cache) stream_cache = subsample(encode(corpus(), vocab), vocab, s.prep.sample, s.prep.seed);
    return *stream_cache;
  };

  // counts
  std::shared_ptr<const CoocMatrix> cooc;
  if (s.needs_cooc()) {
    auto st = begin_stage("counts", h_counts, {"cooc.tsv"});
    cooc = in_stage("counts", [&] {
      if (st.skipped) {
        auto in = open_input((out_dir / "cooc.tsv").string());
        return std::make_shared<const CoocMatrix>(read_cooc(in, vocab));
      }
      auto m = std::make_shared<const CoocMatrix>(count_cooc(stream(), vocab.size(), s.window, s.threads));
      write_file(out_dir / "cooc.tsv", [&](std::ostream& o) { write_cooc(o, *m, vocab, h_counts); });
      return m;
    });
    result.stages.push_back(st);
  }

  // train
  std::shared_ptr<const EmbeddingModel> sg, glove;
  if (s.needs_sg() || s.needs_glove()) {
    std::vector<std::string> outs;
    if (s.needs_sg()) outs.push_back("sg.embx");
    if (s.needs_glove()) outs.push_back("glove.embx");
    auto st = begin_stage("train", h_train, outs);
    in_stage("train", [&] {
      auto load = [&](const char* name) {
        auto in = open_input((out_dir / name).string());
        return std::make_shared<const EmbeddingModel>(read_embx(in));
      };
      if (s.needs_sg()) {
        sg = st.skipped ? load("sg.embx") : std::make_shared<const EmbeddingModel>(train_sgns(stream(), vocab, s.sgns));
        if (!st.skipped) write_file(out_dir / "sg.embx", [&](std::ostream& o) { write_embx(o, *sg, h_train); });
      }
      if (s.needs_glove()) {
        glove = st.skipped ? load("glove.embx") : std::make_shared<const EmbeddingModel>(train_glove(*cooc, vocab, s.glove));
        if (!st.skipped) write_file(out_dir / "glove.embx", [&](std::ostream& o) { write_embx(o, *glove, h_train); });
      }
    });
    result.stages.push_back(st);
  }

  // reconstruct
  std::unique_ptr<EsgView> esg;
  if (s.needs(Representation::esg)) {
    auto st = begin_stage("reconstruct", h_reconstruct, {"esg_norms.tsv"});
    in_stage("reconstruct", [&] {
      // The normalizers are cheap relative to training and are recomputed
      // rather than parsed back; the file is kept for inspection.
      esg = std::make_unique<EsgView>(sg, noise_table(vocab, s.sgns.noise_exponent), s.threads);
      if (!st.skipped)
        write_file(out_dir / "esg_norms.tsv", [&](std::ostream& o) { write_esg_norms(o, *esg, h_reconstruct); });
    });
    result.stages.push_back(st);
  }

  // measure
  const ConceptLexicon lexicon = in_stage("measure", [&] {
    return load_lexicon(s.lexicon_z, s.lexicon_z_prime, s.lexicon_pairs);
  });
  const auto occupations = in_stage("measure", [&] { return load_occupations(s.occupations); });

  RepresentationSet reps(vocab, in_stage("measure", [&] { return resolve(lexicon, vocab); }));
  if (sg) reps.set_sg(sg);
  if (glove) reps.set_glove(glove);
  if (cooc) reps.set_cooc(cooc, s.ppmi_alpha, s.ppmi_shift);
  if (esg) reps.set_esg(std::move(esg));

  std::vector<WordId> targets;
  {
    std::set<WordId> seen;
    std::size_t missing = 0;
    for (const auto& o : occupations) {
      if (auto id = vocab.find(o.word)) {
        if (seen.insert(*id).second) targets.push_back(*id);
      } else {
        ++missing;
      }
    }
    if (missing) warn(std::to_string(missing) + " occupation(s) are not in the vocabulary");
    if (targets.empty()) throw DataError("[measure] no occupation is in the vocabulary");
  }
  std::vector<WordId> pool;
  if (s.pool == PoolMode::vocab) {
    pool.resize(vocab.size());
    for (WordId i = 0; i < vocab.size(); ++i) pool[i] = i;
  } else {
    pool = targets;
  }

  {
    std::vector<std::string> outs;
    for (auto [r, m] : s.combinations()) {
      const auto stem = "reports/" + detail::file_stem(r, m);
      outs.push_back(stem + ".json");
      outs.push_back(stem + ".tsv");
      if (m != Measure::directional) outs.push_back(stem + ".svg");
      outs.push_back(stem + ".hist.tsv");
      outs.push_back(stem + ".hist.svg");
    }
    auto st = begin_stage("measure", h_measure, outs);
    if (!st.skipped) {
      in_stage("measure", [&] {
        for (auto [r, m] : s.combinations()) {
          const auto scorer = reps.scorer(r, m);
          auto report = build_report(scorer, vocab, pool, targets, to_string(m), to_string(r));
          report.metadata["config"] = h_measure;
          report.metadata["seed"] = std::to_string(s.prep.seed);
          if (r == Representation::esg) report.metadata["esg_noise_exponent"] = format_double(s.sgns.noise_exponent);
          if (r == Representation::ppmi) report.metadata["ppmi_alpha"] = format_double(s.ppmi_alpha);
          const auto stem = out_dir / "reports" / detail::file_stem(r, m);
          const auto hist = bias_histogram(report, s.bins);
          write_file(stem.string() + ".json", [&](std::ostream& o) { emit_report(o, report, ReportFormat::json); });
          write_file(stem.string() + ".tsv", [&](std::ostream& o) { emit_report(o, report, ReportFormat::tsv); });
          if (m != Measure::directional)
            write_file(stem.string() + ".svg", [&](std::ostream& o) { emit_report(o, report, ReportFormat::svg); });
          write_file(stem.string() + ".hist.tsv", [&](std::ostream& o) { emit_histogram(o, hist, ReportFormat::tsv); });
          write_file(stem.string() + ".hist.svg", [&](std::ostream& o) { emit_histogram(o, hist, ReportFormat::svg); });
        }
      });
    }
    result.stages.push_back(st);
  }

  // evaluate
  if (!s.stats.empty() || s.cda) {
    std::vector<std::string> outs;
    if (!s.stats.empty()) {
      outs.push_back("correlation.tsv");
      outs.push_back("correlation.json");
    }
    if (s.cda) {
      outs.push_back("cda_trajectories.tsv");
      outs.push_back("cda_steps.tsv");
    }
    auto st = begin_stage("evaluate", h_evaluate, outs);
    if (!st.skipped) {
      in_stage("evaluate", [&] {
        if (!s.stats.empty()) {
          std::vector<OccupationStats> collections;
          for (const auto& [name, path] : s.stats) collections.push_back(load_stats(path, parse_stats_source(name), name));
          std::vector<ScoringMethod> methods;
          for (auto [r, m] : s.combinations()) methods.push_back({to_string(r), to_string(m), reps.scorer(r, m)});
          const auto rows = correlation_table(methods, vocab, collections);
          write_file(out_dir / "correlation.tsv", [&](std::ostream& o) { emit_correlation(o, rows, ReportFormat::tsv); });
          write_file(out_dir / "correlation.json", [&](std::ostream& o) { emit_correlation(o, rows, ReportFormat::json); });
        }
        if (s.cda) {
          std::vector<std::string> neutral;
          for (const auto& o : occupations)
            if (o.tag != "female_specific" && o.tag != "male_specific") neutral.push_back(o.word);
          CdaConfig c;
          c.prep = s.prep;
          c.window = s.window;
          c.sgns = s.sgns;
          c.ppmi_alpha = s.ppmi_alpha;
          c.ppmi_shift = s.ppmi_shift;
          const auto res = cda_experiment(corpus(), lexicon, neutral, c);
          write_file(out_dir / "cda_trajectories.tsv", [&](std::ostream& o) { write_trajectories_tsv(o, res.trajectories); });
          write_file(out_dir / "cda_steps.tsv", [&](std::ostream& o) { write_steps_tsv(o, res.steps); });
        }
      });
    }
    result.stages.push_back(st);
  }

  Json manifest{{"config", result.config_hash}, {"stages", Json::array()}};
  for (const auto& st : result.stages)
    manifest["stages"].push_back(Json{{"name", st.name}, {"hash", st.hash}, {"outputs", st.outputs}});
  write_file(out_dir / "manifest.json", [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
  return result;
}

}  // namespace biaslens
