#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biaslens/cooccur.hpp"
#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/explicit.hpp"
#include "biaslens/lexicon.hpp"
#include "biaslens/log.hpp"
#include "biaslens/measures.hpp"
#include "biaslens/sgns.hpp"
#include "biaslens/stats.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

// ---------------------------------------------------------------------------
// Occupation statistics

enum class StatsSource { labor, census, custom };

inline std::string to_string(StatsSource s) {
  switch (s) {
    case StatsSource::labor: return "labor";
    case StatsSource::census: return "census";
    case StatsSource::custom: return "custom";
  }
  return "?";
}

inline StatsSource parse_stats_source(const std::string& s) {
  if (s == "labor") return StatsSource::labor;
  if (s == "census") return StatsSource::census;
  return StatsSource::custom;
}

struct OccupationRecord {
  std::string occupation;
  double percent_female = 0.0;
};

struct OccupationStats {
  std::string name;
  StatsSource source = StatsSource::custom;
  std::vector<OccupationRecord> records;
};

/// CSV with header `occupation,percent_female`. Occupations are lowercased;
/// multi-token occupations are skipped with a warning.
inline OccupationStats read_stats(std::istream& in, StatsSource source, const std::string& name = {}) {
  OccupationStats st{name.empty() ? to_string(source) : name, source, {}};
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    auto cols = split(t, ',');
    if (!header_seen) {
      if (cols.size() != 2 || trim(cols[0]) != "occupation" || trim(cols[1]) != "percent_female")
        throw DataError(at_line("stats header must be 'occupation,percent_female'", line_no));
      header_seen = true;
      continue;
    }
    if (cols.size() != 2) throw DataError(at_line("stats row must have two columns", line_no));
    std::string occ(trim(cols[0]));
    if (occ.empty()) throw DataError(at_line("empty occupation", line_no));
    std::transform(occ.begin(), occ.end(), occ.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const double pct = parse_double(cols[1], line_no);
    if (!(pct >= 0.0 && pct <= 100.0)) throw DataError(at_line("percent_female must be within [0, 100]", line_no));
    if (occ.find_first_of(" \t") != std::string::npos) {
      warn("skipping multi-token occupation '" + occ + "'");
      continue;
    }
    st.records.push_back({std::move(occ), pct});
  }
  return st;
}

inline OccupationStats load_stats(const std::string& path, StatsSource source, const std::string& name = {}) {
  auto in = open_input(path);
  return read_stats(in, source, name);
}

/// Target words, one per line, optionally followed by a tab and a tag
/// (female_specific, male_specific, neutral). '#' lines are comments.
struct Occupation {
  std::string word;
  std::string tag;
};

inline std::vector<Occupation> read_occupations(std::istream& in) {
  std::vector<Occupation> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() > 2) throw DataError(at_line("occupation row must be word[<TAB>tag]", line_no));
    out.push_back({std::string(trim(cols[0])), cols.size() == 2 ? std::string(trim(cols[1])) : std::string()});
  }
  return out;
}

inline std::vector<Occupation> load_occupations(const std::string& path) {
  auto in = open_input(path);
  return read_occupations(in);
}

// ---------------------------------------------------------------------------
// Correlation table

/// A representation paired with a measure, ready to score words.
struct ScoringMethod {
  std::string representation;
  std::string measure;
  Scorer scorer;
};

struct CorrelationRow {
  std::string representation;
  std::string measure;
  std::string collection;
  double spearman = 0.0;
  double pearson = 0.0;
  std::size_t n = 0;

  friend bool operator==(const CorrelationRow&, const CorrelationRow&) = default;
};

/// Correlates psi (oriented so that Z is the concept the statistics count,
/// e.g. Z = female against percent-female) with each collection. Occupations
/// outside the vocabulary are excluded with a warning.
inline CorrelationRow correlate_method(const ScoringMethod& method, const Vocabulary& vocab, const OccupationStats& stats) {
  std::vector<double> psi, pct;
  std::size_t missing = 0;
  for (const auto& rec : stats.records) {
    auto id = vocab.find(rec.occupation);
    if (!id) {
      ++missing;
      continue;
    }
    try {
      psi.push_back(method.scorer(*id).psi);
      pct.push_back(rec.percent_female);
    } catch (const DomainError& e) {
      warn("skipping '" + rec.occupation + "': " + e.what());
    }
  }
  if (missing) warn(std::to_string(missing) + " occupation(s) of '" + stats.name + "' are not in the vocabulary");
  if (psi.size() < 3)
    throw DataError("insufficient data: " + std::to_string(psi.size()) + " occupation(s) of '" + stats.name +
                    "' overlap the vocabulary (need 3)");
  return {method.representation, method.measure, stats.name, spearman(pct, psi), pearson(pct, psi), psi.size()};
}

inline std::vector<CorrelationRow> correlation_table(std::span<const ScoringMethod> methods, const Vocabulary& vocab,
                                                     std::span<const OccupationStats> collections) {
  if (methods.empty()) throw ConfigError("correlation table needs at least one representation and measure");
  if (collections.empty()) throw ConfigError("correlation table needs at least one statistics collection");
  std::vector<CorrelationRow> rows;
  for (const auto& m : methods)
    for (const auto& c : collections) rows.push_back(correlate_method(m, vocab, c));
  return rows;
}

// ---------------------------------------------------------------------------
// Histogram

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t unbiased = 0;
  std::size_t z_biased = 0;
  std::size_t z_prime_biased = 0;

  std::size_t total() const { return unbiased + z_biased + z_prime_biased; }
};

struct Histogram {
  double range = 0.0;
  std::vector<HistogramBin> bins;
};

/// Bins the classified scores over [-m, m] with m = max |score|.
inline Histogram bias_histogram(const BiasReport& report, std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("histogram needs at least one bin");
  if (report.records.empty()) throw DataError("histogram of an empty report");
  double m = 0.0;
  for (const auto& r : report.records) m = std::max(m, std::abs(r.score));
  Histogram h{m, std::vector<HistogramBin>(n_bins)};
  const double width = 2.0 * m / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.bins[i].lo = -m + width * static_cast<double>(i);
    h.bins[i].hi = i + 1 == n_bins ? m : -m + width * static_cast<double>(i + 1);
  }
  for (const auto& r : report.records) {
    std::size_t idx = n_bins / 2;
    if (m > 0) {
      const double pos = (r.score + m) / (2.0 * m) * static_cast<double>(n_bins);
      idx = std::min(n_bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
    }
    auto& bin = h.bins[idx];
    switch (r.label) {
      case Label::unbiased: ++bin.unbiased; break;
      case Label::z_biased: ++bin.z_biased; break;
      case Label::z_prime_biased: ++bin.z_prime_biased; break;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Corpus preparation shared by the pipeline and the augmentation experiment

struct PrepConfig {
  std::uint64_t min_count = 200;
  double sample = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct PreparedCorpus {
  Vocabulary vocab;
  /// In-vocabulary, subsampled token stream that feeds every model.
  IdCorpus stream;
};

/// Vocabulary and subsampled stream for the original corpus, or for its
/// counterfactual augmentation when `mode` is set.
///
/// With augmentation, the vocabulary (and hence each keep probability) comes
/// from the augmented corpus, but the random keep decisions are drawn on the
/// original sentences and the surviving tokens are then swapped. A swapped
/// copy therefore keeps exactly the positions its original kept, and a
/// full-mode stream stays exactly symmetric under the swap.
inline PreparedCorpus prepare_corpus(std::span<const Sentence> original, const PrepConfig& cfg,
                                     const std::vector<WordPair>* pairs = nullptr,
                                     std::optional<CdaMode> mode = std::nullopt) {
  if (!mode) {
    Vocabulary vocab = build_vocab(original, cfg.min_count, cfg.threads);
    IdCorpus stream = subsample(encode(original, vocab), vocab, cfg.sample, cfg.seed);
    return {std::move(vocab), std::move(stream)};
  }
  if (!pairs) throw ConfigError("augmentation needs a pair list");
  const auto augmented = cda_augment(original, *pairs, *mode, cfg.seed);
  Vocabulary vocab = build_vocab(augmented, cfg.min_count, cfg.threads);
  const IdCorpus kept = subsample(encode(original, vocab), vocab, cfg.sample, cfg.seed);
  IdCorpus stream = cda_augment(kept, SwapMap(*pairs).on_vocab(vocab), *mode, cfg.seed);
  return {std::move(vocab), std::move(stream)};
}

// ---------------------------------------------------------------------------
// Counterfactual augmentation experiment

struct CdaConfig {
  PrepConfig prep;
  unsigned window = 5;
  SgnsConfig sgns;
  double ppmi_alpha = 0.75;
  std::uint64_t ppmi_shift = 1;
  /// Also track WEAM_1st over PPMI (count-derived, exactly symmetric on the
  /// full augmentation).
  bool include_ppmi = true;
};

/// Bias of one occupation on the original, half- and fully-augmented corpus.
/// `normalized` uses the per-corpus min-max scaling of the associations over
/// the whole vocabulary.
struct Trajectory {
  std::string occupation;
  std::string method;
  std::array<double, 3> psi{};
  std::array<double, 3> normalized{};
};

/// Mean |change| across occupations for each augmentation step
/// (step 1: half - original, step 2: full - half).
struct StepAggregate {
  std::string method;
  double step1 = 0.0;
  double step2 = 0.0;
  double step1_normalized = 0.0;
  double step2_normalized = 0.0;
  std::size_t n = 0;
};

struct CdaResult {
  std::vector<Trajectory> trajectories;
  std::vector<StepAggregate> steps;
};

namespace detail {

struct VariantScores {
  Vocabulary vocab;
  // method name -> per-word association, indexed by word id.
  std::vector<std::pair<std::string, std::vector<Association>>> methods;
  std::vector<std::pair<std::string, MinMax>> scaling;
};

inline VariantScores score_variant(std::span<const Sentence> original, const ConceptLexicon& lexicon,
                                   const CdaConfig& cfg, std::optional<CdaMode> mode) {
  auto prep = prepare_corpus(original, cfg.prep, &lexicon.pairs(), mode);
  VariantScores out{std::move(prep.vocab), {}, {}};
  const auto& vocab = out.vocab;
  const ResolvedLexicon lex = resolve(lexicon, vocab);

  SgnsConfig sg = cfg.sgns;
  sg.window = cfg.window;
  auto model = std::make_shared<const EmbeddingModel>(train_sgns(prep.stream, vocab, sg));
  const EsgView esg(model, noise_table(vocab, sg.noise_exponent), cfg.prep.threads);
  const EmbeddingVectors vectors(*model);

  auto score_all = [&](const std::string& name, const Scorer& scorer) {
    std::vector<Association> a(vocab.size());
    std::vector<Association> defined;
    for (WordId w = 0; w < vocab.size(); ++w) {
      try {
        a[w] = scorer(w);
        defined.push_back(a[w]);
      } catch (const DomainError&) {
        a[w] = Association{std::nullopt, std::nullopt, NAN};
      }
    }
    out.methods.emplace_back(name, std::move(a));
    out.scaling.emplace_back(name, MinMax::fit(defined));
  };
  score_all("weam2nd/sg", second_order_scorer(vectors, lex, Measure::weam2nd));
  score_all("weam1st/esg", first_order_scorer(esg, lex));
  if (cfg.include_ppmi) {
    auto counts = std::make_shared<const CoocMatrix>(count_cooc(prep.stream, vocab.size(), cfg.window, cfg.prep.threads));
    const PpmiView ppmi(counts, cfg.ppmi_alpha, cfg.ppmi_shift);
    score_all("weam1st/ppmi", first_order_scorer(ppmi, lex));
  }
  return out;
}

}  // namespace detail

/// Retrains from scratch (same seed) on the original corpus and on the half
/// and full counterfactual augmentations, then tracks the bias of each
/// occupation under WEAM_2nd/SG, WEAM_1st/eSG and (optionally) WEAM_1st/PPMI.
inline CdaResult cda_experiment(std::span<const Sentence> original, const ConceptLexicon& lexicon,
                                std::span<const std::string> occupations, const CdaConfig& cfg) {
  if (lexicon.pairs().empty()) throw ConfigError("the augmentation experiment needs gender pairs");
  std::array<detail::VariantScores, 3> variants{
      detail::score_variant(original, lexicon, cfg, std::nullopt),
      detail::score_variant(original, lexicon, cfg, CdaMode::half),
      detail::score_variant(original, lexicon, cfg, CdaMode::full),
  };

  CdaResult result;
  const auto& names = variants[0].methods;
  for (std::size_t m = 0; m < names.size(); ++m) {
    StepAggregate agg{names[m].first, 0, 0, 0, 0, 0};
    std::size_t skipped = 0;
    for (const auto& occ : occupations) {
      Trajectory t{occ, names[m].first, {}, {}};
      bool ok = true;
      for (std::size_t v = 0; v < 3 && ok; ++v) {
        auto id = variants[v].vocab.find(occ);
        if (!id) {
          ok = false;
          break;
        }
        const auto& a = variants[v].methods[m].second[*id];
        if (!a.to_z || !std::isfinite(a.psi)) {
          ok = false;
          break;
        }
        const auto& mm = variants[v].scaling[m].second;
        t.psi[v] = a.psi;
        t.normalized[v] = mm(*a.to_z) - mm(*a.to_z_prime);
      }
      if (!ok) {
        ++skipped;
        continue;
      }
      agg.step1 += std::abs(t.psi[1] - t.psi[0]);
      agg.step2 += std::abs(t.psi[2] - t.psi[1]);
      agg.step1_normalized += std::abs(t.normalized[1] - t.normalized[0]);
      agg.step2_normalized += std::abs(t.normalized[2] - t.normalized[1]);
      ++agg.n;
      result.trajectories.push_back(std::move(t));
    }
    if (skipped)
      warn(std::to_string(skipped) + " occupation(s) lack a " + names[m].first +
           " score in at least one corpus variant; skipped");
    if (agg.n) {
      const double n = static_cast<double>(agg.n);
      agg.step1 /= n;
      agg.step2 /= n;
      agg.step1_normalized /= n;
      agg.step2_normalized /= n;
    }
    result.steps.push_back(agg);
  }
  return result;
}

}  // namespace biaslens
