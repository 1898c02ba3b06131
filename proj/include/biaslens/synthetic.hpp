#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/lexicon.hpp"
#include "biaslens/random.hpp"

namespace biaslens {

/// Corpus with a known gender skew per occupation. Every occupation sentence
/// carries one gendered word; occupation i gets a Z (female) word with
/// probability ratios[i]. Each gender also has its own topic words, so the
/// skew shows up both as direct co-occurrence and as shared contexts.
struct SyntheticConfig {
  std::size_t tokens = 200'000;
  std::uint64_t seed = 7;
  std::vector<std::string> occupations = {"architect", "baker",  "chemist", "dentist", "editor",
                                          "farmer",    "lawyer", "pilot",   "surgeon"};
  std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<WordPair> pairs;
  std::size_t topic_words = 20;
  std::size_t filler_words = 400;
  std::size_t topics_per_sentence = 2;
  std::size_t fillers_per_sentence = 5;
  double occupation_rate = 0.6;
};

struct SyntheticCorpus {
  std::vector<Sentence> sentences;
  std::vector<std::string> z_topics;
  std::vector<std::string> z_prime_topics;
  std::vector<std::string> fillers;
};

namespace detail {

// Letters-only pseudo-words ("bako", "dilu", ...) so they survive tokenization.
inline std::vector<std::string> pseudo_words(std::size_t n, std::size_t offset,
                                             const std::unordered_set<std::string>& reserved) {
  static const char* syllables[] = {"ba", "ko", "di", "lu", "me", "sa", "to", "ri", "ne", "fu", "ga", "pe",
                                    "zo", "vi", "ha", "mu", "te", "lo", "ki", "ru", "da", "so", "ni", "we"};
  constexpr std::size_t ns = std::size(syllables);
  std::vector<std::string> out;
  for (std::size_t i = offset; out.size() < n; ++i) {
    std::string w;
    std::size_t x = i;
    for (int k = 0; k < 3; ++k) {
      w += syllables[x % ns];
      x /= ns;
    }
    if (!reserved.contains(w)) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace detail

inline SyntheticCorpus synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.occupations.size() != cfg.ratios.size()) throw ConfigError("one planted ratio per occupation is required");
  if (cfg.pairs.empty()) throw ConfigError("the generator needs gender pairs");
  for (double r : cfg.ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("planted ratios must lie in [0, 1]");
  if (cfg.topic_words == 0 || cfg.filler_words == 0) throw ConfigError("topic and filler vocabularies must be nonempty");

  std::unordered_set<std::string> reserved(cfg.occupations.begin(), cfg.occupations.end());
  for (const auto& p : cfg.pairs) {
    reserved.insert(p.z);
    reserved.insert(p.z_prime);
  }
  SyntheticCorpus out;
  auto words = detail::pseudo_words(2 * cfg.topic_words + cfg.filler_words, 0, reserved);
  out.z_topics.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(cfg.topic_words));
  out.z_prime_topics.assign(words.begin() + static_cast<std::ptrdiff_t>(cfg.topic_words),
                            words.begin() + static_cast<std::ptrdiff_t>(2 * cfg.topic_words));
  out.fillers.assign(words.begin() + static_cast<std::ptrdiff_t>(2 * cfg.topic_words), words.end());

  // Zipf-like filler frequencies via an inverse-CDF table.
  std::vector<double> cdf(out.fillers.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = acc += 1.0 / static_cast<double>(i + 1);
  auto filler = [&](Rng& rng) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return out.fillers[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1)];
  };

  Rng rng(derive_seed(cfg.seed, 0x5EED));
  std::size_t produced = 0;
  while (produced < cfg.tokens) {
    Sentence s;
    const bool with_occupation = uniform01(rng) < cfg.occupation_rate;
    bool female = uniform01(rng) < 0.5;
    if (with_occupation) {
      const auto i = uniform_index(rng, cfg.occupations.size());
      female = uniform01(rng) < cfg.ratios[i];
      s.push_back(cfg.occupations[i]);
    }
    const auto& pair = cfg.pairs[uniform_index(rng, cfg.pairs.size())];
    s.push_back(female ? pair.z : pair.z_prime);
    const auto& topics = female ? out.z_topics : out.z_prime_topics;
    for (std::size_t k = 0; k < cfg.topics_per_sentence; ++k) s.push_back(topics[uniform_index(rng, topics.size())]);
    for (std::size_t k = 0; k < cfg.fillers_per_sentence; ++k) s.push_back(filler(rng));
    shuffle(std::span(s), rng);
    produced += s.size();
    out.sentences.push_back(std::move(s));
  }
  return out;
}

}  // namespace biaslens
