#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/log.hpp"
#include "biaslens/random.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

/// An ordered (x, x') pair with x in Z and x' in Z'.
struct WordPair {
  std::string z;
  std::string z_prime;
  friend bool operator==(const WordPair&, const WordPair&) = default;
};

/// Definitional word sets of a concept Z and its counterpart Z', plus the
/// pair list used for the directional axis and for counterfactual swaps.
class ConceptLexicon {
 public:
  ConceptLexicon() = default;

  ConceptLexicon(std::vector<std::string> z, std::vector<std::string> z_prime, std::vector<WordPair> pairs = {})
      : z_(std::move(z)), z_prime_(std::move(z_prime)), pairs_(std::move(pairs)) {
    check_unique(z_, "Z");
    check_unique(z_prime_, "Z'");
    const std::unordered_set<std::string> zs(z_.begin(), z_.end());
    const std::unordered_set<std::string> zps(z_prime_.begin(), z_prime_.end());
    for (const auto& w : z_prime_)
      if (zs.contains(w)) throw DataError("word '" + w + "' appears in both Z and Z'");
    for (const auto& p : pairs_) {
      if (!zs.contains(p.z)) throw DataError("pair word '" + p.z + "' is not in Z");
      if (!zps.contains(p.z_prime)) throw DataError("pair word '" + p.z_prime + "' is not in Z'");
    }
  }

  const std::vector<std::string>& z() const { return z_; }
  const std::vector<std::string>& z_prime() const { return z_prime_; }
  const std::vector<WordPair>& pairs() const { return pairs_; }

  /// The same lexicon with the roles of Z and Z' exchanged.
  ConceptLexicon swapped() const {
    std::vector<WordPair> pairs;
    pairs.reserve(pairs_.size());
    for (const auto& p : pairs_) pairs.push_back({p.z_prime, p.z});
    return {z_prime_, z_, std::move(pairs)};
  }

  bool is_definitional(const std::string& w) const {
    return std::find(z_.begin(), z_.end(), w) != z_.end() ||
           std::find(z_prime_.begin(), z_prime_.end(), w) != z_prime_.end();
  }

 private:
  static void check_unique(const std::vector<std::string>& words, const char* name) {
    std::unordered_set<std::string> seen;
    for (const auto& w : words)
      if (!seen.insert(w).second) throw DataError(std::string("duplicate word '") + w + "' in " + name);
  }

  std::vector<std::string> z_;
  std::vector<std::string> z_prime_;
  std::vector<WordPair> pairs_;
};

/// TSV x<TAB>x' per line; blank lines and '#' comments are skipped.
inline std::vector<WordPair> read_pairs(std::istream& in) {
  std::vector<WordPair> pairs;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 2 || trim(cols[0]).empty() || trim(cols[1]).empty())
      throw DataError(at_line("pair row must be x<TAB>x'", line_no));
    pairs.push_back({std::string(trim(cols[0])), std::string(trim(cols[1]))});
  }
  return pairs;
}

inline std::vector<WordPair> load_pairs(const std::string& path) {
  auto in = open_input(path);
  return read_pairs(in);
}

inline ConceptLexicon load_lexicon(const std::string& z_path, const std::string& z_prime_path,
                                   const std::string& pairs_path = {}) {
  return {read_word_list(z_path), read_word_list(z_prime_path),
          pairs_path.empty() ? std::vector<WordPair>{} : load_pairs(pairs_path)};
}

// ---------------------------------------------------------------------------
// Counterfactual augmentation

/// Token substitution built from a pair list. When a word occurs in several
/// pairs, the first-listed pair decides its counterpart.
class SwapMap {
 public:
  explicit SwapMap(const std::vector<WordPair>& pairs) {
    for (const auto& p : pairs) {
      map_.try_emplace(p.z, p.z_prime);
      map_.try_emplace(p.z_prime, p.z);
    }
  }

  const std::string& operator()(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? token : it->second;
  }

  bool contains(const std::string& token) const { return map_.contains(token); }

  Sentence apply(const Sentence& s) const {
    Sentence out;
    out.reserve(s.size());
    for (const auto& tok : s) out.push_back((*this)(tok));
    return out;
  }

  /// Index-level map over a vocabulary. A word whose counterpart is outside
  /// the vocabulary maps to kDropped: the swapped token is out of vocabulary.
  static constexpr WordId kDropped = static_cast<WordId>(-1);

  std::vector<WordId> on_vocab(const Vocabulary& vocab) const {
    std::vector<WordId> m(vocab.size());
    std::iota(m.begin(), m.end(), WordId{0});
    for (WordId i = 0; i < vocab.size(); ++i)
      if (auto it = map_.find(vocab.word(i)); it != map_.end()) m[i] = vocab.find(it->second).value_or(kDropped);
    return m;
  }

 private:
  std::unordered_map<std::string, std::string> map_;
};

enum class CdaMode { half, full };

inline CdaMode parse_cda_mode(const std::string& s) {
  if (s == "half") return CdaMode::half;
  if (s == "full") return CdaMode::full;
  throw ConfigError("unknown CDA mode '" + s + "' (expected half or full)");
}

/// Indices of the swapped copies to append: all of them for full mode, a
/// seeded uniformly random floor(n/2) of them (ascending) for half mode.
inline std::vector<std::size_t> cda_selection(std::size_t n, CdaMode mode, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (mode == CdaMode::full) return idx;
  Rng rng(derive_seed(seed, 0xCDA));
  shuffle(std::span(idx), rng);
  idx.resize(n / 2);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Original sentences followed by the selected swapped copies.
inline std::vector<Sentence> cda_augment(std::span<const Sentence> sentences, const std::vector<WordPair>& pairs,
                                         CdaMode mode, std::uint64_t seed) {
  const SwapMap swap(pairs);
  std::vector<Sentence> out(sentences.begin(), sentences.end());
  for (auto i : cda_selection(sentences.size(), mode, seed)) out.push_back(swap.apply(sentences[i]));
  return out;
}

/// Same selection as the string overload, applied to encoded sentences with
/// an index-level swap map (see SwapMap::on_vocab).
inline IdCorpus cda_augment(const IdCorpus& corpus, const std::vector<WordId>& swap, CdaMode mode,
                            std::uint64_t seed) {
  IdCorpus out(corpus.begin(), corpus.end());
  for (auto i : cda_selection(corpus.size(), mode, seed)) {
    IdSentence s;
    s.reserve(corpus[i].size());
    for (auto id : corpus[i])
      if (swap[id] != SwapMap::kDropped) s.push_back(swap[id]);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary resolution

struct ResolvedLexicon {
  std::vector<WordId> z;
  std::vector<WordId> z_prime;
  std::vector<std::pair<WordId, WordId>> pairs;

  ResolvedLexicon swapped() const {
    ResolvedLexicon r{z_prime, z, {}};
    for (auto [a, b] : pairs) r.pairs.emplace_back(b, a);
    return r;
  }
};

/// Looks up every lexicon word. Missing words are dropped with a warning; a
/// pair is dropped when either side is missing.
inline ResolvedLexicon resolve(const ConceptLexicon& lex, const Vocabulary& vocab) {
  ResolvedLexicon r;
  auto lookup = [&](const std::vector<std::string>& words, std::vector<WordId>& out, const char* set) {
    for (const auto& w : words) {
      if (auto id = vocab.find(w))
        out.push_back(*id);
      else
        warn(std::string("definitional word '") + w + "' (" + set + ") not in vocabulary; dropped");
    }
  };
  lookup(lex.z(), r.z, "Z");
  lookup(lex.z_prime(), r.z_prime, "Z'");
  for (const auto& p : lex.pairs()) {
    auto a = vocab.find(p.z);
    auto b = vocab.find(p.z_prime);
    if (a && b)
      r.pairs.emplace_back(*a, *b);
    else
      warn("pair (" + p.z + ", " + p.z_prime + ") has a word outside the vocabulary; dropped");
  }
  return r;
}

}  // namespace biaslens
