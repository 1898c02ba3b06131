#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "biaslens/error.hpp"
#include "biaslens/random.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

using WordId = std::uint32_t;

/// Lowercase tokens of one input line.
using Sentence = std::vector<std::string>;

/// Sentences after vocabulary lookup; out-of-vocabulary tokens are removed
/// and positions compacted.
using IdSentence = std::vector<WordId>;
using IdCorpus = std::vector<IdSentence>;

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; returns its byte length or 0
// if the sequence is malformed.
inline std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms, surrogates, out of range.
  static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

inline bool is_unicode_space(char32_t cp) {
  return cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202F || cp == 0x205F || cp == 0x3000 || cp == 0x85;
}

// Latin-1 punctuation and symbols, general punctuation, and the C1 controls.
inline bool is_unicode_removable(char32_t cp) {
  return (cp >= 0x80 && cp <= 0x9F) || (cp >= 0xA1 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 ||
         (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003) || cp == 0xFEFF;
}

}  // namespace detail

/// Normalizes one line: lowercases, deletes digit and punctuation characters,
/// then splits on whitespace. Throws DataError on malformed UTF-8.
inline Sentence normalize_line(std::string_view line, std::size_t line_no = 0) {
  Sentence tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < line.size();) {
    char32_t cp = 0;
    const auto len = detail::decode_utf8(line, i, cp);
    if (len == 0) throw DataError(at_line("malformed UTF-8 input", line_no));
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        flush();
      } else if (c >= 'A' && c <= 'Z') {
        current.push_back(static_cast<char>(c - 'A' + 'a'));
      } else if ((c >= 'a' && c <= 'z')) {
        current.push_back(c);
      }
      // Everything else in ASCII is a digit, punctuation or a control
      // character and is deleted in place.
    } else if (detail::is_unicode_space(cp)) {
      flush();
    } else if (detail::is_unicode_removable(cp)) {
      // deleted
    } else if (cp >= 0xC0 && cp <= 0xDE) {
      // Latin-1 uppercase letters map to lowercase with +0x20 (0xD7 was
      // removed above).
      const char32_t lower = cp + 0x20;
      current.push_back(static_cast<char>(0xC0 | (lower >> 6)));
      current.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
    } else {
      current.append(line.substr(i, len));
    }
    i += len;
  }
  flush();
  return tokens;
}

/// One sentence per non-empty input line. Lines that normalize to nothing
/// produce no sentence.
inline std::vector<Sentence> tokenize_normalize(std::istream& in, unsigned threads = 1) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));

  std::vector<Sentence> per_line(lines.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) per_line[i] = normalize_line(lines[i], i + 1);
  };
  threads = std::max(1U, threads);
  if (threads == 1 || lines.size() < 2 * threads) {
    work(0, lines.size());
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (lines.size() + threads - 1) / threads;
      for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = std::min(lines.size(), t * chunk);
        const std::size_t e = std::min(lines.size(), b + chunk);
        pool.emplace_back([&, t, b, e] {
          try {
            work(b, e);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<Sentence> out;
  out.reserve(per_line.size());
  for (auto& s : per_line)
    if (!s.empty()) out.push_back(std::move(s));
  return out;
}

inline std::vector<Sentence> tokenize_normalize(std::string_view text, unsigned threads = 1) {
  std::istringstream in{std::string(text)};
  return tokenize_normalize(in, threads);
}

inline std::string join(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(' ');
    out += s[i];
  }
  return out;
}

inline void write_sentences(std::ostream& out, std::span<const Sentence> sentences) {
  for (const auto& s : sentences) out << join(s) << '\n';
}

/// Reads sentences that are already normalized (one per line, space separated).
inline std::vector<Sentence> read_sentences(std::istream& in) {
  std::vector<Sentence> out;
  for (std::string line; std::getline(in, line);) {
    Sentence s;
    for (auto tok : split(line, ' ')) {
      tok = trim(tok);
      if (!tok.empty()) s.emplace_back(tok);
    }
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Word <-> index map with raw (pre-filter) corpus frequencies. Indices are
/// dense and ordered by descending count, ties broken alphabetically.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from already-filtered (word, count) entries; the order of
  /// `entries` becomes the index order.
  Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> entries, std::uint64_t total,
             std::uint64_t min_count)
      : total_(total), min_count_(min_count) {
    words_.reserve(entries.size());
    counts_.reserve(entries.size());
    for (auto& [w, c] : entries) {
      if (index_.contains(w)) throw DataError("duplicate vocabulary word '" + w + "'");
      index_.emplace(w, static_cast<WordId>(words_.size()));
      words_.push_back(std::move(w));
      counts_.push_back(c);
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  const std::string& word(WordId id) const { return words_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }

  std::optional<WordId> find(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& w) const { return index_.contains(w); }

  std::span<const std::string> words() const { return words_; }
  std::span<const std::uint64_t> counts() const { return counts_; }

  /// All tokens of the corpus, including those below min_count.
  std::uint64_t total() const { return total_; }
  std::uint64_t min_count() const { return min_count_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.counts_ == b.counts_ && a.total_ == b.total_ &&
           a.min_count_ == b.min_count_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
  std::uint64_t total_ = 0;
  std::uint64_t min_count_ = 1;
};

inline Vocabulary build_vocab(std::span<const Sentence> sentences, std::uint64_t min_count,
                              unsigned threads = 1) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  using Counts = std::unordered_map<std::string, std::uint64_t>;
  threads = std::max(1U, threads);
  std::vector<Counts> partial(threads);
  std::vector<std::uint64_t> totals(threads, 0);
  auto work = [&](unsigned t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (const auto& tok : sentences[i]) ++partial[t][tok];
      totals[t] += sentences[i].size();
    }
  };
  if (threads == 1) {
    work(0, 0, sentences.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (sentences.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(sentences.size(), t * chunk);
      const std::size_t e = std::min(sentences.size(), b + chunk);
      pool.emplace_back(work, t, b, e);
    }
  }
  Counts merged = std::move(partial[0]);
  std::uint64_t total = totals[0];
  for (unsigned t = 1; t < threads; ++t) {
    for (auto& [w, c] : partial[t]) merged[w] += c;
    total += totals[t];
  }
  if (total == 0) throw DataError("empty corpus: vocabulary is empty");

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : merged)
    if (c >= min_count) kept.emplace_back(w, c);
  if (kept.empty())
    throw DataError("empty vocabulary: no word reaches min_count=" + std::to_string(min_count));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return Vocabulary(std::move(kept), total, min_count);
}

/// Maps tokens to indices, dropping out-of-vocabulary tokens.
inline IdCorpus encode(std::span<const Sentence> sentences, const Vocabulary& vocab) {
  IdCorpus out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    IdSentence ids;
    ids.reserve(s.size());
    for (const auto& tok : s)
      if (auto id = vocab.find(tok)) ids.push_back(*id);
    out.push_back(std::move(ids));
  }
  return out;
}

inline std::vector<Sentence> decode(const IdCorpus& corpus, const Vocabulary& vocab) {
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    Sentence words;
    words.reserve(s.size());
    for (auto id : s) words.push_back(vocab.word(id));
    out.push_back(std::move(words));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subsampling

/// Keep probability min(1, (sqrt(z/t) + 1) * t / z) for corpus fraction z.
/// A threshold of 0 disables subsampling.
inline double keep_probability(double fraction, double sample_t) {
  if (sample_t <= 0.0 || fraction <= 0.0) return 1.0;
  return std::min(1.0, (std::sqrt(fraction / sample_t) + 1.0) * sample_t / fraction);
}

/// Keeps each token independently with its keep probability. The random
/// stream of line i is derived from (seed, i), so the result does not depend
/// on how lines are partitioned across workers. Sentence count is preserved;
/// sentences may become empty.
inline IdCorpus subsample(const IdCorpus& corpus, const Vocabulary& vocab, double sample_t,
                          std::uint64_t seed) {
  if (sample_t < 0) throw ConfigError("sample_t must be >= 0");
  if (sample_t == 0.0) return corpus;
  std::vector<double> keep(vocab.size());
  const double total = static_cast<double>(vocab.total());
  for (WordId w = 0; w < vocab.size(); ++w)
    keep[w] = keep_probability(static_cast<double>(vocab.count(w)) / total, sample_t);

  IdCorpus out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    IdSentence s;
    s.reserve(corpus[i].size());
    for (auto id : corpus[i]) {
      // Draw for every token, even those always kept, so the stream position
      // only depends on the token index.
      const double u = uniform01(rng);
      if (u < keep[id]) s.push_back(id);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sentence> subsample(std::span<const Sentence> sentences, const Vocabulary& vocab,
                                       double sample_t, std::uint64_t seed) {
  return decode(subsample(encode(sentences, vocab), vocab, sample_t, seed), vocab);
}

// ---------------------------------------------------------------------------
// Artifact headers and vocabulary persistence

/// Artifact files start with "# <kind> key=value ...".
struct ArtifactHeader {
  std::string kind;
  std::map<std::string, std::string> fields;

  std::string render() const {
    std::string s = "# " + kind;
    for (const auto& [k, v] : fields) s += " " + k + "=" + v;
    return s;
  }

  static std::optional<ArtifactHeader> parse(std::string_view line) {
    if (line.size() < 2 || line[0] != '#') return std::nullopt;
    ArtifactHeader h;
    bool first = true;
    for (auto part : split(trim(line.substr(1)), ' ')) {
      if (part.empty()) continue;
      if (first) {
        h.kind = std::string(part);
        first = false;
        continue;
      }
      const auto eq = part.find('=');
      if (eq == std::string_view::npos) continue;
      h.fields.emplace(std::string(part.substr(0, eq)), std::string(part.substr(eq + 1)));
    }
    return h;
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) return std::nullopt;
    return it->second;
  }
};

/// TSV word<TAB>count in index order, preceded by a header comment carrying
/// the token total and min_count.
inline void write_vocab(std::ostream& out, const Vocabulary& vocab, const std::string& config_hash = {}) {
  ArtifactHeader h{"vocab", {}};
  h.fields["total"] = std::to_string(vocab.total());
  h.fields["min_count"] = std::to_string(vocab.min_count());
  if (!config_hash.empty()) h.fields["config"] = config_hash;
  out << h.render() << '\n';
  for (WordId i = 0; i < vocab.size(); ++i) out << vocab.word(i) << '\t' << vocab.count(i) << '\n';
}

inline Vocabulary read_vocab(std::istream& in) {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  std::optional<std::uint64_t> total;
  std::optional<std::uint64_t> min_count;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (auto h = ArtifactHeader::parse(line); h && h->kind == "vocab") {
        if (auto t = h->get("total")) total = parse_int(*t, line_no);
        if (auto m = h->get("min_count")) min_count = parse_int(*m, line_no);
      }
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 2 || cols[0].empty()) throw DataError(at_line("vocab row must be word<TAB>count", line_no));
    entries.emplace_back(std::string(cols[0]), parse_int(cols[1], line_no));
  }
  std::uint64_t sum = 0;
  std::uint64_t min_seen = entries.empty() ? 1 : entries.front().second;
  for (const auto& [w, c] : entries) {
    sum += c;
    min_seen = std::min(min_seen, c);
  }
  if (total && *total < sum) throw DataError("vocab header total is smaller than the sum of counts");
  return Vocabulary(std::move(entries), total.value_or(sum), min_count.value_or(min_seen));
}

}  // namespace biaslens
