#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/view.hpp"

namespace biaslens {

/// Sparse word x context co-occurrence counts in CSR layout with cached
/// marginals. Zero cells are never stored.
class CoocMatrix {
 public:
  struct Cell {
    WordId context;
    std::uint64_t count;
    friend bool operator==(const Cell&, const Cell&) = default;
  };

  struct Triple {
    WordId word;
    WordId context;
    std::uint64_t count;
  };

  CoocMatrix() = default;

  /// Builds from unsorted triples; duplicates are summed and zeros dropped.
  CoocMatrix(std::size_t dimension, std::vector<Triple> triples, unsigned window, std::uint64_t tokens)
      : dimension_(dimension), window_(window), tokens_(tokens) {
    std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
      return a.word != b.word ? a.word < b.word : a.context < b.context;
    });
    offsets_.assign(dimension + 1, 0);
    word_marginals_.assign(dimension, 0);
    context_marginals_.assign(dimension, 0);
    for (std::size_t i = 0; i < triples.size();) {
      const auto& t = triples[i];
      if (t.word >= dimension || t.context >= dimension) throw DataError("co-occurrence index out of range");
      std::uint64_t c = 0;
      std::size_t j = i;
      for (; j < triples.size() && triples[j].word == t.word && triples[j].context == t.context; ++j)
        c += triples[j].count;
      if (c > 0) {
        cells_.push_back({t.context, c});
        ++offsets_[t.word + 1];
        word_marginals_[t.word] += c;
        context_marginals_[t.context] += c;
        grand_total_ += c;
      }
      i = j;
    }
    for (std::size_t w = 0; w < dimension; ++w) offsets_[w + 1] += offsets_[w];
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t nonzeros() const { return cells_.size(); }
  bool empty() const { return grand_total_ == 0; }

  std::span<const Cell> row(WordId w) const {
    return {cells_.data() + offsets_.at(w), cells_.data() + offsets_.at(w + 1)};
  }

  /// #<w,c>; zero when the cell is not stored.
  std::uint64_t count(WordId w, WordId c) const {
    auto r = row(w);
    auto it = std::lower_bound(r.begin(), r.end(), c, [](const Cell& cell, WordId x) { return cell.context < x; });
    return (it != r.end() && it->context == c) ? it->count : 0;
  }

  /// #<w,.>
  std::uint64_t word_marginal(WordId w) const { return word_marginals_.at(w); }
  /// #<.,c>
  std::uint64_t context_marginal(WordId c) const { return context_marginals_.at(c); }
  std::span<const std::uint64_t> context_marginals() const { return context_marginals_; }
  std::uint64_t grand_total() const { return grand_total_; }
  unsigned window() const { return window_; }
  /// In-vocabulary tokens that were scanned.
  std::uint64_t tokens() const { return tokens_; }

  template <class F>
  void for_each(F&& f) const {
    for (WordId w = 0; w < dimension_; ++w)
      for (const auto& cell : row(w)) f(w, cell.context, cell.count);
  }

  friend bool operator==(const CoocMatrix&, const CoocMatrix&) = default;

 private:
  std::size_t dimension_ = 0;
  unsigned window_ = 0;
  std::uint64_t tokens_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Cell> cells_;
  std::vector<std::uint64_t> word_marginals_;
  std::vector<std::uint64_t> context_marginals_;
  std::uint64_t grand_total_ = 0;
};

/// Symmetric uniform window: every ordered position pair (i, j) with
/// 0 < |i - j| <= window inside one sentence increments #<s[i], s[j]>.
/// Sentences are sharded across `threads` workers and the partial maps summed,
/// so the result is independent of the worker count.
inline CoocMatrix count_cooc(const IdCorpus& corpus, std::size_t dimension, unsigned window, unsigned threads = 1) {
  if (window < 1) throw ConfigError("window must be >= 1");
  using Map = std::unordered_map<std::uint64_t, std::uint64_t>;
  threads = std::max(1U, threads);
  std::vector<Map> partial(threads);
  std::vector<std::uint64_t> tokens(threads, 0);
  auto work = [&](unsigned t, std::size_t b, std::size_t e) {
    auto& m = partial[t];
    for (std::size_t s = b; s < e; ++s) {
      const auto& sent = corpus[s];
      const std::size_t n = sent.size();
      tokens[t] += n;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(n, i + window + 1);
        const std::uint64_t key_hi = static_cast<std::uint64_t>(sent[i]) << 32;
        for (std::size_t j = lo; j < hi; ++j)
          if (j != i) ++m[key_hi | sent[j]];
      }
    }
  };
  if (threads == 1) {
    work(0, 0, corpus.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (corpus.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(corpus.size(), t * chunk);
      const std::size_t e = std::min(corpus.size(), b + chunk);
      pool.emplace_back(work, t, b, e);
    }
  }
  std::vector<CoocMatrix::Triple> triples;
  std::uint64_t total_tokens = 0;
  for (unsigned t = 0; t < threads; ++t) {
    total_tokens += tokens[t];
    for (const auto& [key, c] : partial[t])
      triples.push_back({static_cast<WordId>(key >> 32), static_cast<WordId>(key & 0xffffffffu), c});
    Map().swap(partial[t]);
  }
  return {dimension, std::move(triples), window, total_tokens};
}

inline CoocMatrix count_cooc(std::span<const Sentence> sentences, const Vocabulary& vocab, unsigned window,
                             unsigned threads = 1) {
  return count_cooc(encode(sentences, vocab), vocab.size(), window, threads);
}

/// p_alpha(c) = #<.,c>^alpha / sum_c' #<.,c'>^alpha.
inline std::vector<double> smoothed_context_dist(const CoocMatrix& m, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("context smoothing exponent must be in (0, 1]");
  if (m.empty()) throw DataError("context distribution of an empty co-occurrence matrix");
  std::vector<double> p(m.dimension(), 0.0);
  double z = 0.0;
  for (WordId c = 0; c < m.dimension(); ++c) {
    const auto n = m.context_marginal(c);
    if (n > 0) p[c] = std::pow(static_cast<double>(n), alpha);
    z += p[c];
  }
  for (auto& x : p) x /= z;
  return p;
}

/// Positive PMI with context distribution smoothing and an optional shift:
///   max(0, log(#<w,c> / (#<w,.> * p_alpha(c))) - log k)
/// which equals the PMI of the joint p(w,c) against p(w) p_alpha(c); the
/// grand total cancels. Cells are computed on demand, unstored cells are 0.
class PpmiView {
 public:
  PpmiView(std::shared_ptr<const CoocMatrix> m, double alpha = 0.75, std::uint64_t shift_k = 1)
      : m_(std::move(m)), alpha_(alpha), shift_k_(shift_k) {
    if (!m_ || m_->empty()) throw DataError("PPMI of an empty co-occurrence matrix");
    if (shift_k < 1) throw ConfigError("PPMI shift must be >= 1");
    log_context_.resize(m_->dimension());
    const auto p = smoothed_context_dist(*m_, alpha);
    for (std::size_t c = 0; c < p.size(); ++c) log_context_[c] = p[c] > 0 ? std::log(p[c]) : 0.0;
    log_shift_ = std::log(static_cast<double>(shift_k));
  }

  ExplicitKind kind() const { return ExplicitKind::ppmi; }
  std::size_t dimension() const { return m_->dimension(); }
  double alpha() const { return alpha_; }
  std::uint64_t shift() const { return shift_k_; }
  const CoocMatrix& counts() const { return *m_; }

  std::optional<double> value(WordId w, WordId c) const {
    const auto n = m_->count(w, c);
    return n == 0 ? 0.0 : cell(w, c, n);
  }

  /// Stored cells of row w with their PPMI value (zeros included).
  std::vector<std::pair<WordId, double>> sparse_row(WordId w) const {
    std::vector<std::pair<WordId, double>> out;
    for (const auto& cell_ : m_->row(w)) out.emplace_back(cell_.context, cell(w, cell_.context, cell_.count));
    return out;
  }

  std::vector<double> row(WordId w) const {
    std::vector<double> out(dimension(), 0.0);
    for (const auto& cell_ : m_->row(w)) out[cell_.context] = cell(w, cell_.context, cell_.count);
    return out;
  }

 private:
  double cell(WordId w, WordId c, std::uint64_t n) const {
    const double pmi = std::log(static_cast<double>(n)) - std::log(static_cast<double>(m_->word_marginal(w))) -
                       log_context_[c] - log_shift_;
    return std::max(0.0, pmi);
  }

  std::shared_ptr<const CoocMatrix> m_;
  double alpha_;
  std::uint64_t shift_k_;
  double log_shift_ = 0.0;
  std::vector<double> log_context_;
};

static_assert(ExplicitView<PpmiView>);

inline PpmiView ppmi_matrix(std::shared_ptr<const CoocMatrix> m, double alpha = 0.75, std::uint64_t shift_k = 1) {
  return {std::move(m), alpha, shift_k};
}

// ---------------------------------------------------------------------------
// Persistence: "# cooc window=.. tokens=.. total=.." then word<TAB>context<TAB>count

inline void write_cooc(std::ostream& out, const CoocMatrix& m, const Vocabulary& vocab,
                       const std::string& config_hash = {}) {
  ArtifactHeader h{"cooc", {}};
  h.fields["window"] = std::to_string(m.window());
  h.fields["tokens"] = std::to_string(m.tokens());
  h.fields["total"] = std::to_string(m.grand_total());
  if (!config_hash.empty()) h.fields["config"] = config_hash;
  out << h.render() << '\n';
  m.for_each([&](WordId w, WordId c, std::uint64_t n) { out << vocab.word(w) << '\t' << vocab.word(c) << '\t' << n << '\n'; });
}

inline CoocMatrix read_cooc(std::istream& in, const Vocabulary& vocab) {
  std::vector<CoocMatrix::Triple> triples;
  unsigned window = 0;
  std::uint64_t tokens = 0;
  std::optional<std::uint64_t> total;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (auto h = ArtifactHeader::parse(line); h && h->kind == "cooc") {
        if (auto v = h->get("window")) window = parse_int<unsigned>(*v, line_no);
        if (auto v = h->get("tokens")) tokens = parse_int(*v, line_no);
        if (auto v = h->get("total")) total = parse_int(*v, line_no);
      }
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 3) throw DataError(at_line("co-occurrence row must be word<TAB>context<TAB>count", line_no));
    auto w = vocab.find(std::string(cols[0]));
    auto c = vocab.find(std::string(cols[1]));
    if (!w || !c) throw DataError(at_line("co-occurrence row references a word outside the vocabulary", line_no));
    triples.push_back({*w, *c, parse_int(cols[2], line_no)});
  }
  CoocMatrix m(vocab.size(), std::move(triples), window, tokens);
  if (total && *total != m.grand_total()) throw DataError("co-occurrence header total does not match the rows");
  return m;
}

}  // namespace biaslens
