#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/lexicon.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/log.hpp"
#include "biaslens/model.hpp"
#include "biaslens/view.hpp"

namespace biaslens {

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine of vectors with different dimensions");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine is undefined for a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Vector sources for the second-order measures

/// Anything that hands out one vector per word: the rows of an embedding
/// matrix, or dense rows of an explicit view.
template <class S>
concept VectorSource = requires(const S& s, WordId w) {
  { s.dimension() } -> std::convertible_to<std::size_t>;
  { std::span<const double>(s.vector(w)) };
};

/// Word vectors v_w of a trained model (the V matrix).
class EmbeddingVectors {
 public:
  explicit EmbeddingVectors(const EmbeddingModel& m) : V_(&m.V) {}
  explicit EmbeddingVectors(const Matrix& V) : V_(&V) {}
  std::size_t dimension() const { return V_->cols(); }
  std::span<const double> vector(WordId w) const { return V_->row(w); }

 private:
  const Matrix* V_;
};

/// Dense |W|-dimensional rows of an explicit view.
template <class View>
class ExplicitVectors {
 public:
  explicit ExplicitVectors(const View& v) : view_(&v) {}
  std::size_t dimension() const { return view_->dimension(); }
  std::vector<double> vector(WordId w) const { return view_->row(w); }

 private:
  const View* view_;
};

template <VectorSource S>
std::vector<double> copy_vector(const S& src, WordId w) {
  auto&& v = src.vector(w);
  std::span<const double> s(v);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Directional

/// Pair difference matrix D and its first principal direction.
struct DirectionalAxis {
  Matrix differences;
  std::vector<double> direction;
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1'000'000;
};

/// First right singular vector of the uncentered matrix D by power iteration
/// on the k x k Gram matrix D D^T, mapped back through D^T. The sign is fixed
/// so the mean projection of D's rows is non-negative; an exact tie falls back
/// to making the first nonzero coordinate positive.
inline DirectionalAxis directional_axis(Matrix D, PowerIterationOptions opt = {}) {
  const std::size_t k = D.rows();
  const std::size_t d = D.cols();
  if (k == 0) throw DataError("directional axis needs at least one pair");
  double frob = 0.0;
  for (double x : D.data()) frob += x * x;
  if (frob == 0.0) throw DomainError("degenerate bias axis: all pair differences are zero");

  Matrix gram(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) gram(i, j) = gram(j, i) = dot(D.row(i), D.row(j));

  auto multiply = [&](const std::vector<double>& a) {
    std::vector<double> out(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) out[i] = dot(gram.row(i), a);
    return out;
  };
  auto normalize = [](std::vector<double>& a) {
    const double n = norm(a);
    if (n > 0)
      for (auto& x : a) x /= n;
    return n;
  };

  std::vector<double> a = multiply(std::vector<double>(k, 1.0));
  if (normalize(a) == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (gram(i, i) > gram(best, best)) best = i;
    a.assign(k, 0.0);
    a[best] = 1.0;
  }
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    auto next = multiply(a);
    normalize(next);
    double delta = 0.0;
    for (std::size_t i = 0; i < k; ++i) delta += (next[i] - a[i]) * (next[i] - a[i]);
    a = std::move(next);
    if (std::sqrt(delta) <= opt.tolerance) break;
  }

  std::vector<double> v(d, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = D.row(i);
    for (std::size_t j = 0; j < d; ++j) v[j] += a[i] * row[j];
  }
  if (normalize(v) == 0.0) throw DomainError("degenerate bias axis");

  double mean_projection = 0.0;
  for (std::size_t i = 0; i < k; ++i) mean_projection += dot(D.row(i), v);
  bool flip = mean_projection < 0.0;
  if (mean_projection == 0.0) {
    for (double x : v)
      if (x != 0.0) {
        flip = x < 0.0;
        break;
      }
  }
  if (flip)
    for (auto& x : v) x = -x;
  return {std::move(D), std::move(v)};
}

template <VectorSource S>
DirectionalAxis directional_axis(const S& src, std::span<const std::pair<WordId, WordId>> pairs,
                                 PowerIterationOptions opt = {}) {
  if (pairs.empty()) throw DataError("directional axis needs at least one pair");
  Matrix D(pairs.size(), src.dimension());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto&& x = src.vector(pairs[i].first);
    auto&& y = src.vector(pairs[i].second);
    std::span<const double> xs(x), ys(y);
    auto row = D.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = xs[j] - ys[j];
  }
  return directional_axis(std::move(D), opt);
}

/// psi(w) = v_d . v_w / |v_d|; only the axis is normalized.
inline double bias_directional(const DirectionalAxis& axis, std::span<const double> v_w) {
  return dot(axis.direction, v_w) / norm(axis.direction);
}

// ---------------------------------------------------------------------------
// Centroid and WEAM (second order)

template <VectorSource S>
std::vector<double> centroid(const S& src, std::span<const WordId> set) {
  if (set.empty()) throw DataError("centroid of an empty word set");
  std::vector<double> c(src.dimension(), 0.0);
  for (auto x : set) {
    auto&& v = src.vector(x);
    std::span<const double> s(v);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += s[j];
  }
  for (auto& x : c) x /= static_cast<double>(set.size());
  return c;
}

/// psi = cos(mean_Z v_x, v_w) - cos(mean_Z' v_x, v_w)
template <VectorSource S>
double centroid_bias(const S& src, const ResolvedLexicon& lex, WordId w) {
  auto&& v = src.vector(w);
  return cosine(centroid(src, lex.z), v) - cosine(centroid(src, lex.z_prime), v);
}

/// Mean cosine between v_w and the vectors of `set`.
template <VectorSource S>
double weam2nd(const S& src, WordId w, std::span<const WordId> set) {
  if (set.empty()) throw DataError("WEAM over an empty word set");
  auto&& v = src.vector(w);
  double acc = 0.0;
  for (auto x : set) acc += cosine(src.vector(x), v);
  return acc / static_cast<double>(set.size());
}

template <VectorSource S>
double bias_weam2nd(const S& src, const ResolvedLexicon& lex, WordId w) {
  return weam2nd(src, w, lex.z) - weam2nd(src, w, lex.z_prime);
}

// ---------------------------------------------------------------------------
// WEAM (first order)

/// Mean of e_{w:c} over c in `set`. Undefined cells (unobserved init_glove
/// cells) raise DomainError, so bulk scoring skips the word.
template <ExplicitView View>
double weam1st(const View& view, WordId w, std::span<const WordId> set) {
  if (set.empty()) throw DataError("WEAM over an empty word set");
  double acc = 0.0;
  for (auto c : set) {
    auto v = view.value(w, c);
    if (!v) throw DomainError("first-order value undefined for an unobserved cell of a " + to_string(view.kind()) + " view");
    acc += *v;
  }
  return acc / static_cast<double>(set.size());
}

template <ExplicitView View>
double bias_weam1st(const View& view, const ResolvedLexicon& lex, WordId w) {
  return weam1st(view, w, lex.z) - weam1st(view, w, lex.z_prime);
}

// ---------------------------------------------------------------------------
// Bulk scoring

enum class Measure { directional, centroid, weam2nd, weam1st };

inline std::string to_string(Measure m) {
  switch (m) {
    case Measure::directional: return "directional";
    case Measure::centroid: return "centroid";
    case Measure::weam2nd: return "weam2nd";
    case Measure::weam1st: return "weam1st";
  }
  return "?";
}

inline Measure parse_measure(const std::string& s) {
  if (s == "directional") return Measure::directional;
  if (s == "centroid") return Measure::centroid;
  if (s == "weam2nd") return Measure::weam2nd;
  if (s == "weam1st") return Measure::weam1st;
  throw ConfigError("unknown measure '" + s + "'");
}

/// A word's associations with Z and Z' and the resulting bias. Directional has
/// no per-concept association; only psi is set.
struct Association {
  std::optional<double> to_z;
  std::optional<double> to_z_prime;
  double psi = 0.0;
};

using Scorer = std::function<Association(WordId)>;

/// Second-order scorer over any vector source. The definitional vectors,
/// centroids and axis are computed once.
template <VectorSource S>
Scorer second_order_scorer(const S& src, const ResolvedLexicon& lex, Measure measure) {
  switch (measure) {
    case Measure::directional: {
      auto axis = std::make_shared<DirectionalAxis>(directional_axis(src, lex.pairs));
      return [&src, axis](WordId w) {
        auto&& v = src.vector(w);
        return Association{std::nullopt, std::nullopt, bias_directional(*axis, v)};
      };
    }
    case Measure::centroid: {
      auto cz = std::make_shared<std::vector<double>>(centroid(src, lex.z));
      auto czp = std::make_shared<std::vector<double>>(centroid(src, lex.z_prime));
      return [&src, cz, czp](WordId w) {
        auto&& v = src.vector(w);
        const double a = cosine(*cz, v);
        const double b = cosine(*czp, v);
        return Association{a, b, a - b};
      };
    }
    case Measure::weam2nd: {
      if (lex.z.empty() || lex.z_prime.empty()) throw DataError("WEAM over an empty word set");
      auto load = [&src](std::span<const WordId> set) {
        auto out = std::make_shared<std::vector<std::vector<double>>>();
        for (auto x : set) out->push_back(copy_vector(src, x));
        return out;
      };
      auto vz = load(lex.z);
      auto vzp = load(lex.z_prime);
      return [&src, vz, vzp](WordId w) {
        auto&& v = src.vector(w);
        auto mean_cos = [&](const std::vector<std::vector<double>>& set) {
          double acc = 0.0;
          for (const auto& x : set) acc += cosine(x, v);
          return acc / static_cast<double>(set.size());
        };
        const double a = mean_cos(*vz);
        const double b = mean_cos(*vzp);
        return Association{a, b, a - b};
      };
    }
    case Measure::weam1st: throw UsageError("weam1st needs an explicit (first-order) representation");
  }
  throw UsageError("unknown measure");
}

template <ExplicitView View>
Scorer first_order_scorer(const View& view, const ResolvedLexicon& lex) {
  return [&view, lex](WordId w) {
    const double a = weam1st(view, w, lex.z);
    const double b = weam1st(view, w, lex.z_prime);
    return Association{a, b, a - b};
  };
}

// ---------------------------------------------------------------------------
// Threshold, normalization, classification

/// Mean of |psi| over the supplied values.
inline double bias_threshold(std::span<const double> psi) {
  if (psi.empty()) throw DataError("bias threshold of an empty value set");
  double acc = 0.0;
  for (double x : psi) acc += std::abs(x);
  return acc / static_cast<double>(psi.size());
}

enum class Label { z_biased, z_prime_biased, unbiased };

inline std::string to_string(Label l) {
  switch (l) {
    case Label::z_biased: return "z_biased";
    case Label::z_prime_biased: return "z_prime_biased";
    case Label::unbiased: return "unbiased";
  }
  return "?";
}

inline Label parse_label(const std::string& s) {
  if (s == "z_biased") return Label::z_biased;
  if (s == "z_prime_biased") return Label::z_prime_biased;
  if (s == "unbiased") return Label::unbiased;
  throw DataError("unknown label '" + s + "'");
}

/// unbiased iff |psi| < tau; otherwise the sign picks the side. psi = 0 has
/// no side and is unbiased even when tau = 0.
inline Label classify(double psi, double tau) {
  if (std::abs(psi) < tau || psi == 0.0) return Label::unbiased;
  return psi > 0 ? Label::z_biased : Label::z_prime_biased;
}

/// Min-max scaling fitted on the pooled associations to Z and Z'.
struct MinMax {
  double lo = 0.0;
  double hi = 1.0;

  double operator()(double x) const { return (x - lo) / (hi - lo); }

  static MinMax fit(std::span<const Association> pool) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& a : pool) {
      if (!a.to_z || !a.to_z_prime) throw UsageError("min-max normalization needs per-concept associations");
      lo = std::min({lo, *a.to_z, *a.to_z_prime});
      hi = std::max({hi, *a.to_z, *a.to_z_prime});
    }
    if (pool.empty() || !(hi > lo)) throw DomainError("min-max normalization over a degenerate range");
    return {lo, hi};
  }
};

struct BiasRecord {
  std::string word;
  /// Raw bias.
  double psi = 0.0;
  std::optional<double> assoc_z;
  std::optional<double> assoc_z_prime;
  std::optional<double> norm_z;
  std::optional<double> norm_z_prime;
  /// The value compared against tau: norm_z - norm_z_prime, or psi when the
  /// measure has no per-concept associations.
  double score = 0.0;
  Label label = Label::unbiased;

  friend bool operator==(const BiasRecord&, const BiasRecord&) = default;
};

struct BiasReport {
  std::string method;
  std::string representation;
  double tau = 0.0;
  std::size_t pool_size = 0;
  std::vector<BiasRecord> records;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const BiasReport&, const BiasReport&) = default;
};

/// Min-max scales the pooled associations to [0, 1] and labels `words`.
/// `tau` must be on the normalized scale.
inline BiasReport normalize_and_classify(std::span<const Association> pool, std::span<const std::string> words,
                                         std::span<const Association> word_assocs, double tau) {
  if (words.size() != word_assocs.size()) throw DataError("word and association counts differ");
  const MinMax mm = MinMax::fit(pool);
  BiasReport r;
  r.tau = tau;
  r.pool_size = pool.size();
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& a = word_assocs[i];
    if (!a.to_z || !a.to_z_prime) throw UsageError("normalization needs per-concept associations");
    BiasRecord rec;
    rec.word = words[i];
    rec.psi = a.psi;
    rec.assoc_z = a.to_z;
    rec.assoc_z_prime = a.to_z_prime;
    rec.norm_z = std::clamp(mm(*a.to_z), 0.0, 1.0);
    rec.norm_z_prime = std::clamp(mm(*a.to_z_prime), 0.0, 1.0);
    rec.score = *rec.norm_z - *rec.norm_z_prime;
    rec.label = classify(rec.score, tau);
    r.records.push_back(std::move(rec));
  }
  return r;
}

/// Scores every pool word (the threshold and min-max range come from the
/// pool) and reports `targets`. Words whose score is undefined (zero vector)
/// are skipped with a warning.
inline BiasReport build_report(const Scorer& scorer, const Vocabulary& vocab, std::span<const WordId> pool,
                               std::span<const WordId> targets, const std::string& method,
                               const std::string& representation) {
  std::vector<Association> pool_assoc;
  pool_assoc.reserve(pool.size());
  std::map<WordId, Association> cache;
  std::size_t undefined = 0;
  std::string example;
  for (auto w : pool) {
    try {
      auto a = scorer(w);
      pool_assoc.push_back(a);
      cache.emplace(w, a);
    } catch (const DomainError& e) {
      if (undefined++ == 0) example = "'" + vocab.word(w) + "': " + e.what();
    }
  }
  if (undefined)
    warn(std::to_string(undefined) + " pool word(s) have no defined bias and are skipped (first " + example + ")");
  if (pool_assoc.empty()) throw DataError("no word in the pool has a defined bias");

  std::vector<std::string> words;
  std::vector<Association> assoc;
  for (auto w : targets) {
    auto it = cache.find(w);
    if (it == cache.end()) {
      try {
        it = cache.emplace(w, scorer(w)).first;
      } catch (const DomainError& e) {
        warn("skipping '" + vocab.word(w) + "': " + e.what());
        continue;
      }
    }
    words.push_back(vocab.word(w));
    assoc.push_back(it->second);
  }

  BiasReport r;
  const bool has_assoc = pool_assoc.front().to_z.has_value();
  if (has_assoc) {
    const MinMax mm = MinMax::fit(pool_assoc);
    std::vector<double> scaled;
    scaled.reserve(pool_assoc.size());
    for (const auto& a : pool_assoc) scaled.push_back(mm(*a.to_z) - mm(*a.to_z_prime));
    r = normalize_and_classify(pool_assoc, words, assoc, bias_threshold(scaled));
  } else {
    std::vector<double> psi;
    psi.reserve(pool_assoc.size());
    for (const auto& a : pool_assoc) psi.push_back(a.psi);
    r.tau = bias_threshold(psi);
    r.pool_size = pool_assoc.size();
    for (std::size_t i = 0; i < words.size(); ++i) {
      BiasRecord rec;
      rec.word = words[i];
      rec.psi = assoc[i].psi;
      rec.score = assoc[i].psi;
      rec.label = classify(rec.score, r.tau);
      r.records.push_back(std::move(rec));
    }
  }
  r.method = method;
  r.representation = representation;
  return r;
}

}  // namespace biaslens
