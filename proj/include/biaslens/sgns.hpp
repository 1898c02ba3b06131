#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/model.hpp"
#include "biaslens/random.hpp"

namespace biaslens {

/// Unigram distribution raised to `exponent` and renormalized, with an
/// inverse-CDF sampler.
class NoiseDistribution {
 public:
  NoiseDistribution(std::span<const std::uint64_t> counts, double exponent) : exponent_(exponent) {
    if (counts.empty()) throw DataError("noise distribution over an empty vocabulary");
    if (exponent < 0) throw ConfigError("noise exponent must be >= 0");
    probs_.resize(counts.size());
    double z = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      probs_[i] = std::pow(static_cast<double>(counts[i]), exponent);
      z += probs_[i];
    }
    if (!(z > 0)) throw DataError("noise distribution has no mass");
    cdf_.resize(counts.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      probs_[i] /= z;
      acc += probs_[i];
      cdf_[i] = acc;
    }
  }

  std::span<const double> probabilities() const { return probs_; }
  double probability(WordId w) const { return probs_.at(w); }
  double exponent() const { return exponent_; }
  std::size_t size() const { return probs_.size(); }

  WordId sample(Rng& rng) const {
    const double u = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<WordId>(it - cdf_.begin());
  }

 private:
  double exponent_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

inline NoiseDistribution noise_table(const Vocabulary& vocab, double exponent = 0.75) {
  return {vocab.counts(), exponent};
}

/// Gradient of  log s(v_w.u_c) + sum_n log s(-v_w.u_n)  (ascent direction).
/// `negatives[i]` holds the gradient for the i-th listed negative term; when an
/// index repeats, the total gradient of that u row is the sum of its terms.
struct SgnsGradient {
  std::vector<double> word;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
  double objective = 0.0;
};

inline SgnsGradient sgns_gradient(const EmbeddingModel& m, WordId w, WordId c, std::span<const WordId> negatives) {
  const auto v = m.V.row(w);
  SgnsGradient g;
  g.word.assign(m.dim(), 0.0);
  const double s_pos = dot(v, m.U.row(c));
  const double g_pos = 1.0 - sigmoid(s_pos);
  g.objective = log_sigmoid(s_pos);
  const auto u_c = m.U.row(c);
  g.context.resize(m.dim());
  for (std::size_t j = 0; j < m.dim(); ++j) {
    g.word[j] += g_pos * u_c[j];
    g.context[j] = g_pos * v[j];
  }
  for (auto n : negatives) {
    const auto u_n = m.U.row(n);
    const double s = dot(v, u_n);
    const double g_neg = -sigmoid(s);
    g.objective += log_sigmoid(-s);
    std::vector<double> gn(m.dim());
    for (std::size_t j = 0; j < m.dim(); ++j) {
      g.word[j] += g_neg * u_n[j];
      gn[j] = g_neg * v[j];
    }
    g.negatives.push_back(std::move(gn));
  }
  return g;
}

namespace detail {

struct PlainAccess {
  static double load(const double& x) { return x; }
  static void store(double& x, double v) { x = v; }
};

// Lock-free shared updates for the parallel trainers: racy in the hogwild
// sense, but every access is an atomic relaxed load/store.
struct RelaxedAccess {
  static double load(const double& x) {
    return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
  }
  static void store(double& x, double v) { std::atomic_ref<double>(x).store(v, std::memory_order_relaxed); }
};

// One exact-gradient SGD step. All scores are taken at the current point
// before any parameter moves. Returns the objective at that point.
template <class Access>
double sgns_kernel(Matrix& V, Matrix& U, WordId w, WordId c, std::span<const WordId> negatives, double lr,
                   std::vector<double>& v_old, std::vector<double>& grad_v, std::vector<double>& coeff) {
  const std::size_t d = V.cols();
  auto v = V.row(w);
  v_old.resize(d);
  grad_v.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) v_old[j] = Access::load(v[j]);

  coeff.resize(1 + negatives.size());
  double objective = 0.0;
  auto score = [&](WordId ctx) {
    const auto u = U.row(ctx);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += v_old[j] * Access::load(u[j]);
    return s;
  };
  const double s_pos = score(c);
  coeff[0] = 1.0 - sigmoid(s_pos);
  objective += log_sigmoid(s_pos);
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    const double s = score(negatives[k]);
    coeff[k + 1] = -sigmoid(s);
    objective += log_sigmoid(-s);
  }
  auto accumulate = [&](WordId ctx, double g) {
    const auto u = U.row(ctx);
    for (std::size_t j = 0; j < d; ++j) grad_v[j] += g * Access::load(u[j]);
  };
  accumulate(c, coeff[0]);
  for (std::size_t k = 0; k < negatives.size(); ++k) accumulate(negatives[k], coeff[k + 1]);

  auto update_context = [&](WordId ctx, double g) {
    auto u = U.row(ctx);
    for (std::size_t j = 0; j < d; ++j) Access::store(u[j], Access::load(u[j]) + lr * g * v_old[j]);
  };
  update_context(c, coeff[0]);
  for (std::size_t k = 0; k < negatives.size(); ++k) update_context(negatives[k], coeff[k + 1]);
  for (std::size_t j = 0; j < d; ++j) Access::store(v[j], v_old[j] + lr * grad_v[j]);
  return objective;
}

}  // namespace detail

/// One SGD ascent step on v_w, u_c and every negative u_n. Returns the
/// objective before the step; throws DivergenceError when a touched parameter
/// becomes non-finite.
inline double sgns_step(EmbeddingModel& m, WordId w, WordId c, std::span<const WordId> negatives, double lr) {
  if (!(lr > 0)) throw ConfigError("learning rate must be > 0");
  std::vector<double> a, b, coeff;
  const double obj = detail::sgns_kernel<detail::PlainAccess>(m.V, m.U, w, c, negatives, lr, a, b, coeff);
  bool ok = all_finite(m.V.row(w)) && all_finite(m.U.row(c));
  for (auto n : negatives) ok = ok && all_finite(m.U.row(n));
  if (!ok) throw DivergenceError("SGNS update produced a non-finite parameter");
  return obj;
}

struct SgnsConfig {
  std::size_t dim = 300;
  unsigned window = 5;
  unsigned negatives = 5;
  unsigned epochs = 5;
  double lr_start = 0.025;
  double noise_exponent = 0.75;
  std::uint64_t seed = 1;
  /// 1 = deterministic; > 1 = lock-free parallel updates (nondeterministic).
  unsigned threads = 1;
};

/// Per-epoch training diagnostics.
struct TrainLog {
  /// SGNS: mean objective per (w, c) pair. GloVe: total weighted loss after
  /// each epoch, with the initial loss at index 0.
  std::vector<double> values;
};

inline EmbeddingModel init_sgns(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be > 0");
  EmbeddingModel m;
  m.tag = ModelTag::sgns;
  m.words.assign(vocab.words().begin(), vocab.words().end());
  m.V = Matrix(vocab.size(), dim);
  m.U = Matrix(vocab.size(), dim, 0.0);
  Rng rng(derive_seed(seed, 0));
  const double r = 0.5 / static_cast<double>(dim);
  for (auto& x : m.V.data()) x = uniform(rng, -r, r);
  return m;
}

/// Skip-gram with negative sampling over the uniform symmetric window used by
/// count_cooc. The learning rate decays linearly with processed tokens from
/// lr_start to lr_start * 1e-4.
inline EmbeddingModel train_sgns(const IdCorpus& corpus, const Vocabulary& vocab, const SgnsConfig& cfg,
                                 TrainLog* log = nullptr) {
  if (vocab.empty()) throw DataError("cannot train on an empty vocabulary");
  if (cfg.window < 1) throw ConfigError("window must be >= 1");
  if (!(cfg.lr_start > 0)) throw ConfigError("learning rate must be > 0");
  EmbeddingModel m = init_sgns(vocab, cfg.dim, cfg.seed);
  if (cfg.epochs == 0) return m;
  const NoiseDistribution noise = noise_table(vocab, cfg.noise_exponent);

  const unsigned threads = std::max(1U, cfg.threads);
  std::vector<std::size_t> shard_begin(threads + 1, 0);
  {
    const std::size_t chunk = (corpus.size() + threads - 1) / threads;
    for (unsigned t = 0; t <= threads; ++t) shard_begin[t] = std::min(corpus.size(), t * chunk);
  }
  std::vector<std::uint64_t> shard_tokens(threads, 0);
  for (unsigned t = 0; t < threads; ++t)
    for (std::size_t s = shard_begin[t]; s < shard_begin[t + 1]; ++s) shard_tokens[t] += corpus[s].size();

  std::vector<Rng> rngs;
  for (unsigned t = 0; t < threads; ++t) rngs.emplace_back(derive_seed(cfg.seed, 1 + t));
  std::vector<std::uint64_t> processed(threads, 0);

  auto run_shard = [&]<class Access>(unsigned t, Access, double& objective, std::uint64_t& pairs) {
    std::vector<double> a, b, coeff;
    std::vector<WordId> negs(cfg.negatives);
    const double work = static_cast<double>(cfg.epochs) * static_cast<double>(std::max<std::uint64_t>(1, shard_tokens[t]));
    auto& rng = rngs[t];
    for (std::size_t s = shard_begin[t]; s < shard_begin[t + 1]; ++s) {
      const auto& sent = corpus[s];
      const std::size_t n = sent.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double lr = cfg.lr_start * std::max(1e-4, 1.0 - static_cast<double>(processed[t]) / work);
        ++processed[t];
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(n, i + cfg.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          const WordId c = sent[j];
          for (auto& neg : negs) {
            neg = noise.sample(rng);
            if (neg == c) neg = noise.sample(rng);
          }
          objective += detail::sgns_kernel<Access>(m.V, m.U, sent[i], c, negs, lr, a, b, coeff);
          ++pairs;
        }
      }
    }
  };

  for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> objective(threads, 0.0);
    std::vector<std::uint64_t> pairs(threads, 0);
    if (threads == 1) {
      run_shard(0, detail::PlainAccess{}, objective[0], pairs[0]);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] { run_shard(t, detail::RelaxedAccess{}, objective[t], pairs[t]); });
    }
    double obj = 0.0;
    std::uint64_t np = 0;
    for (unsigned t = 0; t < threads; ++t) {
      obj += objective[t];
      np += pairs[t];
    }
    if (!std::isfinite(obj) || !all_finite(m.V.data()) || !all_finite(m.U.data()))
      throw DivergenceError("SGNS training diverged in epoch " + std::to_string(epoch + 1));
    if (log) log->values.push_back(np ? obj / static_cast<double>(np) : 0.0);
  }
  return m;
}

}  // namespace biaslens
