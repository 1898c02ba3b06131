#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "biaslens/cooccur.hpp"
#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/model.hpp"
#include "biaslens/random.hpp"
#include "biaslens/sgns.hpp"
#include "biaslens/view.hpp"

namespace biaslens {

/// log p(w|c) = log #<w,c> - log #<.,c>, defined on observed cells only.
class InitGloveView {
 public:
  explicit InitGloveView(std::shared_ptr<const CoocMatrix> m) : m_(std::move(m)) {
    if (!m_ || m_->empty()) throw DataError("initGloVe of an empty co-occurrence matrix");
  }

  ExplicitKind kind() const { return ExplicitKind::init_glove; }
  std::size_t dimension() const { return m_->dimension(); }

  std::optional<double> value(WordId w, WordId c) const {
    const auto n = m_->count(w, c);
    if (n == 0) return std::nullopt;
    return std::log(static_cast<double>(n)) - std::log(static_cast<double>(m_->context_marginal(c)));
  }

  std::vector<std::pair<WordId, double>> sparse_row(WordId w) const {
    std::vector<std::pair<WordId, double>> out;
    for (const auto& cell : m_->row(w))
      out.emplace_back(cell.context, std::log(static_cast<double>(cell.count)) -
                                         std::log(static_cast<double>(m_->context_marginal(cell.context))));
    return out;
  }

 private:
  std::shared_ptr<const CoocMatrix> m_;
};

static_assert(ExplicitView<InitGloveView>);

inline InitGloveView init_glove_matrix(std::shared_ptr<const CoocMatrix> m) { return InitGloveView(std::move(m)); }

/// f(x) = min(1, (x / x_max)^weight_exp)
inline double glove_weight(double x, double x_max, double weight_exp) {
  if (!(x > 0)) throw DataError("GloVe weight of a non-positive count");
  return x >= x_max ? 1.0 : std::pow(x / x_max, weight_exp);
}

struct GloveConfig {
  std::size_t dim = 300;
  double x_max = 100.0;
  double weight_exp = 0.75;
  unsigned epochs = 15;
  double lr = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Gradient (descent direction is its negative) of the weighted squared
/// residual  f(x) * (v_w.u_c + b_w + b~_c - log x)^2.
struct GloveGradient {
  std::vector<double> word;
  std::vector<double> context;
  double b = 0.0;
  double b_tilde = 0.0;
  double loss = 0.0;
};

inline double glove_residual(const EmbeddingModel& m, WordId w, WordId c, double count) {
  return dot(m.V.row(w), m.U.row(c)) + m.b[w] + m.b_tilde[c] - std::log(count);
}

inline GloveGradient glove_gradient(const EmbeddingModel& m, WordId w, WordId c, double count, double x_max,
                                    double weight_exp) {
  const double f = glove_weight(count, x_max, weight_exp);
  const double r = glove_residual(m, w, c, count);
  const double k = 2.0 * f * r;
  GloveGradient g;
  g.loss = f * r * r;
  g.word.resize(m.dim());
  g.context.resize(m.dim());
  for (std::size_t j = 0; j < m.dim(); ++j) {
    g.word[j] = k * m.U(c, j);
    g.context[j] = k * m.V(w, j);
  }
  g.b = k;
  g.b_tilde = k;
  return g;
}

/// AdaGrad accumulators, initialized to 1 like the reference GloVe tool.
struct GloveState {
  Matrix grad_sq_v;
  Matrix grad_sq_u;
  std::vector<double> grad_sq_b;
  std::vector<double> grad_sq_b_tilde;

  static GloveState for_model(const EmbeddingModel& m) {
    return {Matrix(m.size(), m.dim(), 1.0), Matrix(m.size(), m.dim(), 1.0), std::vector<double>(m.size(), 1.0),
            std::vector<double>(m.size(), 1.0)};
  }
};

namespace detail {

template <class Access>
double glove_kernel(EmbeddingModel& m, GloveState& st, WordId w, WordId c, double count, double lr, double x_max,
                    double weight_exp) {
  const std::size_t d = m.dim();
  auto v = m.V.row(w);
  auto u = m.U.row(c);
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += Access::load(v[j]) * Access::load(u[j]);
  const double f = glove_weight(count, x_max, weight_exp);
  const double r = s + Access::load(m.b[w]) + Access::load(m.b_tilde[c]) - std::log(count);
  const double k = 2.0 * f * r;
  auto adagrad = [&](double& param, double& acc, double g) {
    const double a = Access::load(acc) + g * g;
    Access::store(acc, a);
    Access::store(param, Access::load(param) - lr * g / std::sqrt(a));
  };
  auto gv = st.grad_sq_v.row(w);
  auto gu = st.grad_sq_u.row(c);
  for (std::size_t j = 0; j < d; ++j) {
    const double vj = Access::load(v[j]);
    const double uj = Access::load(u[j]);
    adagrad(v[j], gv[j], k * uj);
    adagrad(u[j], gu[j], k * vj);
  }
  adagrad(m.b[w], st.grad_sq_b[w], k);
  adagrad(m.b_tilde[c], st.grad_sq_b_tilde[c], k);
  return f * r * r;
}

}  // namespace detail

/// One AdaGrad step on v_w, u_c, b_w, b~_c. Returns the loss before the step.
inline double glove_step(EmbeddingModel& m, GloveState& st, WordId w, WordId c, double count, double lr,
                         double x_max = 100.0, double weight_exp = 0.75) {
  if (!(count > 0)) throw DataError("GloVe step on a non-positive count");
  if (!m.has_biases()) throw UsageError("glove_step needs a GloVe model");
  const double loss = detail::glove_kernel<detail::PlainAccess>(m, st, w, c, count, lr, x_max, weight_exp);
  if (!std::isfinite(loss) || !all_finite(m.V.row(w)) || !all_finite(m.U.row(c)) || !std::isfinite(m.b[w]) ||
      !std::isfinite(m.b_tilde[c]))
    throw DivergenceError("GloVe update produced a non-finite parameter");
  return loss;
}

/// Sum of f(x) * residual^2 over stored cells.
inline double glove_loss(const EmbeddingModel& m, const CoocMatrix& cooc, double x_max, double weight_exp) {
  double loss = 0.0;
  cooc.for_each([&](WordId w, WordId c, std::uint64_t n) {
    const double x = static_cast<double>(n);
    const double r = glove_residual(m, w, c, x);
    loss += glove_weight(x, x_max, weight_exp) * r * r;
  });
  return loss;
}

/// Mean |v_w.u_c + b_w + b~_c - log #<w,c>| over stored cells.
inline double glove_mean_abs_residual(const EmbeddingModel& m, const CoocMatrix& cooc) {
  double acc = 0.0;
  cooc.for_each([&](WordId w, WordId c, std::uint64_t n) { acc += std::abs(glove_residual(m, w, c, static_cast<double>(n))); });
  return cooc.nonzeros() ? acc / static_cast<double>(cooc.nonzeros()) : 0.0;
}

inline EmbeddingModel init_glove(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be > 0");
  EmbeddingModel m;
  m.tag = ModelTag::glove;
  m.words.assign(vocab.words().begin(), vocab.words().end());
  m.V = Matrix(vocab.size(), dim);
  m.U = Matrix(vocab.size(), dim);
  m.b.resize(vocab.size());
  m.b_tilde.resize(vocab.size());
  Rng rng(derive_seed(seed, 0));
  const double r = 0.5 / static_cast<double>(dim);
  for (auto& x : m.V.data()) x = uniform(rng, -r, r);
  for (auto& x : m.U.data()) x = uniform(rng, -r, r);
  for (auto& x : m.b) x = uniform(rng, -r, r);
  for (auto& x : m.b_tilde) x = uniform(rng, -r, r);
  return m;
}

/// Visits the stored cells in a freshly seeded shuffled order every epoch.
inline EmbeddingModel train_glove(const CoocMatrix& cooc, const Vocabulary& vocab, const GloveConfig& cfg,
                                  TrainLog* log = nullptr) {
  if (cooc.empty()) throw DataError("cannot train GloVe on an empty co-occurrence matrix");
  if (cooc.dimension() != vocab.size()) throw DataError("co-occurrence matrix and vocabulary sizes differ");
  if (!(cfg.lr > 0)) throw ConfigError("learning rate must be > 0");
  if (!(cfg.x_max > 0)) throw ConfigError("x_max must be > 0");
  EmbeddingModel m = init_glove(vocab, cfg.dim, cfg.seed);
  if (log) log->values.push_back(glove_loss(m, cooc, cfg.x_max, cfg.weight_exp));
  if (cfg.epochs == 0) return m;

  std::vector<CoocMatrix::Triple> cells;
  cells.reserve(cooc.nonzeros());
  cooc.for_each([&](WordId w, WordId c, std::uint64_t n) { cells.push_back({w, c, n}); });
  GloveState st = GloveState::for_model(m);
  Rng rng(derive_seed(cfg.seed, 1));
  const unsigned threads = std::max(1U, cfg.threads);

  for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span(cells), rng);
    auto run = [&]<class Access>(Access, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        detail::glove_kernel<Access>(m, st, cells[i].word, cells[i].context, static_cast<double>(cells[i].count), cfg.lr,
                                     cfg.x_max, cfg.weight_exp);
    };
    if (threads == 1) {
      run(detail::PlainAccess{}, 0, cells.size());
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (cells.size() + threads - 1) / threads;
      for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = std::min(cells.size(), t * chunk);
        const std::size_t e = std::min(cells.size(), b + chunk);
        pool.emplace_back([&, b, e] { run(detail::RelaxedAccess{}, b, e); });
      }
    }
    const double loss = glove_loss(m, cooc, cfg.x_max, cfg.weight_exp);
    if (!std::isfinite(loss)) throw DivergenceError("GloVe training diverged in epoch " + std::to_string(epoch + 1));
    if (log) log->values.push_back(loss);
  }
  return m;
}

}  // namespace biaslens
