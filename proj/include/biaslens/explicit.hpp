#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/model.hpp"
#include "biaslens/sgns.hpp"
#include "biaslens/textio.hpp"
#include "biaslens/view.hpp"

namespace biaslens {

enum class NormSide { word, context };

/// Exact normalizers of the explicit skip-gram view, as p_N-weighted sums over
/// the whole vocabulary:
///   word side     eta_w  = sum_c p_N(c) s(v_w.u_c)
///   context side  eta~_c = sum_w p_N(w) s(v_w.u_c)
/// O(|W|^2 d); rows are split across `threads` workers, each output entry is
/// computed by exactly one worker in a fixed order.
inline std::vector<double> esg_norm_terms(const EmbeddingModel& m, const NoiseDistribution& noise, NormSide side,
                                          unsigned threads = 1) {
  if (noise.size() != m.size()) throw DataError("noise distribution and model vocabulary sizes differ");
  const std::size_t n = m.size();
  std::vector<double> out(n, 0.0);
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double s = side == NormSide::word ? dot(m.V.row(i), m.U.row(j)) : dot(m.V.row(j), m.U.row(i));
        acc += noise.probability(static_cast<WordId>(j)) * sigmoid(s);
      }
      out[i] = acc;
    }
  };
  threads = std::max(1U, threads);
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(n, t * chunk);
      pool.emplace_back(work, b, std::min(n, b + chunk));
    }
  }
  return out;
}

/// Explicit skip-gram: e_{w:c} = s(v_w.u_c) / sqrt(eta_w * eta~_c). Rows are
/// computed on demand; the |W| x |W| matrix is never stored.
class EsgView {
 public:
  EsgView(std::shared_ptr<const EmbeddingModel> m, const NoiseDistribution& noise, unsigned threads = 1)
      : m_(std::move(m)),
        eta_word_(esg_norm_terms(*m_, noise, NormSide::word, threads)),
        eta_context_(esg_norm_terms(*m_, noise, NormSide::context, threads)),
        noise_exponent_(noise.exponent()) {}

  /// Uses precomputed normalizers (e.g. read back from a norms file).
  EsgView(std::shared_ptr<const EmbeddingModel> m, std::vector<double> eta_word, std::vector<double> eta_context,
          double noise_exponent)
      : m_(std::move(m)), eta_word_(std::move(eta_word)), eta_context_(std::move(eta_context)), noise_exponent_(noise_exponent) {
    if (eta_word_.size() != m_->size() || eta_context_.size() != m_->size())
      throw DataError("eSG normalizer count does not match the model");
  }

  ExplicitKind kind() const { return ExplicitKind::esg; }
  std::size_t dimension() const { return m_->size(); }
  std::span<const double> eta_word() const { return eta_word_; }
  std::span<const double> eta_context() const { return eta_context_; }
  double noise_exponent() const { return noise_exponent_; }
  const EmbeddingModel& model() const { return *m_; }

  std::optional<double> value(WordId w, WordId c) const { return cell(w, c); }

  std::vector<double> row(WordId w) const {
    std::vector<double> out(dimension());
    for (WordId c = 0; c < dimension(); ++c) out[c] = cell(w, c);
    return out;
  }

 private:
  double cell(WordId w, WordId c) const {
    return sigmoid(dot(m_->V.row(w), m_->U.row(c))) / std::sqrt(eta_word_[w] * eta_context_[c]);
  }

  std::shared_ptr<const EmbeddingModel> m_;
  std::vector<double> eta_word_;
  std::vector<double> eta_context_;
  double noise_exponent_;
};

static_assert(ExplicitView<EsgView>);

inline double esg_value(const EsgView& view, WordId w, WordId c) { return *view.value(w, c); }

/// Explicit GloVe: e_w = v_w U^T. The bias terms are left out; they act as
/// normalizers of the log counts and are not part of the association.
class EGloveView {
 public:
  explicit EGloveView(std::shared_ptr<const EmbeddingModel> m) : m_(std::move(m)) {
    if (m_->tag != ModelTag::glove) throw UsageError("eGloVe needs a GloVe model");
  }

  ExplicitKind kind() const { return ExplicitKind::eglove; }
  std::size_t dimension() const { return m_->size(); }
  const EmbeddingModel& model() const { return *m_; }

  std::optional<double> value(WordId w, WordId c) const { return dot(m_->V.row(w), m_->U.row(c)); }

  std::vector<double> row(WordId w) const {
    std::vector<double> out(dimension());
    const auto v = m_->V.row(w);
    for (WordId c = 0; c < dimension(); ++c) out[c] = dot(v, m_->U.row(c));
    return out;
  }

 private:
  std::shared_ptr<const EmbeddingModel> m_;
};

static_assert(ExplicitView<EGloveView>);

inline std::vector<double> eglove_row(const EGloveView& view, WordId w) { return view.row(w); }

/// TSV word<TAB>context<TAB>value for the given rows and context columns.
/// Undefined cells (init_glove) are skipped.
template <ExplicitView View>
void dump_rows(std::ostream& out, const View& view, const Vocabulary& vocab, std::span<const WordId> words,
               std::span<const WordId> contexts) {
  for (auto w : words)
    for (auto c : contexts)
      if (auto v = view.value(w, c)) out << vocab.word(w) << '\t' << vocab.word(c) << '\t' << format_double(*v) << '\n';
}

inline void write_esg_norms(std::ostream& out, const EsgView& view, const std::string& config_hash = {}) {
  ArtifactHeader h{"esg_norms", {}};
  h.fields["noise_exponent"] = format_double(view.noise_exponent());
  if (!config_hash.empty()) h.fields["config"] = config_hash;
  out << h.render() << '\n';
  const auto& words = view.model().words;
  for (std::size_t i = 0; i < words.size(); ++i)
    out << words[i] << '\t' << format_double(view.eta_word()[i]) << '\t' << format_double(view.eta_context()[i]) << '\n';
}

}  // namespace biaslens
