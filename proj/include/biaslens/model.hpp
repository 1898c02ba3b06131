#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"
#include "biaslens/linalg.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

enum class ModelTag { sgns, glove };

inline std::string to_string(ModelTag t) { return t == ModelTag::sgns ? "sgns" : "glove"; }

inline ModelTag parse_model_tag(const std::string& s) {
  if (s == "sgns") return ModelTag::sgns;
  if (s == "glove") return ModelTag::glove;
  throw DataError("unknown model tag '" + s + "'");
}

/// Trained word matrix V and context matrix U (both |W| x d), plus the word
/// and context bias vectors for GloVe.
struct EmbeddingModel {
  std::vector<std::string> words;
  Matrix V;
  Matrix U;
  std::vector<double> b;
  std::vector<double> b_tilde;
  ModelTag tag = ModelTag::sgns;

  std::size_t size() const { return V.rows(); }
  std::size_t dim() const { return V.cols(); }
  bool has_biases() const { return tag == ModelTag::glove; }

  void validate() const {
    if (V.rows() != U.rows() || V.cols() != U.cols()) throw DataError("V and U shapes differ");
    if (words.size() != V.rows()) throw DataError("model word list does not match matrix rows");
    if (has_biases()) {
      if (b.size() != size() || b_tilde.size() != size()) throw DataError("glove model needs |W| word and context biases");
    } else if (!b.empty() || !b_tilde.empty()) {
      throw DataError("sgns model must not carry bias vectors");
    }
    if (!all_finite(V.data()) || !all_finite(U.data()) || !all_finite(b) || !all_finite(b_tilde))
      throw DivergenceError("model contains non-finite parameters");
  }

  /// Throws unless the model rows are exactly the vocabulary words in order.
  void check_vocab(const Vocabulary& vocab) const {
    if (words.size() != vocab.size()) throw DataError("model and vocabulary sizes differ");
    for (std::size_t i = 0; i < words.size(); ++i)
      if (words[i] != vocab.word(static_cast<WordId>(i))) throw DataError("model row " + std::to_string(i) + " is not vocabulary word '" + vocab.word(static_cast<WordId>(i)) + "'");
  }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;
};

inline constexpr int kEmbxVersion = 1;

/// "embx <version> <|W|> <d> <tag>", optional '#' lines, then one row per word:
/// word v_1..v_d u_1..u_d [b b~]. Values use shortest round-trip formatting, so
/// a write/read cycle is lossless.
inline void write_embx(std::ostream& out, const EmbeddingModel& m, const std::string& config_hash = {}) {
  out << "embx " << kEmbxVersion << ' ' << m.size() << ' ' << m.dim() << ' ' << to_string(m.tag) << '\n';
  if (!config_hash.empty()) out << "# config=" << config_hash << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.words[i];
    for (double x : m.V.row(i)) out << ' ' << format_double(x);
    for (double x : m.U.row(i)) out << ' ' << format_double(x);
    if (m.has_biases()) out << ' ' << format_double(m.b[i]) << ' ' << format_double(m.b_tilde[i]);
    out << '\n';
  }
}

inline EmbeddingModel read_embx(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("empty model file");
  std::istringstream header(line);
  std::string magic, tag;
  int version = 0;
  std::size_t n = 0, d = 0;
  if (!(header >> magic >> version >> n >> d >> tag) || magic != "embx")
    throw DataError(at_line("not an embx model header", line_no));
  if (version != kEmbxVersion) throw DataError("unsupported embx version " + std::to_string(version));
  EmbeddingModel m;
  m.tag = parse_model_tag(tag);
  m.V = Matrix(n, d);
  m.U = Matrix(n, d);
  if (m.has_biases()) {
    m.b.resize(n);
    m.b_tilde.resize(n);
  }
  const std::size_t expect = 1 + 2 * d + (m.has_biases() ? 2 : 0);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (row >= n) throw DataError(at_line("more rows than the header declares", line_no));
    auto cols = split(line, ' ');
    if (cols.size() != expect) throw DataError(at_line("wrong number of columns in model row", line_no));
    m.words.emplace_back(cols[0]);
    for (std::size_t j = 0; j < d; ++j) {
      m.V(row, j) = parse_double(cols[1 + j], line_no);
      m.U(row, j) = parse_double(cols[1 + d + j], line_no);
    }
    if (m.has_biases()) {
      m.b[row] = parse_double(cols[1 + 2 * d], line_no);
      m.b_tilde[row] = parse_double(cols[2 + 2 * d], line_no);
    }
    ++row;
  }
  if (row != n) throw DataError("model file has " + std::to_string(row) + " rows, header declares " + std::to_string(n));
  m.validate();
  return m;
}

}  // namespace biaslens
