#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "biaslens/biaslens.hpp"

namespace testing_util {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("biaslens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string source_path(const std::string& rel) { return std::string(BIASLENS_SOURCE_DIR) + "/" + rel; }

/// Random corpus over a small alphabet of ids.
inline biaslens::IdCorpus random_id_corpus(std::mt19937_64& rng, std::size_t vocab, std::size_t max_tokens,
                                           std::size_t max_sentence = 12) {
  biaslens::IdCorpus c;
  std::size_t tokens = 0;
  std::uniform_int_distribution<std::size_t> len(0, max_sentence);
  std::uniform_int_distribution<biaslens::WordId> word(0, static_cast<biaslens::WordId>(vocab - 1));
  while (tokens < max_tokens) {
    biaslens::IdSentence s(std::min(len(rng), max_tokens - tokens));
    for (auto& w : s) w = word(rng);
    tokens += s.size();
    c.push_back(std::move(s));
  }
  return c;
}

/// Direct enumeration of every ordered position pair within the window.
inline std::vector<std::vector<std::uint64_t>> brute_counts(const biaslens::IdCorpus& c, std::size_t n, unsigned window) {
  std::vector<std::vector<std::uint64_t>> m(n, std::vector<std::uint64_t>(n, 0));
  for (const auto& s : c)
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j) {
        const std::size_t d = i > j ? i - j : j - i;
        if (d >= 1 && d <= window) ++m[s[i]][s[j]];
      }
  return m;
}

/// PPMI straight from its probabilistic definition, dense.
inline std::vector<std::vector<double>> brute_ppmi(const std::vector<std::vector<std::uint64_t>>& m, double alpha,
                                                   double k) {
  const std::size_t n = m.size();
  double total = 0;
  std::vector<double> row(n, 0), col(n, 0);
  for (std::size_t w = 0; w < n; ++w)
    for (std::size_t c = 0; c < n; ++c) {
      total += static_cast<double>(m[w][c]);
      row[w] += static_cast<double>(m[w][c]);
      col[c] += static_cast<double>(m[w][c]);
    }
  double zc = 0;
  for (double x : col) zc += std::pow(x, alpha);
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t w = 0; w < n; ++w)
    for (std::size_t c = 0; c < n; ++c) {
      if (m[w][c] == 0) continue;
      const double pwc = static_cast<double>(m[w][c]) / total;
      const double pw = row[w] / total;
      const double pc = std::pow(col[c], alpha) / zc;
      out[w][c] = std::max(0.0, std::log(pwc / (pw * pc)) - std::log(k));
    }
  return out;
}

inline biaslens::Vocabulary toy_vocab(std::size_t n) {
  std::vector<std::pair<std::string, std::uint64_t>> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back("w" + std::string(1, static_cast<char>('a' + i % 26)) + std::to_string(i), 100 - i);
  std::uint64_t total = 0;
  for (auto& [w, c] : e) total += c;
  return biaslens::Vocabulary(std::move(e), total, 1);
}

/// Model with V, U drawn from N(0, scale^2).
inline biaslens::EmbeddingModel random_model(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale,
                                             biaslens::ModelTag tag = biaslens::ModelTag::sgns) {
  std::normal_distribution<double> g(0.0, scale);
  biaslens::EmbeddingModel m;
  m.tag = tag;
  m.V = biaslens::Matrix(n, d);
  m.U = biaslens::Matrix(n, d);
  for (auto& x : m.V.data()) x = g(rng);
  for (auto& x : m.U.data()) x = g(rng);
  for (std::size_t i = 0; i < n; ++i) m.words.push_back("w" + std::to_string(i));
  if (tag == biaslens::ModelTag::glove) {
    m.b.resize(n);
    m.b_tilde.resize(n);
    for (auto& x : m.b) x = g(rng);
    for (auto& x : m.b_tilde) x = g(rng);
  }
  return m;
}

}  // namespace testing_util
