// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "../unit/helpers.hpp"

using namespace biaslens;
using testing_util::source_path;

namespace {

/// Thrown by check() to fail the current criterion with a message.
struct Failed {
  std::string what;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failed{what};
}

std::string num(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

ConceptLexicon bundled_lexicon() {
  return load_lexicon(source_path("data/lexicon/female.txt"), source_path("data/lexicon/male.txt"),
                      source_path("data/lexicon/gender_pairs.tsv"));
}

// 1 -------------------------------------------------------------------------

std::string counting_and_ppmi() {
  std::mt19937_64 rng(101);
  const unsigned windows[] = {1, 2, 5};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 15;
    const unsigned window = windows[trial % 3];
    const auto corpus = testing_util::random_id_corpus(rng, n, 1 + rng() % 200);
    const auto m = count_cooc(corpus, n, window, 1);
    const auto brute = testing_util::brute_counts(corpus, n, window);
    for (WordId w = 0; w < n; ++w)
      for (WordId c = 0; c < n; ++c) check(m.count(w, c) == brute[w][c], "count mismatch in trial " + std::to_string(trial));
    if (m.empty()) continue;
    const std::uint64_t shift = 1 + trial % 3;
    const PpmiView view(std::make_shared<const CoocMatrix>(m), 0.75, shift);
    const auto oracle = testing_util::brute_ppmi(brute, 0.75, static_cast<double>(shift));
    for (WordId w = 0; w < n; ++w)
      for (WordId c = 0; c < n; ++c)
        check(std::abs(view.value(w, c).value_or(0.0) - oracle[w][c]) <= 1e-12,
              "ppmi mismatch in trial " + std::to_string(trial));
  }
  return "50 corpora";
}

// 2 -------------------------------------------------------------------------

double sgns_objective(const EmbeddingModel& m, WordId w, WordId c, std::span<const WordId> negs) {
  double f = log_sigmoid(dot(m.V.row(w), m.U.row(c)));
  for (auto n : negs) f += log_sigmoid(-dot(m.V.row(w), m.U.row(n)));
  return f;
}

double glove_cell_loss(const EmbeddingModel& m, WordId w, WordId c, double x) {
  const double r = dot(m.V.row(w), m.U.row(c)) + m.b[w] + m.b_tilde[c] - std::log(x);
  return glove_weight(x, 100, 0.75) * r * r;
}

template <class F>
double central_difference(double& p, F&& f) {
  const double h = 1e-5, p0 = p;
  p = p0 + h;
  const double up = f();
  p = p0 - h;
  const double down = f();
  p = p0;
  return (up - down) / (2 * h);
}

std::string gradients() {
  std::mt19937_64 rng(202);
  double worst = 0;
  auto expect = [&](double analytic, double numeric) {
    worst = std::max(worst, rel_err(analytic, numeric));
    check(rel_err(analytic, numeric) < 1e-6, "relative error " + num(rel_err(analytic, numeric)));
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = trial % 2 ? 10 : 3, n = 8;
    {
      auto m = testing_util::random_model(rng, n, d, 0.5);
      const WordId w = rng() % n, c = rng() % n;
      const std::vector<WordId> negs{static_cast<WordId>(rng() % n), static_cast<WordId>(rng() % n),
                                     static_cast<WordId>(rng() % n)};
      const auto g = sgns_gradient(m, w, c, negs);
      auto f = [&] { return sgns_objective(m, w, c, negs); };
      for (std::size_t j = 0; j < d; ++j) {
        expect(g.word[j], central_difference(m.V(w, j), f));
        // Total gradient of every touched context row.
        std::vector<WordId> rows{c};
        rows.insert(rows.end(), negs.begin(), negs.end());
        for (auto r : rows) {
          double total = r == c ? g.context[j] : 0.0;
          for (std::size_t k = 0; k < negs.size(); ++k)
            if (negs[k] == r) total += g.negatives[k][j];
          expect(total, central_difference(m.U(r, j), f));
        }
      }
      // The step moves each parameter by lr times its gradient.
      auto stepped = m;
      const double lr = 1e-3;
      sgns_step(stepped, w, c, negs, lr);
      for (std::size_t j = 0; j < d; ++j)
        check(std::abs(stepped.V(w, j) - m.V(w, j) - lr * g.word[j]) <= 1e-12, "sgns_step does not apply the gradient");
    }
    {
      auto m = testing_util::random_model(rng, n, d, 0.5, ModelTag::glove);
      const WordId w = rng() % n, c = rng() % n;
      const double x = 1.0 + static_cast<double>(rng() % 300);
      const auto g = glove_gradient(m, w, c, x, 100, 0.75);
      auto f = [&] { return glove_cell_loss(m, w, c, x); };
      for (std::size_t j = 0; j < d; ++j) {
        expect(g.word[j], central_difference(m.V(w, j), f));
        expect(g.context[j], central_difference(m.U(c, j), f));
      }
      expect(g.b, central_difference(m.b[w], f));
      expect(g.b_tilde, central_difference(m.b_tilde[c], f));
      auto stepped = m;
      auto st = GloveState::for_model(stepped);
      glove_step(stepped, st, w, c, x, 0.05);
      // First AdaGrad step: accumulator 1 + g^2.
      const double expected_b = m.b[w] - 0.05 * g.b / std::sqrt(1.0 + g.b * g.b);
      check(std::abs(stepped.b[w] - expected_b) <= 1e-12, "glove_step does not apply the gradient");
    }
  }
  return "100 instances, worst relative error " + num(worst);
}

// 3 -------------------------------------------------------------------------

std::string glove_reconstruction() {
  std::mt19937_64 rng(303);
  const std::vector<std::string> words{"sun", "moon", "star", "sky", "sea", "wave", "sand", "wind",
                                       "rain", "snow", "hill", "lake", "tree", "leaf", "rock", "cloud"};
  std::vector<Sentence> corpus;
  for (std::size_t tokens = 0; tokens < 1000;) {
    Sentence s;
    for (int i = 0; i < 10; ++i) s.push_back(words[std::min<std::size_t>(rng() % words.size(), rng() % words.size())]);
    tokens += s.size();
    corpus.push_back(std::move(s));
  }
  const auto vocab = build_vocab(corpus, 1);
  const auto cooc = count_cooc(corpus, vocab, 5);
  GloveConfig cfg;
  cfg.dim = 10;
  cfg.epochs = 50;
  const double before = glove_mean_abs_residual(init_glove(vocab, cfg.dim, cfg.seed), cooc);
  const double after = glove_mean_abs_residual(train_glove(cooc, vocab, cfg), cooc);
  check(after <= 0.5 * before, "residual " + num(after) + " vs initial " + num(before));
  return "mean |residual| " + num(before) + " -> " + num(after);
}

// 4 -------------------------------------------------------------------------

std::string esg_normalization() {
  std::mt19937_64 rng(404);
  const std::size_t n = 50;
  const auto m = testing_util::random_model(rng, n, 8, 0.6);
  std::vector<std::uint64_t> counts(n);
  for (auto& c : counts) c = 1 + rng() % 1000;
  const NoiseDistribution noise(counts, 0.75);
  const auto eta_w = esg_norm_terms(m, noise, NormSide::word);
  const auto eta_c = esg_norm_terms(m, noise, NormSide::context);
  Rng draw(derive_seed(404, 1));
  const int draws = 100000;
  double worst = 0;
  for (WordId w = 0; w < n; ++w) {
    for (auto side : {NormSide::word, NormSide::context}) {
      double sum = 0, sq = 0;
      for (int i = 0; i < draws; ++i) {
        const WordId x = noise.sample(draw);
        const double s = side == NormSide::word ? sigmoid(dot(m.V.row(w), m.U.row(x))) : sigmoid(dot(m.V.row(x), m.U.row(w)));
        sum += s;
        sq += s * s;
      }
      const double mean = sum / draws;
      const double se = std::sqrt((sq / draws - mean * mean) / draws);
      const double exact = side == NormSide::word ? eta_w[w] : eta_c[w];
      worst = std::max(worst, std::abs(mean - exact) / se);
      check(std::abs(mean - exact) <= 3 * se, "word " + std::to_string(w) + " off by " + num(std::abs(mean - exact) / se) + " SE");
    }
  }

  // Zero word vectors make every score 0, so e = 1 everywhere.
  auto sym = testing_util::random_model(rng, 20, 4, 1.0);
  for (auto& x : sym.V.data()) x = 0.0;
  const EsgView view(std::make_shared<const EmbeddingModel>(sym), NoiseDistribution(std::span(counts).first(20), 0.75));
  for (WordId w = 0; w < 20; ++w)
    for (WordId c = 0; c < 20; ++c) check(std::abs(esg_value(view, w, c) - 1.0) <= 1e-12, "symmetric model is not all ones");
  return "worst deviation " + num(worst) + " SE";
}

// 5 -------------------------------------------------------------------------

std::size_t check_zero_ppmi_bias(const std::vector<Sentence>& corpus, const ConceptLexicon& lexicon, const PrepConfig& cfg,
                                 unsigned window) {
  const auto prep = prepare_corpus(corpus, cfg, &lexicon.pairs(), CdaMode::full);
  const auto lex = resolve(lexicon, prep.vocab);
  const PpmiView view(std::make_shared<const CoocMatrix>(count_cooc(prep.stream, prep.vocab.size(), window)));
  std::size_t checked = 0;
  for (WordId w = 0; w < prep.vocab.size(); ++w) {
    if (lexicon.is_definitional(prep.vocab.word(w))) continue;
    const double psi = bias_weam1st(view, lex, w);
    check(std::abs(psi) < 1e-12, "psi(" + prep.vocab.word(w) + ") = " + num(psi));
    ++checked;
  }
  return checked;
}

std::string cda_symmetry() {
  const auto lexicon = bundled_lexicon();
  auto in = open_input(source_path("data/sample/corpus.txt"));
  const auto sample = tokenize_normalize(in);
  std::size_t checked = 0;
  for (double t : {0.0, 1e-3}) checked += check_zero_ppmi_bias(sample, lexicon, PrepConfig{2, t, 1, 1}, 5);

  std::mt19937_64 rng(505);
  std::vector<std::string> words{"doctor", "nurse", "table", "river", "green", "fast", "bread", "stone"};
  for (const auto& p : lexicon.pairs()) {
    words.push_back(p.z);
    words.push_back(p.z_prime);
  }
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Sentence> corpus;
    for (int i = 0; i < 300; ++i) {
      Sentence s;
      for (int j = 0; j < 8; ++j) s.push_back(words[rng() % (j % 2 ? 8 : words.size())]);
      corpus.push_back(std::move(s));
    }
    checked += check_zero_ppmi_bias(corpus, lexicon, PrepConfig{2, trial % 2 ? 1e-2 : 0.0, std::uint64_t(trial), 1},
                                    1 + trial % 5);
  }
  return std::to_string(checked) + " word scores";
}

// 6 -------------------------------------------------------------------------

std::string planted_bias() {
  SyntheticConfig sc;
  sc.tokens = 200'000;
  sc.pairs = load_pairs(source_path("data/lexicon/gender_pairs.tsv"));
  const auto corpus = synthetic_corpus(sc);
  const auto lexicon = bundled_lexicon();

  const auto prep = prepare_corpus(corpus.sentences, PrepConfig{5, 1e-3, 1, 1});
  const auto lex = resolve(lexicon, prep.vocab);
  SgnsConfig cfg;
  cfg.dim = 25;
  cfg.epochs = 5;
  auto model = std::make_shared<const EmbeddingModel>(train_sgns(prep.stream, prep.vocab, cfg));
  const EsgView esg(model, noise_table(prep.vocab, cfg.noise_exponent));
  const EmbeddingVectors vectors(*model);
  const auto first = first_order_scorer(esg, lex);
  const auto second = second_order_scorer(vectors, lex, Measure::weam2nd);

  std::vector<double> psi1, psi2;
  for (const auto& occ : sc.occupations) {
    const auto id = prep.vocab.find(occ);
    check(id.has_value(), occ + " missing from the vocabulary");
    psi1.push_back(first(*id).psi);
    psi2.push_back(second(*id).psi);
  }
  const double rho1 = spearman(sc.ratios, psi1), rho2 = spearman(sc.ratios, psi2);
  const std::string summary = "rho weam1st/esg " + num(rho1) + ", weam2nd/sg " + num(rho2);
  check(rho1 >= 0.9, summary);
  check(rho2 >= 0.7, summary);
  check(rho1 >= rho2, summary);
  return summary;
}

// 7 -------------------------------------------------------------------------

std::vector<double> svd_direction(const Matrix& D) {
  Eigen::MatrixXd e(D.rows(), D.cols());
  for (std::size_t i = 0; i < D.rows(); ++i)
    for (std::size_t j = 0; j < D.cols(); ++j) e(i, j) = D(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinV);
  Eigen::VectorXd v = svd.matrixV().col(0);
  if ((e * v).sum() < 0) v = -v;
  return {v.data(), v.data() + v.size()};
}

std::string measure_algebra() {
  std::mt19937_64 rng(707);
  const ResolvedLexicon lex{{0, 1, 2}, {3, 4, 5}, {{0, 3}, {1, 4}, {2, 5}}};
  const std::size_t n = 16;
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = testing_util::random_model(rng, n, 6, 1.0);
    const EmbeddingVectors vectors(model);
    for (auto m : {Measure::directional, Measure::centroid, Measure::weam2nd}) {
      const auto a = second_order_scorer(vectors, lex, m);
      const auto b = second_order_scorer(vectors, lex.swapped(), m);
      for (WordId w = 0; w < n; ++w) check(std::abs(a(w).psi + b(w).psi) <= 1e-12, to_string(m) + " is not antisymmetric");
    }
    const EsgView esg(std::make_shared<const EmbeddingModel>(model),
                      NoiseDistribution(std::vector<std::uint64_t>(n, 3), 0.75));
    const auto a = first_order_scorer(esg, lex);
    const auto b = first_order_scorer(esg, lex.swapped());
    for (WordId w = 0; w < n; ++w) check(std::abs(a(w).psi + b(w).psi) <= 1e-12, "weam1st is not antisymmetric");

    // Directional bias scales linearly with the vector norm.
    const auto axis = directional_axis(vectors, lex.pairs);
    const auto v = vectors.vector(10);
    for (double k : {0.5, 2.0, 7.0}) {
      std::vector<double> scaled(v.begin(), v.end());
      for (auto& x : scaled) x *= k;
      const double base = bias_directional(axis, v);
      check(std::abs(bias_directional(axis, scaled) - k * base) <= 1e-12 * std::max(1.0, std::abs(k * base)),
            "directional bias is not linear in the norm");
    }
    for (WordId w = 0; w < n; ++w) {
      const WordId self[] = {w};
      check(std::abs(weam2nd(vectors, w, self) - 1.0) <= 1e-12, "weam2nd(w, {w}) != 1");
    }
  }

  std::normal_distribution<double> g;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 20, d = 1 + rng() % 50;
    Matrix D(k, d);
    for (auto& x : D.data()) x = g(rng) + 0.5;
    const auto a = directional_axis(D).direction;
    const auto o = svd_direction(D);
    for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(a[j] - o[j]));
  }
  check(worst <= 1e-8, "directional axis off the SVD oracle by " + num(worst));
  return "SVD oracle max deviation " + num(worst);
}

// 8 -------------------------------------------------------------------------

double textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

std::vector<double> textbook_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

std::string statistics() {
  std::mt19937_64 rng(808);
  std::vector<double> x(1000), y(1000);
  // Coarse grids force plenty of ties.
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(rng() % 40);
    y[i] = 0.5 * x[i] + static_cast<double>(rng() % 25);
  }
  const double p = pearson(x, y), p_ref = textbook_pearson(x, y);
  check(std::abs(p - p_ref) <= 1e-12, "pearson " + num(p) + " vs " + num(p_ref));
  const double s = spearman(x, y), s_ref = textbook_pearson(textbook_ranks(x), textbook_ranks(y));
  check(std::abs(s - s_ref) <= 1e-12, "spearman " + num(s) + " vs " + num(s_ref));

  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> psi(1000);
  for (auto& v : psi) v = u(rng);
  double mean_abs = 0;
  for (double v : psi) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(psi.size());
  check(std::abs(bias_threshold(psi) - mean_abs) <= 1e-12, "threshold is not mean |psi|");
  return "pearson " + num(p) + ", spearman " + num(s);
}

// 9 -------------------------------------------------------------------------

/// Every artifact under `dir` except the manifest, which records stage state.
std::map<std::string, std::string> output_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

std::string determinism() {
  testing_util::TempDir tmp("acceptance");
  std::ostringstream quiet;
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    auto cfg = Config::load(source_path("data/sample/config.txt"));
    const auto out = tmp / ("run" + std::to_string(i));
    cfg.set("output_dir", out);
    cfg.set("threads", "1");
    PipelineOptions opt;
    opt.log = &quiet;
    run_pipeline(cfg, opt);
    runs[i] = output_files(out);
  }
  check(!runs[0].empty(), "no report files written");
  for (const auto& [name, body] : runs[0]) check(runs[1].count(name) && runs[1].at(name) == body, name + " differs between runs");
  check(runs[0].size() == runs[1].size(), "runs wrote different file sets");
  return std::to_string(runs[0].size()) + " files identical";
}

struct Criterion {
  int id;
  std::string name;
  double limit_s;  // 0: no runtime bound
  std::function<std::string()> run;
};

}  // namespace

int main() {
  set_warning_sink(nullptr);
  const std::vector<Criterion> criteria{
      {1, "counting and PPMI match brute force", 10, counting_and_ppmi},
      {2, "gradients match finite differences", 10, gradients},
      {3, "GloVe reconstruction halves the residual", 30, glove_reconstruction},
      {4, "eSG normalizers match Monte Carlo", 0, esg_normalization},
      {5, "full augmentation zeroes PPMI first-order bias", 20, cda_symmetry},
      {6, "planted bias is recovered", 300, planted_bias},
      {7, "measure algebra", 0, measure_algebra},
      {8, "statistics match textbook oracles", 0, statistics},
      {9, "pipeline reports are byte-identical across runs", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const Failed& f) {
      ok = false;
      detail = f.what;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && c.limit_s > 0 && secs > c.limit_s) {
      ok = false;
      detail += "; exceeded " + num(c.limit_s) + " s";
    }
    failures += !ok;
    std::printf("%s %d %s (%.2f s): %s\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
