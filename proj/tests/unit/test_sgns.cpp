#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace biaslens;

namespace {

double objective(const EmbeddingModel& m, WordId w, WordId c, std::span<const WordId> negs) {
  double f = log_sigmoid(dot(m.V.row(w), m.U.row(c)));
  for (auto n : negs) f += log_sigmoid(-dot(m.V.row(w), m.U.row(n)));
  return f;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

}  // namespace

TEST(Noise, Examples) {
  const std::uint64_t counts[] = {1, 16};
  NoiseDistribution n(counts, 0.75);
  EXPECT_NEAR(n.probability(0), 1.0 / 9.0, 1e-12);
  EXPECT_NEAR(n.probability(1), 8.0 / 9.0, 1e-12);
  NoiseDistribution u(counts, 0.0);
  EXPECT_EQ(u.probability(0), 0.5);
  NoiseDistribution raw(counts, 1.0);
  EXPECT_NEAR(raw.probability(1), 16.0 / 17.0, 1e-12);
  EXPECT_THROW(NoiseDistribution(std::span<const std::uint64_t>{}, 0.75), DataError);
}

TEST(Noise, SamplerFollowsDistribution) {
  const std::uint64_t counts[] = {1, 16, 81};
  NoiseDistribution n(counts, 0.5);
  Rng rng(1);
  std::array<double, 3> hits{};
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++hits[n.sample(rng)];
  for (WordId w = 0; w < 3; ++w) {
    const double p = n.probability(w);
    EXPECT_NEAR(hits[w] / draws, p, 4 * std::sqrt(p * (1 - p) / draws));
  }
}

TEST(SgnsGradient, ZeroScoreExamples) {
  EmbeddingModel m;
  m.words = {"w", "c", "n"};
  m.V = Matrix(3, 2, 0.0);
  m.U = Matrix(3, 2, 0.0);
  m.U(1, 0) = 2.0;
  m.U(2, 1) = 4.0;
  // v_w = 0, so both scores are 0.
  const WordId neg[] = {2};
  auto g = sgns_gradient(m, 0, 1, neg);
  EXPECT_DOUBLE_EQ(g.word[0], 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(g.word[1], -0.5 * 4.0);
}

TEST(SgnsGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = trial % 2 ? 10 : 3;
    auto m = testing_util::random_model(rng, 6, d, 0.5);
    const WordId w = rng() % 6, c = rng() % 6;
    std::vector<WordId> negs{static_cast<WordId>(rng() % 6), static_cast<WordId>(rng() % 6)};
    auto g = sgns_gradient(m, w, c, negs);
    for (std::size_t j = 0; j < d; ++j) {
      auto fd = [&](double& x) {
        const double x0 = x;
        x = x0 + h;
        const double up = objective(m, w, c, negs);
        x = x0 - h;
        const double down = objective(m, w, c, negs);
        x = x0;
        return (up - down) / (2 * h);
      };
      EXPECT_LT(rel_err(g.word[j], fd(m.V(w, j))), 1e-6);
      // A context row's total gradient sums every term that touches it.
      std::vector<WordId> rows{c};
      rows.insert(rows.end(), negs.begin(), negs.end());
      for (auto r : rows) {
        double total = r == c ? g.context[j] : 0.0;
        for (std::size_t k = 0; k < negs.size(); ++k)
          if (negs[k] == r) total += g.negatives[k][j];
        EXPECT_LT(rel_err(total, fd(m.U(r, j))), 1e-6);
      }
    }
  }
}

TEST(SgnsStep, AppliesTheGradient) {
  std::mt19937_64 rng(9);
  auto m = testing_util::random_model(rng, 5, 4, 0.3);
  const std::vector<WordId> negs{3, 4};
  auto g = sgns_gradient(m, 0, 1, negs);
  auto before = m;
  const double lr = 0.1;
  const double obj = sgns_step(m, 0, 1, negs, lr);
  EXPECT_NEAR(obj, g.objective, 1e-15);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(m.V(0, j), before.V(0, j) + lr * g.word[j], 1e-15);
    EXPECT_NEAR(m.U(1, j), before.U(1, j) + lr * g.context[j], 1e-15);
    EXPECT_NEAR(m.U(3, j), before.U(3, j) + lr * g.negatives[0][j], 1e-15);
  }
  EXPECT_GT(objective(m, 0, 1, negs), obj);
  EXPECT_THROW(sgns_step(m, 0, 1, negs, 0.0), ConfigError);
}

TEST(SgnsStep, NonFiniteIsDivergence) {
  std::mt19937_64 rng(1);
  auto m = testing_util::random_model(rng, 3, 2, 0.1);
  m.U(1, 0) = INFINITY;
  const std::vector<WordId> negs{2};
  EXPECT_THROW(sgns_step(m, 0, 1, negs, 0.1), DivergenceError);
}

TEST(SgnsStep, RepeatedPairConverges) {
  // Two words, k = 1; the positive pair (0, 1) is pulled together while word 0
  // is the negative.
  auto vocab = testing_util::toy_vocab(2);
  auto m = init_sgns(vocab, 10, 1);
  const std::vector<WordId> negs{0};
  int steps = 0;
  while (sigmoid(dot(m.V.row(0), m.U.row(1))) <= 0.9 && steps < 1000) {
    sgns_step(m, 0, 1, negs, 0.025);
    ++steps;
  }
  // From the small default initialization this takes a little over 200 steps.
  EXPECT_LE(steps, 400);
  EXPECT_GT(sigmoid(dot(m.V.row(0), m.U.row(1))), 0.9);
}

TEST(TrainSgns, ZeroEpochsReturnsInit) {
  auto vocab = testing_util::toy_vocab(4);
  IdCorpus c{{0, 1, 2, 3}};
  SgnsConfig cfg;
  cfg.dim = 5;
  cfg.epochs = 0;
  EXPECT_EQ(train_sgns(c, vocab, cfg), init_sgns(vocab, 5, cfg.seed));
  auto init = init_sgns(vocab, 5, 1);
  for (double x : init.V.data()) EXPECT_LE(std::abs(x), 0.5 / 5);
  for (double x : init.U.data()) EXPECT_EQ(x, 0.0);
}

TEST(TrainSgns, DeterministicSingleWorker) {
  std::mt19937_64 rng(2);
  auto c = testing_util::random_id_corpus(rng, 8, 500);
  auto vocab = testing_util::toy_vocab(8);
  SgnsConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 2;
  cfg.seed = 4;
  auto a = train_sgns(c, vocab, cfg);
  auto b = train_sgns(c, vocab, cfg);
  EXPECT_EQ(a, b);
  cfg.seed = 5;
  EXPECT_NE(train_sgns(c, vocab, cfg), a);
}

TEST(TrainSgns, ObjectiveImproves) {
  std::vector<Sentence> s;
  for (int i = 0; i < 300; ++i) s.push_back({"red", "apple", "green", "pear", i % 2 ? "red" : "green"});
  auto vocab = build_vocab(s, 1);
  SgnsConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 5;
  cfg.window = 2;
  TrainLog log;
  train_sgns(encode(s, vocab), vocab, cfg, &log);
  ASSERT_EQ(log.values.size(), 5u);
  EXPECT_GT(log.values.back(), log.values.front());
}

TEST(TrainSgns, ParallelRunStaysFinite) {
  std::mt19937_64 rng(3);
  auto c = testing_util::random_id_corpus(rng, 10, 2000);
  auto vocab = testing_util::toy_vocab(10);
  SgnsConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 2;
  cfg.threads = 4;
  auto m = train_sgns(c, vocab, cfg);
  EXPECT_NO_THROW(m.validate());
}

TEST(Embx, RoundTripIsLossless) {
  std::mt19937_64 rng(8);
  for (auto tag : {ModelTag::sgns, ModelTag::glove}) {
    auto m = testing_util::random_model(rng, 4, 3, 1.0, tag);
    std::stringstream ss;
    write_embx(ss, m, "cafe");
    EXPECT_EQ(read_embx(ss), m);
  }
  std::istringstream bad("embx 1 2 1 sgns\nw 0.1 0.2\n");
  EXPECT_THROW(read_embx(bad), DataError);
}
