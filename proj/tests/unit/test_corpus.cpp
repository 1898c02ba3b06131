#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"

using namespace biaslens;

TEST(Tokenize, DropsDigitsAndPunctuation) {
  EXPECT_EQ(normalize_line("Dr. Smith, 42!"), (Sentence{"dr", "smith"}));
  EXPECT_TRUE(normalize_line("").empty());
  EXPECT_EQ(normalize_line("He HE he"), (Sentence{"he", "he", "he"}));
}

TEST(Tokenize, PunctuationInsideWordIsDeletedNotSplit) {
  EXPECT_EQ(normalize_line("don't co-op"), (Sentence{"dont", "coop"}));
  EXPECT_EQ(normalize_line("a\tb  c"), (Sentence{"a", "b", "c"}));
}

TEST(Tokenize, UnicodeLettersSurvive) {
  EXPECT_EQ(normalize_line("Über café"), (Sentence{"über", "café"}));
  EXPECT_EQ(normalize_line("“quoted” — text"), (Sentence{"quoted", "text"}));
}

TEST(Tokenize, MalformedUtf8ReportsLine) {
  const std::string text = "fine line\nbad \xC3\x28 line\n";
  try {
    tokenize_normalize(std::string_view(text));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Tokenize, EmptyLinesProduceNoSentence) {
  auto s = tokenize_normalize(std::string_view("a b\n\n42\nc\n"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1], (Sentence{"c"}));
}

TEST(Tokenize, ThreadCountDoesNotChangeResult) {
  std::string text;
  for (int i = 0; i < 500; ++i) text += "Line " + std::to_string(i) + " has Words, punct; and more\n";
  EXPECT_EQ(tokenize_normalize(std::string_view(text), 1), tokenize_normalize(std::string_view(text), 4));
}

TEST(Vocab, MinCountFilters) {
  const std::vector<Sentence> s{{"a", "a", "b"}};
  auto v2 = build_vocab(s, 2);
  ASSERT_EQ(v2.size(), 1u);
  EXPECT_EQ(v2.word(0), "a");
  EXPECT_EQ(v2.count(0), 2u);
  EXPECT_EQ(v2.total(), 3u);

  auto v1 = build_vocab(s, 1);
  ASSERT_EQ(v1.size(), 2u);
  EXPECT_EQ(v1.word(1), "b");
  EXPECT_EQ(v1.count(1), 1u);
}

TEST(Vocab, OrderedByCountThenWord) {
  const std::vector<Sentence> s{{"c", "b", "a", "c", "b", "d"}};
  auto v = build_vocab(s, 1);
  EXPECT_EQ(std::vector<std::string>(v.words().begin(), v.words().end()),
            (std::vector<std::string>{"b", "c", "a", "d"}));
}

TEST(Vocab, EmptyCorpusIsAnError) {
  EXPECT_THROW(build_vocab(std::vector<Sentence>{}, 1), DataError);
  EXPECT_THROW(build_vocab(std::vector<Sentence>{{"a"}}, 2), DataError);
}

TEST(Vocab, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(3);
  std::vector<Sentence> s;
  for (int i = 0; i < 300; ++i) {
    Sentence x;
    for (int j = 0; j < 7; ++j) x.push_back(std::string(1, static_cast<char>('a' + rng() % 20)));
    s.push_back(x);
  }
  EXPECT_EQ(build_vocab(s, 3, 1), build_vocab(s, 3, 5));
}

TEST(Vocab, RoundTripsThroughTsv) {
  auto v = build_vocab(std::vector<Sentence>{{"x", "y", "x", "z", "q"}}, 1);
  std::stringstream ss;
  write_vocab(ss, v, "abc");
  EXPECT_EQ(read_vocab(ss), v);
}

TEST(Subsample, KeepProbability) {
  const double t = 1e-3;
  EXPECT_EQ(keep_probability(t, t), 1.0);
  EXPECT_EQ(keep_probability(t / 10, t), 1.0);
  EXPECT_NEAR(keep_probability(100 * t, t), 0.11, 1e-12);
  EXPECT_EQ(keep_probability(0.5, 0.0), 1.0);
}

TEST(Subsample, ZeroThresholdIsIdentity) {
  std::mt19937_64 rng(1);
  auto c = testing_util::random_id_corpus(rng, 5, 100);
  auto v = testing_util::toy_vocab(5);
  EXPECT_EQ(subsample(c, v, 0.0, 9), c);
}

TEST(Subsample, PreservesSentenceCountAndIsSeeded) {
  std::vector<Sentence> s;
  for (int i = 0; i < 200; ++i) s.push_back({"the", "the", "cat", "the", "dog"});
  auto v = build_vocab(s, 1);
  auto ids = encode(s, v);
  auto a = subsample(ids, v, 1e-2, 5);
  auto b = subsample(ids, v, 1e-2, 5);
  auto c = subsample(ids, v, 1e-2, 6);
  EXPECT_EQ(a.size(), ids.size());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Frequent "the" (z = 0.6) is thinned much more than the rarer words.
  std::size_t the = 0, cat = 0;
  for (auto& x : a)
    for (auto id : x) (v.word(id) == "the" ? the : cat) += v.word(id) == "the" || v.word(id) == "cat";
  EXPECT_LT(static_cast<double>(the) / 600.0, static_cast<double>(cat) / 200.0);
}

TEST(Subsample, KeptFractionMatchesProbability) {
  std::vector<Sentence> s(2000, Sentence{"w", "w", "w", "x"});
  auto v = build_vocab(s, 1);
  const double t = 0.01;
  const double p = keep_probability(0.75, t);
  auto out = subsample(encode(s, v), v, t, 11);
  double kept = 0;
  for (auto& x : out)
    for (auto id : x) kept += v.word(id) == "w";
  const double n = 6000;
  EXPECT_NEAR(kept / n, p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(ArtifactHeader, ParsesFields) {
  auto h = ArtifactHeader::parse("# cooc window=5 tokens=10");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->kind, "cooc");
  EXPECT_EQ(h->get("window"), "5");
  EXPECT_FALSE(h->get("nope"));
  EXPECT_EQ(ArtifactHeader::parse(h->render())->fields, h->fields);
}
