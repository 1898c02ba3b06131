#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace biaslens;
using testing_util::source_path;
using testing_util::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

/// Small synthetic corpus plus a config that exercises every stage.
struct Workspace {
  TempDir dir{"pipeline"};

  Workspace() {
    SyntheticConfig sc;
    sc.tokens = 6000;
    sc.pairs = load_pairs(source_path("data/lexicon/gender_pairs.tsv"));
    auto corpus = synthetic_corpus(sc);
    write_file(dir.path() / "corpus.txt", [&](std::ostream& o) { write_sentences(o, corpus.sentences); });
    write_file(dir.path() / "stats.csv", [&](std::ostream& o) {
      o << "occupation,percent_female\n";
      for (std::size_t i = 0; i < sc.occupations.size(); ++i) o << sc.occupations[i] << ',' << 100 * sc.ratios[i] << '\n';
    });
  }

  Config config(const std::string& extra = "", const std::string& out = "out") const {
    std::ostringstream c;
    c << "corpus = corpus.txt\n"
      << "output_dir = " << out << "\n"
      << "lexicon.z = " << source_path("data/lexicon/female.txt") << "\n"
      << "lexicon.z_prime = " << source_path("data/lexicon/male.txt") << "\n"
      << "lexicon.pairs = " << source_path("data/lexicon/gender_pairs.tsv") << "\n"
      << "occupations = " << source_path("data/lexicon/occupations.tsv") << "\n"
      << "stats.labor = stats.csv\n"
      << "representations = sg,esg,ppmi,glove,eglove\n"
      << "measures = weam2nd,weam1st,centroid,directional\n"
      << "min_count = 3\nsgns.dim = 8\nsgns.epochs = 1\nglove.dim = 6\nglove.epochs = 2\nreport.bins = 5\n"
      << extra;
    std::istringstream in(c.str());
    return Config::parse(in, dir.path());
  }
};

PipelineOptions quiet(bool force = false) {
  static std::ostringstream sink;
  PipelineOptions o;
  o.force = force;
  o.log = &sink;
  return o;
}

std::vector<bool> skipped(const PipelineResult& r) {
  std::vector<bool> out;
  for (const auto& s : r.stages) out.push_back(s.skipped);
  return out;
}

}  // namespace

TEST(Pipeline, EmitsEveryArtifact) {
  Workspace ws;
  auto r = run_pipeline(ws.config(), quiet());
  const auto out = ws.dir.path() / "out";
  for (const auto& st : r.stages)
    for (const auto& o : st.outputs) EXPECT_TRUE(fs::exists(out / o)) << o;
  EXPECT_TRUE(fs::exists(out / "reports/esg_weam1st.svg"));
  EXPECT_TRUE(fs::exists(out / "reports/sg_directional.json"));
  EXPECT_FALSE(fs::exists(out / "reports/sg_directional.svg"));
  EXPECT_FALSE(fs::exists(out / "reports/sg_weam1st.json"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));

  std::ifstream in(out / "reports/esg_weam1st.json");
  auto report = read_report_json(in);
  EXPECT_EQ(report.metadata.at("esg_noise_exponent"), "0.75");
  EXPECT_FALSE(report.records.empty());

  std::ifstream corr(out / "correlation.json");
  auto rows = correlation_from_json(Json::parse(corr));
  // sg and glove: 3 second-order measures; esg, ppmi, eglove: all 4.
  EXPECT_EQ(rows.size(), 18u);
  for (const auto& row : rows) EXPECT_EQ(row.n, 9u);
}

TEST(Pipeline, ByteIdenticalAcrossRuns) {
  Workspace ws;
  run_pipeline(ws.config("", "a"), quiet());
  run_pipeline(ws.config("", "b"), quiet());
  auto a = tree(ws.dir.path() / "a");
  auto b = tree(ws.dir.path() / "b");
  ASSERT_FALSE(a.empty());
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, body] : a) {
    // The manifest records the config hash, which covers output_dir.
    if (name == "manifest.json") continue;
    EXPECT_TRUE(b.contains(name) && b.at(name) == body) << name;
  }
}

TEST(Pipeline, SkipsUpToDateStages) {
  Workspace ws;
  auto first = run_pipeline(ws.config(), quiet());
  for (bool s : skipped(first)) EXPECT_FALSE(s);
  const auto before = tree(ws.dir.path() / "out");

  auto second = run_pipeline(ws.config(), quiet());
  for (bool s : skipped(second)) EXPECT_TRUE(s);
  EXPECT_EQ(tree(ws.dir.path() / "out"), before);

  auto forced = run_pipeline(ws.config(), quiet(true));
  for (bool s : skipped(forced)) EXPECT_FALSE(s);
  EXPECT_EQ(tree(ws.dir.path() / "out"), before);

  // Changing a measurement key reruns only measure and evaluate.
  auto changed = run_pipeline(ws.config("ppmi.shift = 2\n"), quiet());
  std::map<std::string, bool> by_name;
  for (const auto& s : changed.stages) by_name[s.name] = s.skipped;
  EXPECT_TRUE(by_name.at("vocab"));
  EXPECT_TRUE(by_name.at("counts"));
  EXPECT_TRUE(by_name.at("train"));
  EXPECT_FALSE(by_name.at("measure"));
  EXPECT_FALSE(by_name.at("evaluate"));

  // A deleted output forces its stage to run again.
  fs::remove(ws.dir.path() / "out/cooc.tsv");
  auto repaired = run_pipeline(ws.config("ppmi.shift = 2\n"), quiet());
  EXPECT_FALSE(repaired.stages[1].skipped);
  EXPECT_TRUE(fs::exists(ws.dir.path() / "out/cooc.tsv"));
}

TEST(Pipeline, ValidatesBeforeWork) {
  Workspace ws;
  fs::remove(ws.dir.path() / "corpus.txt");
  EXPECT_THROW(run_pipeline(ws.config(), quiet()), ConfigError);
  EXPECT_FALSE(fs::exists(ws.dir.path() / "out"));
}

TEST(Pipeline, SettingsErrors) {
  Workspace ws;
  EXPECT_THROW(settings_from_config(ws.config("ppmi.alpha = 1.5\n")), ConfigError);
  EXPECT_THROW(settings_from_config(ws.config("report.pool = all\n")), ConfigError);
  EXPECT_THROW(settings_from_config(ws.config("window = 0\n")), ConfigError);
  std::istringstream in("corpus = corpus.txt\noutput_dir = o\nlexicon.z = " + source_path("data/lexicon/female.txt") +
                        "\nlexicon.z_prime = " + source_path("data/lexicon/male.txt") +
                        "\noccupations = " + source_path("data/lexicon/occupations.tsv") +
                        "\nmeasures = directional\n");
  EXPECT_THROW(settings_from_config(Config::parse(in, ws.dir.path())), ConfigError);

  auto base = ws.config();
  base.set("representations", "sg,sg");
  EXPECT_THROW(settings_from_config(base), ConfigError);
  base.set("representations", "init_glove");
  base.set("measures", "weam2nd");
  EXPECT_THROW(settings_from_config(base), ConfigError);
  base.set("representations", "bert");
  EXPECT_THROW(settings_from_config(base), ConfigError);
}

TEST(Pipeline, Applicability) {
  EXPECT_TRUE(applicable(Representation::esg, Measure::weam1st));
  EXPECT_TRUE(applicable(Representation::ppmi, Measure::weam2nd));
  EXPECT_FALSE(applicable(Representation::sg, Measure::weam1st));
  EXPECT_FALSE(applicable(Representation::init_glove, Measure::centroid));
  for (auto r : {Representation::sg, Representation::glove, Representation::ppmi, Representation::init_glove,
                 Representation::esg, Representation::eglove})
    EXPECT_EQ(parse_representation(to_string(r)), r);
}
