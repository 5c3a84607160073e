#include <gtest/gtest.h>

#include <filesystem>

#include "dcg/harness.hpp"

using namespace dcg;

namespace {

MetricsTable sample_table() {
  MetricsTable t;
  MetricRow a;
  a.set("kind", "run").set("experiment", "dict-attack").set("game", "ships").set("fps", 20).set("objects", 4);
  a.set("run", 0).set("seed", format_seed(0xabcdefULL)).set("success", 1).set("time_s", 7.125);
  a.set("reference", "ref 100/100 success, quoted \"text\"");
  MetricRow b;
  b.set("kind", "run").set("experiment", "relay-sweep").set("game", "animals").set("rate", 1e-7);
  b.set("error_per_click", 0.5).set("reference", "line\nbreak");
  t.rows = {a, b};
  return t;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dcg_harness_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Metrics, CsvRoundTrip) {
  const auto t = sample_table();
  EXPECT_EQ(from_csv(to_csv(t)), t);
  EXPECT_EQ(to_csv(from_csv(to_csv(t))), to_csv(t));
}

TEST(Metrics, JsonRoundTrip) {
  const auto t = sample_table();
  EXPECT_EQ(from_json(to_json(t)), t);
  EXPECT_EQ(from_csv(to_csv(from_json(to_json(t)))), t);
}

TEST(Metrics, SchemaMismatchIsAnError) {
  EXPECT_THROW(from_csv("kind,game\nrun,ships\n"), SchemaError);
  EXPECT_THROW(from_json(R"({"schema":"other/1","columns":[],"rows":[]})"), SchemaError);
  EXPECT_THROW(from_json("[1,2]"), SchemaError);
  EXPECT_TRUE(from_csv("").rows.empty());
  EXPECT_THROW(from_csv(to_csv({}) + "\"run,ships\n"), SchemaError);
  EXPECT_THROW(from_csv(to_csv({}) + "run,ships\n"), SchemaError);
}

TEST(Metrics, LoadDetectsFormat) {
  const auto t = sample_table();
  write_text(scratch("m.csv"), to_csv(t));
  write_text(scratch("m.json"), to_json(t));
  EXPECT_EQ(load_metrics(scratch("m.csv")), t);
  EXPECT_EQ(load_metrics(scratch("m.json")), t);
}

TEST(Report, EmptyAndSingleInput) {
  EXPECT_TRUE(report({}).rows.empty());
  const auto t = sample_table();
  EXPECT_EQ(report({t}), t);
  EXPECT_EQ(to_csv(report({t})), to_csv(t));
  const auto two = report({t, t});
  EXPECT_EQ(two.rows.size(), 4u);
  EXPECT_FALSE(render_comparison(two).empty());
}

TEST(Summaries, MeanAndStddev) {
  MetricsTable t;
  for (double v : {1.0, 2.0, 3.0, 6.0}) {
    MetricRow r;
    r.set("kind", "run").set("experiment", "probe-train").set("game", "ships").set("fps", 20).set("objects", 5);
    r.set("drags", v);
    t.rows.push_back(r);
  }
  add_summaries(t);
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[4].text("kind"), "mean");
  EXPECT_DOUBLE_EQ(*t.rows[4].number("drags"), 3.0);
  EXPECT_EQ(t.rows[5].text("kind"), "stddev");
  EXPECT_NEAR(*t.rows[5].number("drags"), std::sqrt(14.0 / 3.0), 1e-8);
  EXPECT_EQ(t.rows[4].text("run"), "4");
}

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
  const auto c = parse_lab_config(R"({"port": 9000, "service": {"drag_cap": 3, "hold_cap": 40},
                                      "solver": {"target_method": "edge", "attempts_per_object": 1}})");
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.service.drag_cap, 3);
  EXPECT_EQ(c.service.hold_cap, 40);
  EXPECT_EQ(c.solver.target_method, TargetMethod::Edge);
  EXPECT_EQ(c.solver.attempts_per_object, 1);
  EXPECT_THROW(parse_lab_config(R"({"prot": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_lab_config(R"({"service": {"dragcap": 1}})"), std::invalid_argument);
  EXPECT_THROW(parse_lab_config(R"({"solver": {"target_method": "guess"}})"), std::invalid_argument);
}

TEST(Experiments, SameSeedSameBytes) {
  ExperimentSpec s;
  s.experiment = Experiment::ProbeTrain;
  s.games = {GameType::Ships};
  s.runs = 2;
  s.master_seed = 5;
  const auto a = run_experiment(s);
  const auto b = run_experiment(s);
  EXPECT_EQ(to_csv(a.table), to_csv(b.table));
  EXPECT_EQ(to_json(a.table), to_json(b.table));
  s.master_seed = 6;
  EXPECT_NE(to_csv(run_experiment(s).table), to_csv(a.table));
}

TEST(Experiments, WritesOutputAndDictionary) {
  ExperimentSpec s;
  s.experiment = Experiment::ProbeTrain;
  s.games = {GameType::Shapes};
  s.runs = 1;
  s.output = scratch("probe.json");
  s.format = OutputFormat::JSON;
  s.dictionary = scratch("probe.dcgd");
  const auto r = run_experiment(s);
  EXPECT_EQ(load_metrics(*s.output), r.table);
  EXPECT_EQ(Dictionary::load(*s.dictionary).size(), 1u);

  ExperimentSpec atk;
  atk.experiment = Experiment::DictAttack;
  atk.games = {GameType::Shapes};
  atk.params = {{20, 5}};
  atk.runs = 3;
  atk.dictionary = s.dictionary;
  const auto a = run_experiment(atk);
  int runs = 0;
  for (const auto& row : a.table.rows)
    if (row.text("kind") == "run") {
      ++runs;
      EXPECT_EQ(row.text("success"), "1");
    }
  EXPECT_EQ(runs, 3);
}

TEST(Experiments, RejectsBadSpecs) {
  ExperimentSpec s;
  s.experiment = Experiment::GuessBaseline;
  s.guess_r = {10};
  EXPECT_THROW(run_experiment(s), std::invalid_argument);
  s.guess_r = {1};
  s.guess_trials = kMaxGuessTrials + 1;
  EXPECT_THROW(run_experiment(s), std::invalid_argument);
  ExperimentSpec p;
  p.params = {{0, 4}};
  EXPECT_THROW(run_experiment(p), std::invalid_argument);
}

TEST(MergeKnowledge, SnapsNewAnswersOntoKnownTargets) {
  EmbeddedService es([] {
    ServiceConfig c;
    c.expose_ground_truth = true;
    return c;
  }());
  auto rep = probe_game(es.source(), GameType::Ships, 20, 5);
  ASSERT_TRUE(rep);
  Dictionary db;
  merge_knowledge(db, rep->record);
  ASSERT_EQ(db.size(), 1u);
  const size_t known = db.records()[0].bindings.size();

  KnowledgeRecord extra = rep->record;
  Binding fresh = extra.bindings[0];
  fresh.histogram = Histogram{};
  fresh.histogram[5] = 100;
  fresh.centroid.x += 3;
  extra.bindings = {extra.bindings[0], fresh};
  merge_knowledge(db, extra);
  ASSERT_EQ(db.size(), 1u);
  const auto& merged = db.records()[0];
  ASSERT_EQ(merged.bindings.size(), known + 1);
  EXPECT_EQ(merged.bindings.back().centroid, rep->record.bindings[0].centroid);
}
