#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcg/guess.hpp"
#include "dcg/http.hpp"
#include "dcg/relay.hpp"
#include "dcg/solver.hpp"

namespace dcg {

// --- Metrics tables ----------------------------------------------------------
//
// Fixed columns, in this order, for both CSV and JSON output:
//
//   kind               run | mean | stddev | analytic
//   experiment         probe-train | dict-attack | guess-baseline | guess-live |
//                      relay-sweep | direct-play | vision-bench
//   game               ships | shapes | animals | parking | grid
//   fps, objects       parameterization (empty for grid guessing)
//   run                run index within the cell
//   seed               per-run seed, hex
//   trials             Monte-Carlo trials behind the row
//   success            1/0 per run; completion rate for batched rows
//   answers            answer objects in the challenge (r for guessing)
//   drags              drags performed (clicks for relay rows)
//   drags_per_object   drags / objects
//   crosses            rejected drags (wrong-object clicks for relay rows)
//   time_s             simulated seconds (relay: overall time, failures as 60 s)
//   successful_time_s  simulated seconds over successful runs only
//   rate               experiment rate: success / pixel error / guess rate
//   ci_low, ci_high    Wilson 95% interval for `rate`
//   error_per_click    rejected or missed clicks / clicks
//   reaction_s         mean reaction time of the relay solver
//   reference          published reference values for the same cell

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {
      "kind",     "experiment",       "game",    "fps",    "objects",           "run",  "seed",
      "trials",   "success",          "answers", "drags",  "drags_per_object",  "crosses",
      "time_s",   "successful_time_s", "rate",   "ci_low", "ci_high",           "error_per_click",
      "reaction_s", "reference"};
  return cols;
}

inline bool is_text_column(const std::string& c) {
  return c == "kind" || c == "experiment" || c == "game" || c == "seed" || c == "reference";
}

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_seed(uint64_t s) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(s));
  return buf;
}

struct MetricRow {
  std::map<std::string, std::string> cells;

  MetricRow& set(const std::string& col, const std::string& v) {
    if (v.empty())
      cells.erase(col);
    else
      cells[col] = v;
    return *this;
  }
  MetricRow& set(const std::string& col, double v) { return set(col, format_number(v)); }
  MetricRow& set(const std::string& col, int v) { return set(col, std::to_string(v)); }
  MetricRow& set(const std::string& col, uint64_t v) { return set(col, std::to_string(v)); }

  std::string text(const std::string& col) const {
    auto it = cells.find(col);
    return it == cells.end() ? std::string() : it->second;
  }
  std::optional<double> number(const std::string& col) const {
    const std::string s = text(col);
    if (s.empty()) return std::nullopt;
    try {
      size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) return std::nullopt;
      return v;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct MetricsTable {
  std::vector<MetricRow> rows;
  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits CSV text into records of fields. Quoted fields may hold commas,
/// doubled quotes and line breaks.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string cur;
  bool quoted = false, any = false;
  auto end_record = [&] {
    if (any || !cur.empty() || !rec.empty()) {
      rec.push_back(cur);
      records.push_back(std::move(rec));
    }
    rec.clear();
    cur.clear();
    any = false;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = any = true;
    } else if (c == ',') {
      rec.push_back(cur);
      cur.clear();
      any = true;
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw SchemaError("CSV ends inside a quoted field");
  end_record();
  return records;
}

}  // namespace detail

inline std::string to_csv(const MetricsTable& t) {
  std::string out;
  const auto& cols = metric_columns();
  for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + detail::csv_field(r.text(cols[i]));
    out += "\n";
  }
  return out;
}

inline MetricsTable from_csv(const std::string& text) {
  MetricsTable t;
  const auto records = detail::parse_csv(text);
  if (records.empty()) return t;
  const auto& cols = metric_columns();
  if (records[0] != cols) throw SchemaError("CSV header does not match the metrics schema");
  for (size_t k = 1; k < records.size(); ++k) {
    const auto& f = records[k];
    if (f.size() != cols.size()) throw SchemaError("CSV row has " + std::to_string(f.size()) + " fields");
    MetricRow r;
    for (size_t i = 0; i < cols.size(); ++i)
      if (!f[i].empty()) r.cells[cols[i]] = f[i];
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline constexpr const char* kMetricsSchema = "dcg-metrics/1";

inline std::string to_json(const MetricsTable& t) {
  nlohmann::ordered_json j;
  j["schema"] = kMetricsSchema;
  j["columns"] = metric_columns();
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& c : metric_columns()) {
      const std::string v = r.text(c);
      if (v.empty())
        row.push_back(nullptr);
      else if (is_text_column(c))
        row.push_back(v);
      else
        row.push_back(*r.number(c));
    }
    j["rows"].push_back(std::move(row));
  }
  return j.dump(1) + "\n";
}

inline MetricsTable from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaError("not a JSON metrics document");
  if (j.value("schema", "") != kMetricsSchema) throw SchemaError("unknown metrics schema");
  if (!j.contains("columns") || j["columns"].get<std::vector<std::string>>() != metric_columns())
    throw SchemaError("JSON columns do not match the metrics schema");
  MetricsTable t;
  const auto& cols = metric_columns();
  for (const auto& row : j.at("rows")) {
    if (!row.is_array() || row.size() != cols.size()) throw SchemaError("JSON row has the wrong width");
    MetricRow r;
    for (size_t i = 0; i < cols.size(); ++i) {
      const auto& v = row[i];
      if (v.is_null()) continue;
      r.cells[cols[i]] = v.is_string() ? v.get<std::string>() : format_number(v.get<double>());
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

enum class OutputFormat : uint8_t { CSV, JSON };

inline std::string serialize(const MetricsTable& t, OutputFormat f) { return f == OutputFormat::CSV ? to_csv(t) : to_json(t); }

inline MetricsTable load_metrics(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return from_json(text);
  return from_csv(text);
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// --- Reference values ----------------------------------------------------------

struct GameReference {
  double usability_time, usability_error_per_click;
  double relay_overall, relay_successful, relay_error_rate, relay_error_per_click;
  double reaction_mean, reaction_sd, reaction_correct;
};

inline GameReference game_reference(GameType g) {
  switch (g) {
    case GameType::Ships: return {4.51, 0.04, 30.92, 22.25, 0.26, 0.17, 2.27, 0.34, 2.06};
    case GameType::Animals: return {9.10, 0.05, 46.51, 37.93, 0.40, 0.65, 2.58, 0.35, 1.85};
    case GameType::Parking: return {4.37, 0.09, 28.16, 20.45, 0.22, 0.66, 2.50, 0.51, 2.00};
    case GameType::Shapes: return {5.26, 0.03, 26.19, 22.94, 0.09, 0.56, 2.17, 0.20, 1.62};
  }
  return {};
}

inline std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Human-study and attack reference values for one table cell.
inline std::string reference_annotation(const std::string& experiment, const std::string& game, int fps, int objects) {
  const auto g = parse_game_type(game);
  if (experiment == "guess-baseline" || experiment == "guess-live") return "ref 0.1% / 0.000281% / 0.00000123% for r=1/2/3";
  if (experiment == "vision-bench") return "ref background pixel error < 7%; MBR centre in target for all challenges";
  if (!g) return "";
  const GameReference r = game_reference(*g);
  if (experiment == "probe-train") return "ref < 2 drags per object with 5 objects";
  if (experiment == "dict-attack") return "ref 100/100 success; 6.9 s mean, 9.3 s max attack time";
  if (experiment == "relay-sweep")
    return "ref relay overall " + fixed(r.relay_overall) + " s, successful " + fixed(r.relay_successful) +
           " s, error rate " + fixed(r.relay_error_rate) + ", error/click " + fixed(r.relay_error_per_click) +
           ", reaction " + fixed(r.reaction_mean) + " (" + fixed(r.reaction_sd) + ") s";
  if (experiment == "direct-play") {
    std::string s = "ref usability " + fixed(r.usability_time) + " s, error/click " + fixed(r.usability_error_per_click);
    if (fps == 10) s += "; 10 FPS 5.74 s";
    if (fps == 40) s += "; 40 FPS 6.53 s";
    if (objects == 5) s += "; 5 objects 5.30 s";
    if (objects == 6) s += "; 6 objects 6.58 s";
    return s;
  }
  return "";
}

// --- Summaries -----------------------------------------------------------------

/// Appends mean and stddev rows for every (experiment, game, fps, objects,
/// reaction) cell that has run rows.
inline void add_summaries(MetricsTable& t) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricRow*>> groups;
  for (const auto& r : t.rows) {
    if (r.text("kind") != "run") continue;
    const std::string key = r.text("experiment") + "|" + r.text("game") + "|" + r.text("fps") + "|" +
                            r.text("objects") + "|" + r.text("reaction_s") + "|" + r.text("answers");
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  static const std::vector<std::string> keep = {"experiment", "game", "fps", "objects", "reaction_s", "reference"};
  std::vector<MetricRow> extra;
  for (const auto& key : order) {
    const auto& rs = groups[key];
    MetricRow mean, sd;
    mean.set("kind", "mean");
    sd.set("kind", "stddev");
    for (const auto& c : keep) {
      mean.set(c, rs.front()->text(c));
      sd.set(c, rs.front()->text(c));
    }
    mean.set("run", static_cast<int>(rs.size()));
    sd.set("run", static_cast<int>(rs.size()));
    for (const auto& c : metric_columns()) {
      if (is_text_column(c) || c == "fps" || c == "objects" || c == "run" || c == "reaction_s") continue;
      std::vector<double> vs;
      for (const auto* r : rs)
        if (auto v = r->number(c)) vs.push_back(*v);
      if (vs.empty()) continue;
      double m = 0;
      for (double v : vs) m += v;
      m /= static_cast<double>(vs.size());
      double var = 0;
      for (double v : vs) var += (v - m) * (v - m);
      const double s = vs.size() > 1 ? std::sqrt(var / static_cast<double>(vs.size() - 1)) : 0.0;
      mean.set(c, m);
      sd.set(c, s);
    }
    extra.push_back(std::move(mean));
    extra.push_back(std::move(sd));
  }
  for (auto& r : extra) t.rows.push_back(std::move(r));
}

/// Merges metric files. One input comes back unchanged.
inline MetricsTable report(const std::vector<MetricsTable>& inputs) {
  MetricsTable out;
  for (const auto& t : inputs) out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
  return out;
}

/// Side-by-side text table: one line per cell from the mean rows (or analytic
/// rows), with the reference values alongside.
inline std::string render_comparison(const MetricsTable& t) {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-15s %-8s %4s %4s %5s %5s %8s %9s %9s %10s %9s %11s  %s\n", "experiment", "game",
                "fps", "obj", "react", "n", "success", "time_s", "succ_t_s", "err/click", "drags/obj", "rate",
                "reference");
  os << buf;
  auto cell = [](const MetricRow& r, const char* c, int digits) {
    auto v = r.number(c);
    return v ? fixed(*v, digits) : std::string("-");
  };
  std::map<std::string, std::pair<double, double>> relay_vs_direct;
  for (const auto& r : t.rows) {
    const std::string kind = r.text("kind");
    if (kind != "mean" && kind != "analytic") continue;
    auto rate = r.number("rate");
    char ratebuf[32] = "-";
    if (rate) std::snprintf(ratebuf, sizeof ratebuf, "%.4g", *rate);
    std::snprintf(buf, sizeof buf, "%-15s %-8s %4s %4s %5s %5s %8s %9s %9s %10s %9s %11s  %s\n",
                  r.text("experiment").c_str(), r.text("game").c_str(), r.text("fps").c_str(), r.text("objects").c_str(),
                  r.text("reaction_s").empty() ? "-" : fixed(*r.number("reaction_s"), 2).c_str(),
                  r.text(kind == "mean" ? "run" : "trials").c_str(), cell(r, "success", 3).c_str(),
                  cell(r, "time_s", 2).c_str(), cell(r, "successful_time_s", 2).c_str(),
                  cell(r, "error_per_click", 3).c_str(), cell(r, "drags_per_object", 2).c_str(), ratebuf,
                  r.text("reference").c_str());
    os << buf;
    const std::string key = r.text("game") + " @" + r.text("fps") + " FPS, " + r.text("objects") + " objects";
    if (auto tm = r.number("time_s")) {
      if (r.text("experiment") == "relay-sweep") relay_vs_direct[key].first = *tm;
      if (r.text("experiment") == "direct-play") relay_vs_direct[key].second = *tm;
    }
  }
  for (const auto& [key, v] : relay_vs_direct)
    if (v.first > 0 || v.second > 0)
      os << key << ": relay overall " << fixed(v.first) << " s vs direct " << fixed(v.second) << " s\n";
  return os.str();
}

// --- Configuration -------------------------------------------------------------

/// Shared by `serve` and the experiment subcommands.
struct LabConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_root;
  ServiceConfig service;
  SolverParams solver;
};

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok |= it.key() == k;
    if (!ok) throw std::invalid_argument(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline LabConfig parse_lab_config(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, true, true);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  detail::reject_unknown(j, {"host", "port", "static_root", "service", "solver"}, "config");
  LabConfig c;
  detail::take(j, "host", c.host);
  detail::take(j, "port", c.port);
  if (j.contains("static_root") && j["static_root"].is_string()) c.static_root = j["static_root"].get<std::string>();
  if (j.contains("service")) {
    const auto& s = j["service"];
    detail::reject_unknown(s,
                           {"master_seed", "drag_cap", "hold_cap", "timeout", "expiry_grace", "max_sessions",
                            "answer_variant", "answer_variant_pool", "noise_variant"},
                           "service");
    detail::take(s, "master_seed", c.service.master_seed);
    detail::take(s, "drag_cap", c.service.drag_cap);
    if (s.contains("hold_cap") && !s["hold_cap"].is_null()) c.service.hold_cap = s["hold_cap"].get<int>();
    detail::take(s, "timeout", c.service.timeout);
    detail::take(s, "expiry_grace", c.service.expiry_grace);
    detail::take(s, "max_sessions", c.service.max_sessions);
    if (s.contains("answer_variant") && !s["answer_variant"].is_null())
      c.service.answer_variant = s["answer_variant"].get<int>();
    detail::take(s, "answer_variant_pool", c.service.answer_variant_pool);
    detail::take(s, "noise_variant", c.service.noise_variant);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::reject_unknown(s,
                           {"action_latency", "match_latency", "match_jitter", "drag_time", "settle",
                            "attempts_per_object", "identify_threshold", "match_threshold", "parked_margin",
                            "max_probe_sessions", "continuous_learning", "seed", "learn_frames", "sample_interval",
                            "object_frames", "min_component_size", "target_method"},
                           "solver");
    detail::take(s, "action_latency", c.solver.action_latency);
    detail::take(s, "match_latency", c.solver.match_latency);
    detail::take(s, "match_jitter", c.solver.match_jitter);
    detail::take(s, "drag_time", c.solver.drag_time);
    detail::take(s, "settle", c.solver.settle);
    detail::take(s, "attempts_per_object", c.solver.attempts_per_object);
    detail::take(s, "identify_threshold", c.solver.identify_threshold);
    detail::take(s, "match_threshold", c.solver.match_threshold);
    detail::take(s, "parked_margin", c.solver.parked_margin);
    detail::take(s, "max_probe_sessions", c.solver.max_probe_sessions);
    detail::take(s, "continuous_learning", c.solver.continuous_learning);
    detail::take(s, "seed", c.solver.seed);
    detail::take(s, "learn_frames", c.solver.vision.learn_frames);
    detail::take(s, "sample_interval", c.solver.vision.sample_interval);
    detail::take(s, "object_frames", c.solver.vision.object_frames);
    detail::take(s, "min_component_size", c.solver.vision.min_component_size);
    if (s.contains("target_method")) {
      const std::string m = s["target_method"].get<std::string>();
      if (m == "mbr")
        c.solver.target_method = TargetMethod::MBR;
      else if (m == "edge")
        c.solver.target_method = TargetMethod::Edge;
      else if (m == "exclusion")
        c.solver.target_method = TargetMethod::Exclusion;
      else
        throw std::invalid_argument("unknown target_method '" + m + "'");
    }
    c.solver.vision.validate();
  }
  return c;
}

inline LabConfig load_lab_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read config " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_lab_config(ss.str());
}

// --- Experiments ---------------------------------------------------------------

enum class Experiment : uint8_t { ProbeTrain, DictAttack, GuessBaseline, RelaySweep, VisionBench };

struct Endpoint {
  std::string host;
  int port = 0;
};

struct ExperimentSpec {
  Experiment experiment = Experiment::ProbeTrain;
  std::vector<GameType> games{kAllGames.begin(), kAllGames.end()};
  std::vector<Parameterization> params;  // empty: per-experiment default
  int runs = 0;                          // 0: per-experiment default
  uint64_t master_seed = 1;
  std::optional<std::filesystem::path> output;
  OutputFormat format = OutputFormat::CSV;
  std::optional<std::filesystem::path> dictionary;
  std::optional<Endpoint> endpoint;  // otherwise an embedded service per run

  ServiceConfig service;
  SolverParams solver;

  // GuessBaseline
  std::vector<int> guess_r{1, 2, 3};
  uint64_t guess_trials = 1'000'000;
  uint64_t guess_live_trials = 0;

  // RelaySweep: `runs` batches of `relay_trials` trials per cell
  uint64_t relay_trials = 1000;
  std::vector<double> reaction_means;  // empty: per-game defaults
  double reaction_sd = 0.2;            // spread used with explicit means
  bool relay_direct = true;

  int effective_runs() const {
    if (runs > 0) return runs;
    switch (experiment) {
      case Experiment::ProbeTrain: return 15;
      case Experiment::DictAttack: return 100;
      case Experiment::GuessBaseline: return 1;
      case Experiment::RelaySweep: return 10;
      case Experiment::VisionBench: return 17;
    }
    return 1;
  }

  std::vector<Parameterization> effective_params() const {
    if (!params.empty()) return params;
    switch (experiment) {
      case Experiment::ProbeTrain: return {{20, 5}};
      case Experiment::DictAttack: return {kCanonicalParams.begin(), kCanonicalParams.end()};
      case Experiment::VisionBench: return {{20, 4}, {20, 5}, {20, 6}};
      case Experiment::RelaySweep: return {{20, 4}};
      case Experiment::GuessBaseline: return {};
    }
    return {};
  }

  void validate() const {
    if (runs < 0) throw std::invalid_argument("runs must be >= 1");
    if (games.empty() && experiment != Experiment::GuessBaseline) throw std::invalid_argument("no games selected");
    for (const auto& p : effective_params()) {
      GameConfig c;
      c.fps = p.fps;
      c.object_count = p.objects;
      validate_config(c);
    }
    for (int r : guess_r)
      if (r < 1 || r > 9) throw std::invalid_argument("guess r must be in [1, 9]");
    if (guess_trials > kMaxGuessTrials || guess_live_trials > kMaxGuessTrials)
      throw std::invalid_argument("guess trials above the " + std::to_string(kMaxGuessTrials) + " limit");
    if (experiment == Experiment::RelaySweep && relay_trials < 1) throw std::invalid_argument("relay trials must be >= 1");
  }
};

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::ProbeTrain: return "probe-train";
    case Experiment::DictAttack: return "dict-attack";
    case Experiment::GuessBaseline: return "guess-baseline";
    case Experiment::RelaySweep: return "relay-sweep";
    case Experiment::VisionBench: return "vision-bench";
  }
  return "?";
}

/// Folds a new probe result into the dictionary without duplicating answers
/// the dictionary already knows; new centroids snap to nearby known ones.
inline void merge_knowledge(Dictionary& db, const KnowledgeRecord& rec, double threshold = kMatchThreshold) {
  auto existing = db.identify(rec.background);
  if (!existing) {
    db.upsert(rec);
    return;
  }
  KnowledgeRecord merged = *existing;
  const double snap = std::max(merged.target.region.width(), merged.target.region.height()) / 6.0;
  for (const auto& b : rec.bindings) {
    bool known = false;
    for (const auto& k : merged.bindings) known |= histogram_distance(b.histogram, k.histogram) <= threshold;
    if (known) continue;
    Binding nb = b;
    for (const Point& c : merged.target_centroids())
      if (std::hypot(c.x - b.centroid.x, c.y - b.centroid.y) <= snap) {
        nb.centroid = c;
        break;
      }
    merged.bindings.push_back(nb);
  }
  for (const auto& n : rec.noise) {
    bool known = false;
    for (const auto& k : merged.noise) known |= histogram_distance(n.histogram, k.histogram) <= threshold;
    if (!known) merged.noise.push_back(n);
  }
  db.upsert(merged);
}

namespace detail {

/// A fresh embedded service per run, or the remote endpoint.
class RunSource {
 public:
  RunSource(const ExperimentSpec& spec, uint64_t run_seed) {
    if (spec.endpoint) {
      transport_ = std::make_unique<HttpTransport>(spec.endpoint->host, spec.endpoint->port);
      remote_ = WireChallengeSource::realtime(*transport_);
    } else {
      ServiceConfig cfg = spec.service;
      cfg.master_seed = run_seed;
      cfg.expose_ground_truth = true;  // for the metric columns only; never sent on the wire
      embedded_ = std::make_unique<EmbeddedService>(cfg);
    }
  }
  ChallengeSource& source() { return embedded_ ? static_cast<ChallengeSource&>(embedded_->source()) : *remote_; }

  std::optional<GroundTruth> truth() {
    if (!embedded_) return std::nullopt;
    return embedded_->service().ground_truth(embedded_->source().session_id());
  }

 private:
  std::unique_ptr<EmbeddedService> embedded_;
  std::unique_ptr<HttpTransport> transport_;
  std::unique_ptr<WireChallengeSource> remote_;
};

inline uint64_t cell_seed(uint64_t master, Experiment e, GameType g, const Parameterization& p, int run) {
  uint64_t s = derive_seed(master, static_cast<uint64_t>(e) + 1);
  s = derive_seed(s, static_cast<uint64_t>(g) + 1);
  s = derive_seed(s, static_cast<uint64_t>(p.fps) * 16 + static_cast<uint64_t>(p.objects));
  return derive_seed(s, static_cast<uint64_t>(run));
}

inline MetricRow base_row(const std::string& experiment, const std::string& game, const Parameterization& p, int run,
                          uint64_t seed) {
  MetricRow r;
  r.set("kind", "run").set("experiment", experiment).set("game", game).set("fps", p.fps).set("objects", p.objects);
  r.set("run", run).set("seed", format_seed(seed));
  r.set("reference", reference_annotation(experiment, game, p.fps, p.objects));
  return r;
}

}  // namespace detail

struct ExperimentResult {
  MetricsTable table;
  Dictionary dictionary;
};

inline void run_probe_train(const ExperimentSpec& spec, ExperimentResult& out, std::ostream* log) {
  for (GameType g : spec.games)
    for (const auto& p : spec.effective_params())
      for (int run = 0; run < spec.effective_runs(); ++run) {
        const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, run);
        detail::RunSource src(spec, seed);
        SolverParams sp = spec.solver;
        sp.seed = seed;
        auto rep = probe_game(src.source(), g, p.fps, p.objects, sp);
        MetricRow r = detail::base_row("probe-train", std::string(to_string(g)), p, run, seed);
        if (rep) {
          merge_knowledge(out.dictionary, rep->record);
          r.set("success", rep->completed ? 1 : 0).set("drags", rep->drags);
          r.set("drags_per_object", static_cast<double>(rep->drags) / p.objects);
          r.set("answers", static_cast<int>(rep->record.target_centroids().size()));
          r.set("crosses", rep->drags - static_cast<int>(rep->record.bindings.size()));
          r.set("time_s", rep->sim_time);
          if (rep->completed) r.set("successful_time_s", rep->sim_time);
        } else {
          r.set("success", 0);
          if (log) *log << "probe " << to_string(g) << " run " << run << ": " << to_string(rep.error()) << "\n";
        }
        out.table.rows.push_back(std::move(r));
      }
}

inline void run_dict_attack(const ExperimentSpec& spec, ExperimentResult& out) {
  for (GameType g : spec.games)
    for (const auto& p : spec.effective_params())
      for (int run = 0; run < spec.effective_runs(); ++run) {
        const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, run);
        detail::RunSource src(spec, seed);
        SolverParams sp = spec.solver;
        sp.seed = seed;
        const auto a = attack(src.source(), out.dictionary, g, p.fps, p.objects, sp);
        MetricRow r = detail::base_row("dict-attack", std::string(to_string(g)), p, run, seed);
        const bool ok = a.outcome == AttackOutcome::Success;
        r.set("success", ok ? 1 : 0).set("drags", a.drags_total);
        r.set("drags_per_object", static_cast<double>(a.drags_total) / p.objects);
        r.set("crosses", a.drags_total - a.drags_correct);
        r.set("time_s", a.sim_time);
        if (ok) r.set("successful_time_s", a.sim_time);
        if (a.drags_total > 0) r.set("error_per_click", static_cast<double>(a.drags_total - a.drags_correct) / a.drags_total);
        if (auto gt = src.truth()) {
          int n = 0;
          for (const auto& o : gt->objects) n += o.is_answer;
          r.set("answers", n);
        }
        out.table.rows.push_back(std::move(r));
      }
}

inline void run_guess_baseline(const ExperimentSpec& spec, ExperimentResult& out) {
  for (int rr : spec.guess_r) {
    const GuessModel m{rr};
    const Rational exact = analytic_guess_probability(m);
    MetricRow a;
    a.set("kind", "analytic").set("experiment", "guess-baseline").set("game", "grid").set("answers", rr);
    a.set("rate", exact.value()).set("reference", reference_annotation("guess-baseline", "grid", 0, 0) + "; exact " + exact.str());
    out.table.rows.push_back(std::move(a));
    if (spec.guess_trials > 0)
      for (int run = 0; run < spec.effective_runs(); ++run) {
        const uint64_t seed = derive_seed(derive_seed(spec.master_seed, 0x6e55), static_cast<uint64_t>(rr * 1000 + run));
        GridOracle oracle(m, seed);
        const auto est = oracle.run(spec.guess_trials);
        MetricRow r;
        r.set("kind", "run").set("experiment", "guess-baseline").set("game", "grid").set("run", run);
        r.set("seed", format_seed(seed)).set("trials", est.trials).set("answers", rr);
        r.set("success", est.successes).set("rate", est.rate).set("ci_low", est.ci_low).set("ci_high", est.ci_high);
        r.set("reference", reference_annotation("guess-baseline", "grid", 0, 0));
        out.table.rows.push_back(std::move(r));
      }
  }
  if (spec.guess_live_trials == 0) return;
  for (GameType g : spec.games)
    for (int rr : spec.guess_r) {
      if (rr > 1) continue;  // a live game with more answers would need layout-specific grids
      const Parameterization p{20, 4};
      const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, rr);
      ServiceConfig cfg = spec.service;
      cfg.master_seed = seed;
      cfg.drag_cap = 1 << 30;
      EmbeddedService es(cfg);
      const auto est = random_guess_attack(es.source(), g, p.fps, p.objects, GuessModel{rr}, spec.guess_live_trials, seed);
      MetricRow r = detail::base_row("guess-live", std::string(to_string(g)), p, 0, seed);
      r.set("trials", est.trials).set("answers", rr).set("success", est.successes);
      r.set("rate", est.rate).set("ci_low", est.ci_low).set("ci_high", est.ci_high);
      out.table.rows.push_back(std::move(r));
    }
}

inline void run_relay_sweep(const ExperimentSpec& spec, ExperimentResult& out) {
  auto emit = [&](const std::string& name, GameType g, const Parameterization& p, int run, uint64_t seed,
                  const RelayStats& st, std::optional<double> reaction) {
    MetricRow r = detail::base_row(name, std::string(to_string(g)), p, run, seed);
    r.set("trials", st.trials).set("success", st.completion_rate).set("drags", st.clicks);
    r.set("crosses", st.wrong_object).set("time_s", st.overall_time);
    if (st.completed) r.set("successful_time_s", st.successful_time);
    r.set("rate", st.per_click_success()).set("error_per_click", st.error_rate_per_click);
    if (reaction) r.set("reaction_s", *reaction);
    out.table.rows.push_back(std::move(r));
  };
  for (GameType g : spec.games)
    for (const auto& p : spec.effective_params()) {
      GameConfig cfg;
      cfg.game_type = g;
      cfg.fps = p.fps;
      cfg.object_count = p.objects;
      cfg.drag_cap = spec.service.drag_cap;
      cfg.timeout = spec.service.timeout;
      std::vector<RelayModel> models;
      if (spec.reaction_means.empty()) {
        models.push_back(default_relay_model(g));
      } else {
        for (double mu : spec.reaction_means) {
          RelayModel m;
          m.reaction = mu <= 0 ? Delay::fixed(0) : Delay{mu, spec.reaction_sd};
          models.push_back(m);
        }
      }
      for (const auto& m : models)
        for (int run = 0; run < spec.effective_runs(); ++run) {
          const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, run);
          emit("relay-sweep", g, p, run, seed, simulate_static_relay(cfg, m, spec.relay_trials, seed), m.reaction.mean);
        }
      if (spec.relay_direct)
        for (int run = 0; run < spec.effective_runs(); ++run) {
          const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, run);
          emit("direct-play", g, p, run, seed, scripted_direct_play(cfg, spec.relay_trials, seed), std::nullopt);
        }
    }
}

inline void run_vision_bench(const ExperimentSpec& spec, ExperimentResult& out) {
  for (GameType g : spec.games)
    for (const auto& p : spec.effective_params())
      for (int run = 0; run < spec.effective_runs(); ++run) {
        const uint64_t seed = detail::cell_seed(spec.master_seed, spec.experiment, g, p, run);
        ServiceConfig cfg = spec.service;
        cfg.master_seed = seed;
        cfg.expose_ground_truth = true;
        EmbeddedService es(cfg);
        MetricRow r = detail::base_row("vision-bench", std::string(to_string(g)), p, run, seed);
        const double t0 = es.source().now();
        if (!es.source().start(g, p.fps, p.objects)) continue;
        auto learned = learn_scene(es.source(), spec.solver);
        auto truth = es.service().ground_truth(es.source().session_id());
        if (!learned || !truth) continue;
        r.set("rate", pixel_error_rate(learned->background, truth->background));
        r.set("time_s", es.source().now() - t0);
        auto target = detect_target(*learned, spec.solver);
        r.set("success", target && truth->target.region.contains(target->center) ? 1 : 0);
        out.table.rows.push_back(std::move(r));
      }
}

/// Runs one experiment headless. DictAttack uses `dict` if given, else the
/// spec's dictionary file, else trains one first with ProbeTrain defaults.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const Dictionary* dict = nullptr,
                                       std::ostream* log = nullptr) {
  spec.validate();
  ExperimentResult out;
  switch (spec.experiment) {
    case Experiment::ProbeTrain:
      run_probe_train(spec, out, log);
      if (spec.dictionary) out.dictionary.save(*spec.dictionary);
      break;
    case Experiment::DictAttack:
      if (dict) {
        out.dictionary = *dict;
      } else if (spec.dictionary && std::filesystem::exists(*spec.dictionary)) {
        out.dictionary = Dictionary::load(*spec.dictionary);
      } else {
        ExperimentSpec train = spec;
        train.experiment = Experiment::ProbeTrain;
        train.params.clear();
        train.runs = 0;
        train.dictionary.reset();
        out.dictionary = run_experiment(train, nullptr, log).dictionary;
      }
      run_dict_attack(spec, out);
      break;
    case Experiment::GuessBaseline: run_guess_baseline(spec, out); break;
    case Experiment::RelaySweep: run_relay_sweep(spec, out); break;
    case Experiment::VisionBench: run_vision_bench(spec, out); break;
  }
  add_summaries(out.table);
  if (spec.output) write_text(*spec.output, serialize(out.table, spec.format));
  return out;
}

}  // namespace dcg
