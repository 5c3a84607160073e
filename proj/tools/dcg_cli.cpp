#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "dcg/harness.hpp"

using namespace dcg;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> games;
  std::vector<std::string> params;
  int runs = 0;
  uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  std::string endpoint;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c, bool games = true) {
  sub->add_option("-c,--config", c.config, "JSON config file (service and solver sections)")->check(CLI::ExistingFile);
  if (games) {
    sub->add_option("-g,--game", c.games, "games: ships shapes animals parking (default all)")
        ->check(CLI::IsMember({"ships", "shapes", "animals", "parking"}));
    sub->add_option("-p,--param", c.params, "FPSxOBJECTS, e.g. 20x5 (repeatable)");
  }
  sub->add_option("-n,--runs", c.runs, "runs per cell (default depends on the experiment)")->check(CLI::NonNegativeNumber);
  sub->add_option("-s,--seed", c.seed, "master seed");
  sub->add_option("-o,--out", c.out, "metrics output file");
  sub->add_option("-f,--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_flag("-q,--quiet", c.quiet, "do not print the summary table");
}

Parameterization parse_param(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("parameterization must look like 20x5: " + s);
  return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("endpoint must be host:port: " + s);
  return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
}

ExperimentSpec make_spec(Experiment e, const Common& c) {
  ExperimentSpec spec;
  spec.experiment = e;
  if (!c.config.empty()) {
    const LabConfig lab = load_lab_config(c.config);
    spec.service = lab.service;
    spec.solver = lab.solver;
  }
  if (!c.games.empty()) {
    spec.games.clear();
    for (const auto& g : c.games) spec.games.push_back(*parse_game_type(g));
  }
  for (const auto& p : c.params) spec.params.push_back(parse_param(p));
  spec.runs = c.runs;
  spec.master_seed = c.seed;
  if (!c.out.empty()) spec.output = c.out;
  spec.format = c.format == "json" ? OutputFormat::JSON : OutputFormat::CSV;
  if (!c.endpoint.empty()) spec.endpoint = parse_endpoint(c.endpoint);
  return spec;
}

int finish(const ExperimentResult& r, const Common& c) {
  if (!c.quiet) std::cout << render_comparison(r.table);
  return 0;
}

HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic cognitive game captcha lab: engine, solver, relay simulator and challenge service"};
  app.require_subcommand(1);

  Common probe_c, attack_c, guess_c, relay_c, vision_c;
  std::string probe_dict = "dictionary.dcgd", attack_dict;

  auto* probe = app.add_subcommand("probe-train", "learn games from scratch by probing and write a dictionary");
  add_common(probe, probe_c);
  probe->add_option("-d,--dict", probe_dict, "dictionary file to write");
  probe->add_option("-e,--endpoint", probe_c.endpoint, "host:port of a running service (default: embedded)");

  auto* atk = app.add_subcommand("attack", "attack fresh challenges with a dictionary");
  add_common(atk, attack_c);
  atk->add_option("-d,--dict", attack_dict, "dictionary file (trained in-process when absent)");
  atk->add_option("-e,--endpoint", attack_c.endpoint, "host:port of a running service (default: embedded)");

  std::vector<int> guess_r{1, 2, 3};
  uint64_t guess_trials = 1'000'000, guess_live = 0;
  auto* guess = app.add_subcommand("guess", "random-guess baseline: analytic odds and Monte-Carlo estimates");
  add_common(guess, guess_c);
  guess->add_option("-r,--answers", guess_r, "answer counts r")->check(CLI::Range(1, 9));
  guess->add_option("-t,--trials", guess_trials, "grid trials per run (limit 1e8)");
  guess->add_option("--live-trials", guess_live, "also guess against live one-answer challenges");

  uint64_t relay_trials = 1000;
  std::vector<double> reaction_means;
  double reaction_sd = 0.2;
  bool no_direct = false;
  auto* relay = app.add_subcommand("relay", "static relay Monte-Carlo sweep against scripted direct play");
  add_common(relay, relay_c);
  relay->add_option("-t,--trials", relay_trials, "trials per run")->check(CLI::PositiveNumber);
  relay->add_option("-m,--reaction", reaction_means, "reaction-time means in seconds (default per game)");
  relay->add_option("--reaction-sd", reaction_sd, "spread used with --reaction");
  relay->add_flag("--no-direct", no_direct, "skip the direct-play rows");

  auto* vision = app.add_subcommand("vision-bench", "background learning error and target detection against ground truth");
  add_common(vision, vision_c);

  std::vector<std::string> report_files;
  std::string report_out, report_format = "csv";
  auto* rep = app.add_subcommand("report", "merge metric files into one comparison table");
  rep->add_option("files", report_files, "metric files (CSV or JSON)")->check(CLI::ExistingFile);
  rep->add_option("-o,--out", report_out, "merged metrics output file");
  rep->add_option("-f,--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::string serve_config, serve_host, static_root;
  int serve_port = -1;
  auto* serve = app.add_subcommand("serve", "run the challenge service over HTTP");
  serve->add_option("-c,--config", serve_config, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--host", serve_host, "bind address (default from config, else 127.0.0.1)");
  serve->add_option("--port", serve_port, "port (default from config, else 8080)");
  serve->add_option("--static", static_root, "directory served at / (frontend build)")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*probe) {
      auto spec = make_spec(Experiment::ProbeTrain, probe_c);
      spec.dictionary = probe_dict;
      const auto r = run_experiment(spec, nullptr, &std::cerr);
      std::cerr << "dictionary: " << probe_dict << " (" << r.dictionary.size() << " games)\n";
      return finish(r, probe_c);
    }
    if (*atk) {
      auto spec = make_spec(Experiment::DictAttack, attack_c);
      if (!attack_dict.empty()) {
        if (!std::filesystem::exists(attack_dict)) throw std::runtime_error("no dictionary at " + attack_dict);
        spec.dictionary = attack_dict;
      }
      return finish(run_experiment(spec, nullptr, &std::cerr), attack_c);
    }
    if (*guess) {
      auto spec = make_spec(Experiment::GuessBaseline, guess_c);
      spec.guess_r = guess_r;
      spec.guess_trials = guess_trials;
      spec.guess_live_trials = guess_live;
      return finish(run_experiment(spec), guess_c);
    }
    if (*relay) {
      auto spec = make_spec(Experiment::RelaySweep, relay_c);
      spec.relay_trials = relay_trials;
      spec.reaction_means = reaction_means;
      spec.reaction_sd = reaction_sd;
      spec.relay_direct = !no_direct;
      return finish(run_experiment(spec), relay_c);
    }
    if (*vision) return finish(run_experiment(make_spec(Experiment::VisionBench, vision_c)), vision_c);
    if (*rep) {
      std::vector<MetricsTable> inputs;
      for (const auto& f : report_files) inputs.push_back(load_metrics(f));
      const auto merged = report(inputs);
      if (!report_out.empty())
        write_text(report_out, serialize(merged, report_format == "json" ? OutputFormat::JSON : OutputFormat::CSV));
      std::cout << render_comparison(merged);
      return 0;
    }
    if (*serve) {
      LabConfig lab = serve_config.empty() ? LabConfig{} : load_lab_config(serve_config);
      if (!serve_host.empty()) lab.host = serve_host;
      if (serve_port >= 0) lab.port = serve_port;
      if (!static_root.empty()) lab.static_root = static_root;
      ChallengeService service(lab.service, std::make_shared<SteadyClock>());
      HttpServer server(service, lab.static_root);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "serving DCGW1 on http://" << lab.host << ":" << lab.port << "/dcgw1\n";
      if (!server.listen(lab.host, lab.port)) {
        std::cerr << "cannot listen on " << lab.host << ":" << lab.port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema mismatch: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
