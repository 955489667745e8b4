#include "ait/harness/suite.hpp"
#include "ait/service/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>

namespace {

using namespace ait;
using namespace ait::harness;

int cmd_run(const std::string& scenario_path, const std::string& mode, const std::string& operator_path, std::uint64_t seed,
            const std::string& out_path) {
  Scenario s = load_scenario(scenario_path);
  if (!mode.empty()) s.mode = parse_mode(mode);
  const OperatorConfig op = operator_from_json(read_json_file(operator_path));
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  const json term = run_scenario(s, op, seed, out);
  std::cout << term.dump() << '\n';
  return 0;
}

int cmd_suite(const std::string& config_path, const std::string& out_path, const std::string& json_path, int threads) {
  SuiteConfig cfg = load_suite(config_path);
  if (threads > 0) cfg.threads = threads;
  const SuiteResult r = evaluate_suite(cfg);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  write_csv(r.rows, out);
  if (!json_path.empty()) {
    std::ofstream js(json_path);
    if (!js) throw std::runtime_error("cannot write " + json_path);
    js << to_json(r).dump(2) << '\n';
  }
  write_csv(r.rows, std::cout);
  return 0;
}

int cmd_replay(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot read " + log_path);
  const ScenarioLog log = read_log(in);
  const ReplayReport rep = replay(log);
  if (rep.identical) {
    std::cout << "identical: " << rep.ticks_compared << " ticks\n";
    return 0;
  }
  std::cout << "mismatch: " << rep.mismatch << " (" << rep.ticks_compared << " ticks compared)\n";
  return 1;
}

int cmd_calibrate(const std::string& scenario_path, const std::string& operator_path, const std::vector<double>& sigmas,
                  std::uint64_t seed, int count, double max_success, int threads) {
  const Scenario s = load_scenario(scenario_path);
  const OperatorConfig op = operator_from_json(read_json_file(operator_path));
  const Calibration cal = calibrate_noise(s, op, sigmas, seed, count, max_success, threads);
  for (const auto& p : cal.points) std::cout << "sigma " << p.sigma << " dc_success " << p.dc_success_rate << '\n';
  if (!cal.sigma) {
    std::cout << "no sigma in the grid meets the target\n";
    return 1;
  }
  std::cout << "calibrated sigma " << *cal.sigma << '\n';
  return 0;
}

int cmd_serve(unsigned short port, const std::string& scenario_path, const std::string& mode, std::uint64_t seed,
              const std::string& record_dir) {
  Scenario s = load_scenario(scenario_path);
  if (!mode.empty()) s.mode = parse_mode(mode);
  // signals are taken by a dedicated thread so shutdown can join cleanly
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::DirectoryRecorder recorder(record_dir);
  service::LiveSession session(s, seed, &recorder);
  service::Server server(session, port);
  std::cerr << "serving " << s.id << " (" << to_string(s.mode) << ") on ws://0.0.0.0:" << server.port() << ", recording to "
            << record_dir << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-control teleoperation simulator"};
  app.require_subcommand(1);

  std::string scenario, mode, op, out = "log.jsonl";
  std::uint64_t seed = 1;
  auto* run = app.add_subcommand("run", "Run one scenario with a scripted operator and write a JSONL log");
  run->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "ait or dc (default: from the scenario)")->check(CLI::IsMember({"ait", "dc"}));
  run->add_option("--operator", op, "Operator file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Seed");
  run->add_option("--out", out, "Log output path");

  std::string config, csv = "results.csv", json_out;
  int threads = 0;
  auto* suite = app.add_subcommand("suite", "Evaluate scenarios x operators x modes x seeds");
  suite->add_option("--config", config, "Suite file")->required()->check(CLI::ExistingFile);
  suite->add_option("--out", csv, "CSV output path");
  suite->add_option("--json", json_out, "Also write per-trial results as JSON");
  suite->add_option("--threads", threads, "Parallel trials (default: from the suite file)");

  unsigned short port = 8765;
  std::string record_dir = "sessions";
  auto* serve = app.add_subcommand("serve", "Live WebSocket teleoperation service");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  serve->add_option("--mode", mode, "ait or dc (default: from the scenario)")->check(CLI::IsMember({"ait", "dc"}));
  serve->add_option("--seed", seed, "Seed");
  serve->add_option("--record", record_dir, "Directory for recorded session logs");

  std::string log;
  auto* rep = app.add_subcommand("replay", "Re-run a log from its recorded commands and compare every record");
  rep->add_option("--log", log, "JSONL log")->required()->check(CLI::ExistingFile);

  std::vector<double> sigmas{0.10, 0.12, 0.14, 0.15, 0.16, 0.18, 0.20, 0.25, 0.30};
  int count = 20;
  double max_success = 0.2;
  auto* cal = app.add_subcommand("calibrate", "Smallest operator noise at which DC success falls below a target");
  cal->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  cal->add_option("--operator", op, "Operator file")->required()->check(CLI::ExistingFile);
  cal->add_option("--sigmas", sigmas, "Candidate noise levels, m/s")->delimiter(',');
  cal->add_option("--seed", seed, "First seed");
  cal->add_option("--count", count, "Seeds per level");
  cal->add_option("--max-success", max_success, "DC success rate to get below");
  cal->add_option("--threads", threads, "Parallel trials");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, mode, op, seed, out);
    if (*suite) return cmd_suite(config, csv, json_out, threads);
    if (*serve) return cmd_serve(port, scenario, mode, seed, record_dir);
    if (*rep) return cmd_replay(log);
    if (*cal) return cmd_calibrate(scenario, op, sigmas, seed, count, max_success, std::max(threads, 1));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
