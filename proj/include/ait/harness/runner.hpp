#pragma once

#include "ait/harness/operator.hpp"
#include "ait/harness/simulation.hpp"

#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace ait::harness {

/// Runs one trial to completion and streams the JSONL log to `out`: a header,
/// one record per tick, and a terminal record. Returns the terminal record.
inline json run_scenario(const Scenario& s, const OperatorConfig& op, std::uint64_t seed, std::ostream& out,
                         std::shared_ptr<const perception::TemplateSet> templates = nullptr) {
  Simulation sim(s, seed, std::move(templates));
  Operator oper(op, seed, s.dt());
  out << sim.header(operator_to_json(op)).dump() << '\n';
  while (!sim.finished()) out << sim.step(oper.tick(sim.operator_view(op.goal_id))).dump() << '\n';
  const json term = sim.terminal();
  out << term.dump() << '\n';
  return term;
}

/// Same as run_scenario without keeping the log.
inline json run_trial(const Scenario& s, const OperatorConfig& op, std::uint64_t seed,
                      std::shared_ptr<const perception::TemplateSet> templates = nullptr) {
  Simulation sim(s, seed, std::move(templates));
  Operator oper(op, seed, s.dt());
  while (!sim.finished()) sim.step(oper.tick(sim.operator_view(op.goal_id)));
  return sim.terminal();
}

struct ScenarioLog {
  json header;
  std::vector<json> ticks;
  json terminal;
};

/// Parses and checks a JSONL log: header first, ticks with increasing t,
/// exactly one terminal record at the end.
inline ScenarioLog read_log(std::istream& in) {
  ScenarioLog log;
  std::string line;
  std::size_t n = 0;
  bool have_terminal = false;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(n);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where, e.what());
    }
    if (!rec.is_object() || !rec.contains("type") || !rec["type"].is_string()) throw ParseError(where, "record without a type");
    const std::string type = rec["type"];
    if (have_terminal) throw ParseError(where, "record after the terminal record");
    if (type == "header") {
      if (!log.header.is_null() || !log.ticks.empty()) throw ParseError(where, "header must be the first record");
      log.header = std::move(rec);
    } else if (type == "tick") {
      if (log.header.is_null()) throw ParseError(where, "tick before header");
      const double t = JsonCursor(rec, where).number("t");
      if (!(t > last_t)) throw ParseError(where, "tick times must increase");
      last_t = t;
      log.ticks.push_back(std::move(rec));
    } else if (type == "terminal") {
      log.terminal = std::move(rec);
      have_terminal = true;
    } else {
      throw ParseError(where, "unknown record type '" + type + "'");
    }
  }
  if (log.header.is_null()) throw ParseError("log", "missing header");
  if (!have_terminal) throw ParseError("log", "missing terminal record");
  return log;
}

/// Raw operator commands recorded in a log, in tick order.
inline std::vector<UserCommand> commands_from_log(const ScenarioLog& log) {
  std::vector<UserCommand> out;
  out.reserve(log.ticks.size());
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    const JsonCursor c(log.ticks[i], "ticks[" + std::to_string(i) + "]");
    const auto cmd = c.at("cmd");
    UserCommand u;
    u.v_u.linear = cmd.at("v").vec3();
    u.grasp_velocity = cmd.number("grasp");
    out.push_back(u);
  }
  return out;
}

/// Scenario, mode and seed recorded in a log header.
struct LoggedRun {
  Scenario scenario;
  std::uint64_t seed = 0;
};

inline LoggedRun run_from_header(const json& header) {
  const JsonCursor c(header, "header");
  const auto version = c.at("schema_version").integer();
  if (version != kLogSchemaVersion) throw ParseError("header.schema_version", "unsupported version " + std::to_string(version));
  const ModelLibrary lib = library_from_json(c.at("library").value());
  LoggedRun r{scenario_from_json(c.at("scenario").value(), ".", &lib), 0};
  r.scenario.mode = parse_mode(c.string("mode"));
  r.seed = c.at("seed").value().get<std::uint64_t>();
  return r;
}

inline OperatorConfig replay_operator(const ScenarioLog& log, const std::string& source = {}) {
  OperatorConfig op;
  op.id = "replay";
  op.kind = OperatorKind::scripted_replay;
  op.replay_log = source;
  op.replay = commands_from_log(log);
  return op;
}

/// Re-applies mid-run changes recorded on a tick (mode switch, new config).
inline void apply_changes(Simulation& sim, const json& changes) {
  const JsonCursor c(changes, "changes");
  if (c.has("mode")) sim.set_mode(parse_mode(c.string("mode")));
  if (c.has("config")) sim.apply_tuning(scenario_from_json(c.at("config").value(), ".", &sim.scenario().library));
}

struct ReplayReport {
  bool identical = false;
  std::size_t ticks_compared = 0;
  std::string mismatch;  // first difference, empty when identical
};

/// Re-runs the logged scenario with the logged command stream and compares every
/// tick record and the terminal record byte for byte.
inline ReplayReport replay(const ScenarioLog& log) {
  const LoggedRun run = run_from_header(log.header);
  const OperatorConfig op = replay_operator(log);
  Simulation sim(run.scenario, run.seed);
  Operator oper(op, run.seed, run.scenario.dt());
  ReplayReport rep;
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    if (sim.finished()) {
      rep.mismatch = "replay finished early at tick " + std::to_string(i);
      return rep;
    }
    if (const auto it = log.ticks[i].find("changes"); it != log.ticks[i].end()) apply_changes(sim, *it);
    const std::string got = sim.step(oper.tick(sim.operator_view())).dump();
    const std::string want = log.ticks[i].dump();
    ++rep.ticks_compared;
    if (got != want) {
      rep.mismatch = "tick " + std::to_string(i) + " differs";
      return rep;
    }
  }
  if (log.terminal.value("reason", "") != "interrupted") {
    if (!sim.finished()) {
      rep.mismatch = "replay did not finish where the log did";
      return rep;
    }
    if (sim.terminal().dump() != log.terminal.dump()) {
      rep.mismatch = "terminal record differs";
      return rep;
    }
  }
  rep.identical = true;
  return rep;
}

}  // namespace ait::harness
