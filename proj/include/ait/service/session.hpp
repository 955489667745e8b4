#pragma once

#include "ait/harness/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ait::service {

using harness::Mode;
using harness::Scenario;
using harness::Simulation;

using ClientId = std::uint64_t;

/// Text frame to send. No recipient means every connected client.
struct Outgoing {
  std::optional<ClientId> to;
  std::string text;
};

/// Receives the recorded log of each episode: header, ticks, terminal.
class Recorder {
 public:
  virtual ~Recorder() = default;
  virtual void begin(const json& header) = 0;
  virtual void record(const json& tick) = 0;
  virtual void end(const json& terminal) = 0;
};

/// Writes episode_NNN.jsonl files into a directory.
class DirectoryRecorder : public Recorder {
 public:
  explicit DirectoryRecorder(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void begin(const json& header) override {
    std::ostringstream name;
    name << "episode_" << std::setw(3) << std::setfill('0') << episode_++ << ".jsonl";
    current_ = dir_ / name.str();
    out_.open(current_, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + current_.string());
    out_ << header.dump() << '\n';
  }
  void record(const json& tick) override { out_ << tick.dump() << '\n'; }
  void end(const json& terminal) override {
    out_ << terminal.dump() << '\n';
    out_.close();
  }
  const std::filesystem::path& current() const { return current_; }

 private:
  std::filesystem::path dir_;
  std::filesystem::path current_;
  std::ofstream out_;
  int episode_ = 0;
};

/// Keeps episodes in memory, mainly for tests.
class MemoryRecorder : public Recorder {
 public:
  void begin(const json& header) override { episodes.emplace_back().append(header.dump() + '\n'); }
  void record(const json& tick) override { episodes.back().append(tick.dump() + '\n'); }
  void end(const json& terminal) override { episodes.back().append(terminal.dump() + '\n'); }
  std::vector<std::string> episodes;
};

struct SessionConfig {
  double command_timeout = 0.5;  // s of simulated time before a silent driver's command is zeroed
};

/// Message handling and the control loop body of the live service, free of
/// networking. The first connected client drives; later clients observe.
/// Commands take effect at the next tick, last writer wins.
class LiveSession {
 public:
  LiveSession(const Scenario& s, std::uint64_t seed, Recorder* recorder = nullptr, SessionConfig cfg = {})
      : sim_(s, seed), recorder_(recorder), cfg_(cfg) {
    begin_episode();
  }

  ~LiveSession() {
    try {
      end_episode();
    } catch (...) {
    }
  }

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const Simulation& simulation() const { return sim_; }
  std::optional<ClientId> driver() const { return driver_; }
  const UserCommand& held_command() const { return command_; }

  /// Registers a client and returns its welcome message.
  Outgoing connect(ClientId id) {
    clients_.push_back(id);
    if (!driver_) driver_ = id;
    return {id, json{{"type", "hello"}, {"role", driver_ == id ? "driver" : "observer"}, {"t", sim_.time()},
                     {"mode", harness::to_string(sim_.mode())}}
                    .dump()};
  }

  /// A departing driver leaves the arm holding still; the earliest remaining
  /// client takes over.
  std::vector<Outgoing> disconnect(ClientId id) {
    std::erase(clients_, id);
    std::vector<Outgoing> out;
    if (driver_ != id) return out;
    driver_.reset();
    command_ = UserCommand{};
    have_pending_ = false;
    last_seq_.reset();
    if (!clients_.empty()) {
      driver_ = clients_.front();
      out.push_back({*driver_, json{{"type", "role"}, {"role", "driver"}}.dump()});
    }
    return out;
  }

  /// Handles one text frame. Replies (acks, errors) are returned; commands are
  /// held until the next tick.
  std::vector<Outgoing> receive(ClientId id, const std::string& text) {
    try {
      const json msg = json::parse(text);
      if (auto reply = handle(id, msg)) return {std::move(*reply)};
      return {};
    } catch (const json::parse_error&) {
      return {error(id, "malformed JSON")};
    } catch (const ParseError& e) {
      return {error(id, e.what())};
    } catch (const ValidationError& e) {
      return {error(id, e.what())};
    } catch (const json::exception& e) {
      return {error(id, e.what())};
    }
  }

  /// Advances one control period and returns the state and event broadcasts.
  /// A finished episode stops advancing until reset.
  std::vector<Outgoing> tick() {
    std::vector<Outgoing> out;
    if (sim_.finished()) return out;
    if (have_pending_) {
      command_ = pending_;
      have_pending_ = false;
      last_command_time_ = sim_.time();
    } else if (sim_.time() - last_command_time_ > cfg_.command_timeout) {
      command_ = UserCommand{};
    }
    const json rec = sim_.step(command_);
    if (recorder_) recorder_->record(rec);
    json state = rec;
    state["type"] = "state";
    if (last_seq_) state["seq"] = *last_seq_;
    out.push_back({std::nullopt, state.dump()});
    for (const auto& ev : rec.at("events")) {
      json msg{{"type", "event"}, {"name", ev.at("name")}, {"t", rec.at("t")}};
      if (ev.contains("detail")) msg["detail"] = ev["detail"];
      out.push_back({std::nullopt, msg.dump()});
    }
    if (sim_.finished()) {
      const json term = sim_.terminal();
      end_episode();
      json msg = term;
      msg["type"] = "terminal";
      out.push_back({std::nullopt, msg.dump()});
    }
    return out;
  }

  /// Restarts the scene, closing the current recording.
  void reset() {
    end_episode();
    sim_.reset();
    command_ = UserCommand{};
    have_pending_ = false;
    last_command_time_ = 0.0;
    begin_episode();
  }

 private:
  static Outgoing error(ClientId id, const std::string& reason) {
    return {id, json{{"type", "error"}, {"reason", reason}}.dump()};
  }
  static Outgoing ack(ClientId id, const std::string& request) {
    return {id, json{{"type", "ack"}, {"request", request}}.dump()};
  }

  std::optional<Outgoing> handle(ClientId id, const json& msg) {
    const JsonCursor c(msg, "");
    c.require_object();
    const std::string type = c.string("type");
    if (type != "command" && type != "reset" && type != "set_mode" && type != "set_config")
      return error(id, "unknown message type '" + type + "'");
    if (driver_ != id) return error(id, "read-only client");
    if (type == "command") {
      UserCommand cmd;
      const Vec3 v = c.at("v").vec3();
      if (!v.allFinite()) return error(id, "v must be finite");
      cmd.v_u.linear = v;
      cmd.grasp_velocity = c.number("grasp", 0.0);
      if (!std::isfinite(cmd.grasp_velocity)) return error(id, "grasp must be finite");
      if (c.has("seq")) {
        const auto seq = c.at("seq").integer();
        if (last_seq_ && seq <= *last_seq_) return std::nullopt;  // out of order, superseded
        last_seq_ = seq;
      }
      pending_ = cmd;
      have_pending_ = true;
      return std::nullopt;
    }
    if (type == "reset") {
      reset();
      return ack(id, type);
    }
    if (type == "set_mode") {
      const std::string m = c.string("mode");
      if (m != "ait" && m != "dc") return error(id, "mode must be ait or dc");
      sim_.set_mode(harness::parse_mode(m));
      return ack(id, type);
    }
    const std::string path = c.string("path");
    if (!(path.starts_with("/config/") || path == "/time_limit" || path == "/perception/noise_sigma"))
      return error(id, "path must be under /config/, or /time_limit, or /perception/noise_sigma");
    json doc = sim_.scenario().source;
    try {
      doc[json::json_pointer(path)] = c.at("value").value();
    } catch (const json::exception&) {
      return error(id, "invalid path '" + path + "'");
    }
    const Scenario parsed = harness::scenario_from_json(doc, ".", &sim_.scenario().library);
    sim_.apply_tuning(parsed);
    return ack(id, type);
  }

  void begin_episode() {
    if (recorder_) recorder_->begin(sim_.header(json{{"id", "live"}, {"kind", "live"}}));
    episode_open_ = true;
  }

  void end_episode() {
    if (!episode_open_) return;
    episode_open_ = false;
    if (!recorder_) return;
    json term = sim_.terminal();
    if (!sim_.finished()) term["reason"] = "interrupted";
    recorder_->end(term);
  }

  Simulation sim_;
  Recorder* recorder_;
  SessionConfig cfg_;
  std::vector<ClientId> clients_;
  std::optional<ClientId> driver_;
  UserCommand command_;
  UserCommand pending_;
  bool have_pending_ = false;
  double last_command_time_ = 0.0;
  std::optional<long long> last_seq_;
  bool episode_open_ = false;
};

}  // namespace ait::service
