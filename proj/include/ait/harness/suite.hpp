#pragma once

#include "ait/harness/runner.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ait::harness {

inline constexpr int kSuiteSchemaVersion = 1;

struct SuiteConfig {
  std::vector<std::filesystem::path> scenarios;
  std::vector<std::filesystem::path> operators;
  std::vector<Mode> modes{Mode::ait, Mode::dc};
  std::uint64_t seed_base = 1;
  int seed_count = 1;
  int threads = 1;
};

inline SuiteConfig suite_from_json(const json& doc, const std::filesystem::path& base_dir) {
  const JsonCursor c(doc, "");
  c.require_object();
  const auto version = c.at("schema_version").integer();
  if (version != kSuiteSchemaVersion) throw ParseError("schema_version", "unsupported version " + std::to_string(version));
  SuiteConfig cfg;
  const auto paths = [&](const std::string& key) {
    std::vector<std::filesystem::path> out;
    const auto arr = c.at(key);
    arr.require_array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::filesystem::path p = arr[i].string();
      out.push_back(p.is_absolute() ? p : base_dir / p);
    }
    return out;
  };
  cfg.scenarios = paths("scenarios");
  cfg.operators = paths("operators");
  if (const auto m = c.maybe("modes")) {
    m->require_array();
    cfg.modes.clear();
    for (std::size_t i = 0; i < m->size(); ++i) {
      const auto s = (*m)[i].string();
      if (s != "ait" && s != "dc") throw ParseError((*m)[i].path(), "mode must be ait or dc");
      cfg.modes.push_back(parse_mode(s));
    }
  }
  if (const auto s = c.maybe("seeds")) {
    const auto base = s->at("base").integer();
    const auto count = s->at("count").integer();
    if (base < 0) throw ParseError(s->at("base").path(), "must be non-negative");
    if (count < 0) throw ParseError(s->at("count").path(), "must be non-negative");
    cfg.seed_base = static_cast<std::uint64_t>(base);
    cfg.seed_count = static_cast<int>(count);
  }
  cfg.threads = static_cast<int>(c.number("threads", cfg.threads));
  if (cfg.threads < 1) throw ParseError("threads", "must be at least 1");
  return cfg;
}

inline SuiteConfig load_suite(const std::filesystem::path& path) {
  return suite_from_json(read_json_file(path), path.parent_path());
}

struct TrialResult {
  std::string scenario;
  std::string operator_id;
  Mode mode = Mode::ait;
  std::uint64_t seed = 0;
  bool success = false;
  std::string reason;
  std::optional<double> completion_time;
  std::optional<double> time_to_first_grasp;
  int drops = 0;
  int transfers = 0;
  std::optional<bool> correct_object;
  double path_length = 0.0;
};

inline TrialResult trial_from_terminal(const json& term) {
  TrialResult r;
  const auto opt = [&](const char* key) -> std::optional<double> {
    if (!term.contains(key) || term[key].is_null()) return std::nullopt;
    return term[key].get<double>();
  };
  r.success = term.at("success").get<bool>();
  r.reason = term.at("reason").get<std::string>();
  r.completion_time = opt("completion_time");
  r.time_to_first_grasp = opt("time_to_first_grasp");
  r.drops = term.at("drops").get<int>();
  r.transfers = term.value("transfers", 0);
  if (term.contains("correct_object") && !term["correct_object"].is_null()) r.correct_object = term["correct_object"].get<bool>();
  r.path_length = term.at("path_length").get<double>();
  return r;
}

/// One (scenario, operator, mode) cell. Times are means over the trials that
/// produced them; completion time counts successes only.
struct SuiteRow {
  std::string scenario;
  std::string operator_id;
  Mode mode = Mode::ait;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<double> completion_time;
  std::optional<double> time_to_first_grasp;
  double drops = 0.0;
  double transfers = 0.0;
  std::optional<double> correct_rate;
};

struct SuiteResult {
  std::vector<TrialResult> trials;
  std::vector<SuiteRow> rows;
};

inline std::vector<SuiteRow> aggregate(const std::vector<TrialResult>& trials) {
  std::vector<SuiteRow> rows;
  std::map<std::tuple<std::string, std::string, Mode>, std::size_t> index;
  struct Sums {
    double completion = 0.0, grasp = 0.0;
    int n_completion = 0, n_grasp = 0, n_correct = 0, correct = 0;
  };
  std::vector<Sums> sums;
  for (const auto& t : trials) {
    const auto key = std::make_tuple(t.scenario, t.operator_id, t.mode);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({t.scenario, t.operator_id, t.mode});
      sums.emplace_back();
    }
    auto& row = rows[it->second];
    auto& s = sums[it->second];
    ++row.trials;
    row.drops += t.drops;
    row.transfers += t.transfers;
    if (t.success) {
      ++row.successes;
      if (t.completion_time) {
        s.completion += *t.completion_time;
        ++s.n_completion;
      }
    }
    if (t.time_to_first_grasp) {
      s.grasp += *t.time_to_first_grasp;
      ++s.n_grasp;
    }
    if (t.correct_object) {
      ++s.n_correct;
      s.correct += *t.correct_object ? 1 : 0;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    const auto& s = sums[i];
    const double n = row.trials;
    row.success_rate = row.successes / n;
    row.drops /= n;
    row.transfers /= n;
    if (s.n_completion > 0) row.completion_time = s.completion / s.n_completion;
    if (s.n_grasp > 0) row.time_to_first_grasp = s.grasp / s.n_grasp;
    if (s.n_correct > 0) row.correct_rate = static_cast<double>(s.correct) / s.n_correct;
  }
  return rows;
}

/// A trial to run: scenario (with its mode already set), operator and seed.
struct TrialSpec {
  std::shared_ptr<const Scenario> scenario;
  OperatorConfig op;
  std::uint64_t seed = 0;
  std::shared_ptr<const perception::TemplateSet> templates;
};

/// Runs trials, in parallel when `threads` > 1. Each trial owns its
/// simulation; results keep the input order.
inline std::vector<TrialResult> run_trials(const std::vector<TrialSpec>& specs, int threads = 1) {
  std::vector<TrialResult> out(specs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        const auto& sp = specs[i];
        auto r = trial_from_terminal(run_trial(*sp.scenario, sp.op, sp.seed, sp.templates));
        r.scenario = sp.scenario->id;
        r.operator_id = sp.op.id;
        r.mode = sp.scenario->mode;
        r.seed = sp.seed;
        out[i] = std::move(r);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(specs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

inline std::shared_ptr<const perception::TemplateSet> templates_for(const Scenario& s) {
  if (s.perception.source != PerceptionSettings::Source::depth) return nullptr;
  return std::make_shared<const perception::TemplateSet>(perception::build_templates(s.library));
}

/// Every scenario × operator × mode over the same seeds, so AIT and DC cells pair up.
inline SuiteResult evaluate_suite(const SuiteConfig& cfg) {
  std::vector<TrialSpec> specs;
  std::vector<OperatorConfig> ops;
  for (const auto& p : cfg.operators) ops.push_back(operator_from_json(read_json_file(p)));
  for (const auto& path : cfg.scenarios) {
    const Scenario base = load_scenario(path);
    const auto templates = templates_for(base);
    for (const auto& op : ops)
      for (Mode m : cfg.modes) {
        auto s = std::make_shared<Scenario>(base);
        s->mode = m;
        for (int k = 0; k < cfg.seed_count; ++k)
          specs.push_back({s, op, cfg.seed_base + static_cast<std::uint64_t>(k), templates});
      }
  }
  SuiteResult r;
  r.trials = run_trials(specs, cfg.threads);
  r.rows = aggregate(r.trials);
  return r;
}

namespace detail {
inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(6) << *v;
  return os.str();
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace detail

inline void write_csv(const std::vector<SuiteRow>& rows, std::ostream& out) {
  out << "scenario,operator,mode,trials,success_rate,completion_time,time_to_first_grasp,drops,transfers,correct_rate\n";
  for (const auto& r : rows)
    out << r.scenario << ',' << r.operator_id << ',' << to_string(r.mode) << ',' << r.trials << ','
        << detail::csv_number(r.success_rate) << ',' << detail::csv_number(r.completion_time) << ','
        << detail::csv_number(r.time_to_first_grasp) << ',' << detail::csv_number(r.drops) << ','
        << detail::csv_number(r.transfers) << ',' << detail::csv_number(r.correct_rate) << '\n';
}

inline json to_json(const TrialResult& t) {
  json j{{"scenario", t.scenario},
         {"operator", t.operator_id},
         {"mode", to_string(t.mode)},
         {"seed", t.seed},
         {"success", t.success},
         {"reason", t.reason},
         {"completion_time", detail::opt_json(t.completion_time)},
         {"time_to_first_grasp", detail::opt_json(t.time_to_first_grasp)},
         {"drops", t.drops},
         {"transfers", t.transfers},
         {"path_length", t.path_length}};
  j["correct_object"] = t.correct_object ? json(*t.correct_object) : json(nullptr);
  return j;
}

inline json to_json(const SuiteRow& r) {
  return {{"scenario", r.scenario},
          {"operator", r.operator_id},
          {"mode", to_string(r.mode)},
          {"trials", r.trials},
          {"successes", r.successes},
          {"success_rate", r.success_rate},
          {"completion_time", detail::opt_json(r.completion_time)},
          {"time_to_first_grasp", detail::opt_json(r.time_to_first_grasp)},
          {"drops", r.drops},
          {"transfers", r.transfers},
          {"correct_rate", detail::opt_json(r.correct_rate)}};
}

inline json to_json(const SuiteResult& r) {
  json rows = json::array(), trials = json::array();
  for (const auto& x : r.rows) rows.push_back(to_json(x));
  for (const auto& x : r.trials) trials.push_back(to_json(x));
  return {{"schema_version", kSuiteSchemaVersion}, {"rows", rows}, {"trials", trials}};
}

struct CalibrationPoint {
  double sigma = 0.0;
  double dc_success_rate = 0.0;
};

struct Calibration {
  std::optional<double> sigma;  // smallest sigma meeting the target, if any
  std::vector<CalibrationPoint> points;
};

/// Walks `sigmas` in increasing order and stops at the first value whose DC
/// success rate over the seeds falls below `max_success`.
inline Calibration calibrate_noise(const Scenario& scenario, OperatorConfig op, std::vector<double> sigmas,
                                   std::uint64_t seed_base, int seed_count, double max_success = 0.2, int threads = 1) {
  std::sort(sigmas.begin(), sigmas.end());
  auto dc = std::make_shared<Scenario>(scenario);
  dc->mode = Mode::dc;
  const auto templates = templates_for(*dc);
  Calibration cal;
  for (double sigma : sigmas) {
    op.noise_sigma = sigma;
    std::vector<TrialSpec> specs;
    for (int k = 0; k < seed_count; ++k) specs.push_back({dc, op, seed_base + static_cast<std::uint64_t>(k), templates});
    const auto rows = aggregate(run_trials(specs, threads));
    const double rate = rows.empty() ? 0.0 : rows.front().success_rate;
    cal.points.push_back({sigma, rate});
    if (rate < max_success) {
      cal.sigma = sigma;
      break;
    }
  }
  return cal;
}

}  // namespace ait::harness
