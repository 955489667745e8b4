#include "ait/harness/suite.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ait;
using namespace ait::harness;

namespace {

json scenario_doc(const std::string& name) { return read_json_file(test::data_path("scenarios/" + name + ".json")); }

Scenario parse(const json& doc) { return scenario_from_json(doc, test::data_path("scenarios")); }

Scenario ground_truth(const std::string& name) {
  json doc = scenario_doc(name);
  doc["perception"]["source"] = "ground_truth";
  return parse(doc);
}

OperatorConfig load_operator(const std::string& name) {
  return operator_from_json(read_json_file(test::data_path("operators/" + name + ".json")));
}

std::string run_log(const Scenario& s, const OperatorConfig& op, std::uint64_t seed) {
  std::ostringstream out;
  run_scenario(s, op, seed, out);
  return out.str();
}

}  // namespace

TEST(ScenarioFile, ShippedFilesLoad) {
  for (const auto& entry : std::filesystem::directory_iterator(test::data_path("scenarios"))) {
    SCOPED_TRACE(entry.path().string());
    const Scenario s = load_scenario(entry.path());
    EXPECT_FALSE(s.id.empty());
    EXPECT_NE(s.find(s.target), nullptr);
  }
  for (const auto& entry : std::filesystem::directory_iterator(test::data_path("operators"))) {
    SCOPED_TRACE(entry.path().string());
    const OperatorConfig op = operator_from_json(read_json_file(entry.path()));
    EXPECT_EQ(operator_from_json(operator_to_json(op)).kind, op.kind);
  }
}

TEST(ScenarioFile, RejectsInvalidDocuments) {
  const json good = scenario_doc("arat_block_050");
  EXPECT_NO_THROW(parse(good));
  auto bad = [&](auto&& edit) {
    json d = good;
    edit(d);
    return d;
  };
  EXPECT_THROW(parse(bad([](json& d) { d["schema_version"] = 9; })), ParseError);
  EXPECT_THROW(parse(bad([](json& d) { d["task"] = "juggle"; })), ParseError);
  EXPECT_THROW(parse(bad([](json& d) { d["mode"] = "auto"; })), std::exception);
  EXPECT_THROW(parse(bad([](json& d) { d["objects"][0]["model_id"] = "anvil"; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d["target"] = "nothing"; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d["release_object"] = "block"; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d["objects"][0]["jitter"] = -0.1; })), ParseError);
  EXPECT_THROW(parse(bad([](json& d) { d["time_limit"] = 0; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d["control_rate"] = 10; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d["perception"]["source"] = "lidar"; })), ParseError);
  EXPECT_THROW(parse(bad([](json& d) { d["library"] = "missing.json"; })), ParseError);
  EXPECT_THROW(parse(bad([](json& d) { d["config"]["arbitration"]["alpha_min"] = 0.0; })), ValidationError);
  EXPECT_THROW(parse(bad([](json& d) { d.erase("objects"); })), ParseError);
}

TEST(OperatorFile, RejectsInvalidDocuments) {
  const json good = read_json_file(test::data_path("operators/noisy.json"));
  auto with = [&](const char* key, json v) {
    json d = good;
    d[key] = std::move(v);
    return d;
  };
  EXPECT_THROW(operator_from_json(with("kind", "telepathic")), ParseError);
  EXPECT_THROW(operator_from_json(with("dropout_prob", 1.0)), ValidationError);
  EXPECT_THROW(operator_from_json(with("noise_sigma", -0.1)), ValidationError);
  EXPECT_THROW(operator_from_json(with("schema_version", 2)), ParseError);
  EXPECT_THROW(operator_from_json(with("gain", "fast")), ParseError);
}

TEST(Operator, NoiselessNoisyMatchesRational) {
  const Scenario s = ground_truth("arat_block_050");
  OperatorConfig rational = load_operator("rational");
  OperatorConfig quiet = rational;
  quiet.kind = OperatorKind::noisy;
  quiet.noise_sigma = 0.0;
  Simulation a(s, 3), b(s, 3);
  Operator oa(rational, 3, s.dt()), ob(quiet, 3, s.dt());
  while (!a.finished() && !b.finished()) {
    const json ra = a.step(oa.tick(a.operator_view()));
    const json rb = b.step(ob.tick(b.operator_view()));
    ASSERT_EQ(ra.at("q"), rb.at("q")) << "t=" << ra.at("t");
  }
  EXPECT_EQ(a.terminal().dump(), b.terminal().dump());
}

TEST(Run, RationalOperatorCompletesArat) {
  const Scenario s = ground_truth("arat_block_050");
  for (Mode m : {Mode::ait, Mode::dc}) {
    Scenario sm = s;
    sm.mode = m;
    const json term = run_trial(sm, load_operator("rational"), 1);
    EXPECT_TRUE(term.at("success").get<bool>()) << to_string(m) << " " << term.dump();
    EXPECT_EQ(term.at("drops"), 0);
  }
}

TEST(Run, LogsAreDeterministic) {
  const Scenario s = load_scenario(test::data_path("scenarios/arat_block_050.json"));
  const OperatorConfig op = load_operator("noisy");
  const std::string a = run_log(s, op, 11), b = run_log(s, op, 11);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, run_log(s, op, 12));
}

TEST(Run, DcModeNeverAssists) {
  Scenario s = ground_truth("arat_block_050");
  s.mode = Mode::dc;
  std::istringstream in(run_log(s, load_operator("noisy"), 5));
  const ScenarioLog log = read_log(in);
  ASSERT_FALSE(log.ticks.empty());
  for (const auto& t : log.ticks) {
    ASSERT_EQ(t.at("alpha").get<double>(), 1.0);
    ASSERT_EQ(t.at("A"), t.at("U"));
    ASSERT_EQ(t.at("D"), t.at("U"));
    ASSERT_EQ(t.at("mode"), "dc");
  }
}

TEST(Replay, ReproducesRecordedRun) {
  const Scenario s = load_scenario(test::data_path("scenarios/arat_block_050.json"));
  std::istringstream in(run_log(s, load_operator("noisy"), 7));
  const ScenarioLog log = read_log(in);
  const ReplayReport rep = replay(log);
  EXPECT_TRUE(rep.identical) << rep.mismatch;
  EXPECT_EQ(rep.ticks_compared, log.ticks.size());
}

TEST(Replay, ReproducesMidRunModeSwitch) {
  const Scenario s = ground_truth("arat_block_050");
  const OperatorConfig op = load_operator("noisy");
  Simulation sim(s, 9);
  Operator oper(op, 9, s.dt());
  std::ostringstream out;
  out << sim.header(operator_to_json(op)).dump() << '\n';
  while (!sim.finished()) {
    if (sim.ticks() == 40) sim.set_mode(Mode::dc);
    if (sim.ticks() == 120) sim.set_mode(Mode::ait);
    out << sim.step(oper.tick(sim.operator_view())).dump() << '\n';
  }
  out << sim.terminal().dump() << '\n';
  std::istringstream in(out.str());
  const ScenarioLog log = read_log(in);
  ASSERT_TRUE(log.ticks.at(40).contains("changes"));
  EXPECT_EQ(log.ticks.at(40).at("mode"), "dc");
  const ReplayReport rep = replay(log);
  EXPECT_TRUE(rep.identical) << rep.mismatch;
}

TEST(Replay, DetectsTampering) {
  const Scenario s = ground_truth("arat_block_050");
  std::istringstream in(run_log(s, load_operator("rational"), 2));
  ScenarioLog log = read_log(in);
  log.ticks.at(10)["alpha"] = 0.123;
  const ReplayReport rep = replay(log);
  EXPECT_FALSE(rep.identical);
  EXPECT_EQ(rep.ticks_compared, 11u);
}

TEST(Log, ReaderRejectsMalformedStreams) {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_log(in);
  };
  EXPECT_THROW(read(""), ParseError);
  EXPECT_THROW(read(R"({"type":"tick","t":0.02})" "\n"), ParseError);
  EXPECT_THROW(read(R"({"type":"header"})" "\n" R"({"type":"tick","t":0.04})" "\n" R"({"type":"tick","t":0.02})" "\n"
                    R"({"type":"terminal"})" "\n"),
               ParseError);
  EXPECT_THROW(read(R"({"type":"header"})" "\n"), ParseError);
  EXPECT_THROW(read(R"({"type":"header"})" "\n{oops\n"), ParseError);
  EXPECT_NO_THROW(read(R"({"type":"header"})" "\n" R"({"type":"terminal"})" "\n"));
}

TEST(AratPredicate, PlacementInZoneSucceeds) {
  const Scenario s = ground_truth("arat_block_050");
  World w(s, 1);
  const Quat down(0, 1, 0, 0);
  w.attach_for_test("block", Pose(w.find("block")->pose.position, down));
  std::vector<WorldEvent> events;
  const arm::ArmState arm;
  // block bottom 1 cm above the platform top
  const Pose over(Vec3(0.45, 0.25, 0.135), down);
  w.update(over, 0.0, arm, 1.0, events);
  ASSERT_TRUE(w.holding("block"));
  EXPECT_LE((w.find("block")->pose.position - over.position).norm(), 1e-12);
  w.update(over, 1.0, arm, 1.02, events);
  EXPECT_FALSE(w.held().has_value());
  EXPECT_TRUE(w.status().success);
  EXPECT_EQ(w.status().transfers, 1);
  EXPECT_EQ(w.status().drops, 0);
  EXPECT_DOUBLE_EQ(*w.status().completion_time, 1.02);
  EXPECT_NEAR(w.find("block")->pose.position.z(), 0.125, 1e-12);
}

TEST(AratPredicate, ReleaseFromHeightOutsideZoneIsDrop) {
  const Scenario s = ground_truth("arat_block_050");
  World w(s, 1);
  const Quat down(0, 1, 0, 0);
  w.attach_for_test("block", Pose(w.find("block")->pose.position, down));
  std::vector<WorldEvent> events;
  const arm::ArmState arm;
  const Pose high(Vec3(0.5, -0.2, 0.2), down);
  w.update(high, 0.0, arm, 1.0, events);
  w.update(high, 1.0, arm, 1.02, events);
  EXPECT_FALSE(w.status().finished);
  EXPECT_EQ(w.status().drops, 1);
  EXPECT_EQ(w.status().transfers, 0);
  EXPECT_NEAR(w.find("block")->pose.position.z(), 0.025, 1e-12);
  w.time_up(120.0, events);
  EXPECT_FALSE(w.status().success);
  EXPECT_EQ(w.status().reason, "timeout");
}

TEST(BoxBlocks, TimeLimitEndsNormally) {
  const Scenario s = ground_truth("box_blocks");
  World w(s, 1);
  std::vector<WorldEvent> events;
  w.time_up(s.time_limit, events);
  EXPECT_TRUE(w.status().finished);
  EXPECT_FALSE(w.status().success);
  EXPECT_EQ(w.status().reason, "time_limit");
}

TEST(Suite, AggregatesPerCell) {
  std::vector<TrialResult> trials;
  for (int i = 0; i < 4; ++i) {
    TrialResult t;
    t.scenario = "s";
    t.operator_id = "op";
    t.mode = i < 2 ? Mode::ait : Mode::dc;
    t.success = i != 1;
    if (t.success) t.completion_time = 10.0 + i;
    t.time_to_first_grasp = 2.0 * (i + 1);
    t.drops = i;
    t.correct_object = i % 2 == 0;
    trials.push_back(t);
  }
  const auto rows = aggregate(trials);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, Mode::ait);
  EXPECT_EQ(rows[0].trials, 2);
  EXPECT_DOUBLE_EQ(rows[0].success_rate, 0.5);
  EXPECT_DOUBLE_EQ(*rows[0].completion_time, 10.0);
  EXPECT_DOUBLE_EQ(*rows[0].time_to_first_grasp, 3.0);
  EXPECT_DOUBLE_EQ(rows[0].drops, 0.5);
  EXPECT_DOUBLE_EQ(*rows[0].correct_rate, 0.5);
  EXPECT_DOUBLE_EQ(rows[1].success_rate, 1.0);
  EXPECT_DOUBLE_EQ(*rows[1].completion_time, 12.5);

  std::ostringstream csv;
  write_csv(rows, csv);
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "scenario,operator,mode,trials,success_rate,completion_time,time_to_first_grasp,drops,transfers,correct_rate");
  EXPECT_EQ(first.substr(0, 13), "s,op,ait,2,0.");
}

TEST(Suite, ConfigPathsAreRelativeToFile) {
  const json doc = {{"schema_version", 1},
                    {"scenarios", {"scenarios/arat_block_050.json"}},
                    {"operators", {"operators/rational.json"}},
                    {"modes", {"ait"}},
                    {"seeds", {{"base", 4}, {"count", 2}}}};
  const SuiteConfig cfg = suite_from_json(doc, test::data_path(""));
  ASSERT_EQ(cfg.scenarios.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(cfg.scenarios[0]));
  EXPECT_EQ(cfg.seed_base, 4u);
  EXPECT_EQ(cfg.seed_count, 2);
  json bad = doc;
  bad["modes"] = {"fast"};
  EXPECT_THROW(suite_from_json(bad, test::data_path("")), std::exception);
}

TEST(Suite, ParallelTrialsMatchSerial) {
  auto s = std::make_shared<const Scenario>(ground_truth("arat_block_050"));
  const OperatorConfig op = load_operator("noisy");
  std::vector<TrialSpec> specs;
  for (std::uint64_t k = 1; k <= 4; ++k) specs.push_back({s, op, k, nullptr});
  const auto serial = run_trials(specs, 1), parallel = run_trials(specs, 2);
  for (std::size_t i = 0; i < specs.size(); ++i) EXPECT_EQ(to_json(serial[i]).dump(), to_json(parallel[i]).dump());
}
