#include "ait/service/server.hpp"
#include "test_util.hpp"

#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <sstream>
#include <thread>

using namespace ait;
using namespace ait::service;

namespace {

Scenario scenario() {
  json doc = harness::read_json_file(test::data_path("scenarios/arat_block_050.json"));
  doc["perception"]["source"] = "ground_truth";
  return harness::scenario_from_json(doc, test::data_path("scenarios"));
}

json parse(const Outgoing& o) { return json::parse(o.text); }

std::string command(double vx, std::optional<long long> seq = std::nullopt) {
  json j{{"type", "command"}, {"v", {vx, 0.0, 0.0}}, {"grasp", 0.0}};
  if (seq) j["seq"] = *seq;
  return j.dump();
}

json last_state(const std::vector<Outgoing>& out) {
  for (const auto& o : out) {
    const json j = parse(o);
    if (j.at("type") == "state") return j;
  }
  return {};
}

}  // namespace

TEST(LiveSession, FirstClientDrivesOthersObserve) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  EXPECT_EQ(parse(session.connect(1)).at("role"), "driver");
  EXPECT_EQ(parse(session.connect(2)).at("role"), "observer");
  const auto reply = session.receive(2, command(0.1));
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(parse(reply[0]).at("type"), "error");
  EXPECT_EQ(reply[0].to, 2u);
  EXPECT_TRUE(session.receive(1, command(0.1)).empty());
  session.tick();
  EXPECT_DOUBLE_EQ(session.held_command().v_u.linear.x(), 0.1);
}

TEST(LiveSession, BadMessagesGetErrorsAndChangeNothing) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  session.connect(7);
  for (const std::string text : {"{nope", "[1,2]", R"({"type":"launch"})", R"({"type":"command","v":[1,2]})",
                                 R"({"type":"set_mode","mode":"auto"})",
                                 R"({"type":"set_config","path":"/objects/0/model_id","value":"ball"})",
                                 R"({"type":"set_config","path":"/config/arbitration/alpha_min","value":-1})"}) {
    const auto reply = session.receive(7, text);
    ASSERT_EQ(reply.size(), 1u) << text;
    EXPECT_EQ(parse(reply[0]).at("type"), "error") << text;
  }
  EXPECT_EQ(session.driver(), 7u);
  EXPECT_EQ(session.simulation().ticks(), 0u);
  EXPECT_EQ(session.simulation().mode(), Mode::ait);
}

TEST(LiveSession, ModeAndConfigChangesAreAcknowledged) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  session.connect(1);
  auto reply = session.receive(1, R"({"type":"set_mode","mode":"dc"})");
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(parse(reply[0]).at("type"), "ack");
  EXPECT_EQ(session.simulation().mode(), Mode::dc);
  reply = session.receive(1, R"({"type":"set_config","path":"/config/arbitration/alpha_min","value":0.3})");
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(parse(reply[0]).at("type"), "ack");
  EXPECT_DOUBLE_EQ(session.simulation().scenario().arbitration.alpha_min, 0.3);
  EXPECT_EQ(last_state(session.tick()).at("alpha"), 1.0);
}

TEST(LiveSession, StaleSequenceNumbersAreDropped) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  session.connect(1);
  session.receive(1, command(0.2, 5));
  session.receive(1, command(-0.2, 4));
  const json st = last_state(session.tick());
  EXPECT_EQ(st.at("seq"), 5);
  EXPECT_DOUBLE_EQ(session.held_command().v_u.linear.x(), 0.2);
}

TEST(LiveSession, SilentDriverIsStoppedAfterTimeout) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  session.connect(1);
  session.receive(1, command(0.2));
  session.tick();
  const int limit = static_cast<int>(0.5 / s.dt()) + 2;
  for (int i = 0; i < limit; ++i) session.tick();
  EXPECT_EQ(session.held_command().v_u.linear.norm(), 0.0);
}

TEST(LiveSession, DriverDisconnectHoldsArmAndPromotesObserver) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  session.connect(1);
  session.connect(2);
  session.connect(3);
  session.receive(1, command(0.2));
  session.tick();
  EXPECT_TRUE(session.disconnect(3).empty());
  const auto out = session.disconnect(1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, 2u);
  EXPECT_EQ(parse(out[0]).at("role"), "driver");
  EXPECT_EQ(session.driver(), 2u);
  EXPECT_EQ(session.held_command().v_u.linear.norm(), 0.0);
  const json st = last_state(session.tick());
  EXPECT_EQ(st.at("cmd").at("v"), json({0.0, 0.0, 0.0}));
}

TEST(LiveSession, RecordedEpisodeReplaysIdentically) {
  const Scenario s = scenario();
  MemoryRecorder rec;
  {
    LiveSession session(s, 4, &rec);
    session.connect(1);
    for (int i = 0; i < 150; ++i) {
      if (i % 10 == 0) session.receive(1, command(0.1 * std::sin(0.1 * i), i));
      if (i == 60) session.receive(1, R"({"type":"set_mode","mode":"dc"})");
      if (i == 90) session.receive(1, R"({"type":"set_config","path":"/config/arbitration/alpha_min","value":0.4})");
      session.tick();
    }
  }
  ASSERT_EQ(rec.episodes.size(), 1u);
  std::istringstream in(rec.episodes[0]);
  const harness::ScenarioLog log = harness::read_log(in);
  EXPECT_EQ(log.ticks.size(), 150u);
  EXPECT_EQ(log.terminal.at("reason"), "interrupted");
  const auto rep = harness::replay(log);
  EXPECT_TRUE(rep.identical) << rep.mismatch;
}

TEST(LiveSession, ResetStartsNewEpisode) {
  const Scenario s = scenario();
  MemoryRecorder rec;
  LiveSession session(s, 4, &rec);
  session.connect(1);
  session.tick();
  const auto reply = session.receive(1, R"({"type":"reset"})");
  EXPECT_EQ(parse(reply.at(0)).at("type"), "ack");
  EXPECT_EQ(session.simulation().ticks(), 0u);
  EXPECT_EQ(rec.episodes.size(), 2u);
}

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

struct Client {
  boost::asio::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};

  explicit Client(unsigned short port) {
    tcp::resolver resolver(ioc);
    boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/");
  }
  json read() {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  void write(const std::string& text) { ws.write(boost::asio::buffer(text)); }
};

}  // namespace

TEST(Server, WebSocketRoundTrip) {
  const Scenario s = scenario();
  LiveSession session(s, 1);
  Server server(session, 0, "127.0.0.1");
  std::thread loop([&] { server.run(std::chrono::milliseconds(5)); });
  try {
    Client driver(server.port());
    const json hello = driver.read();
    EXPECT_EQ(hello.at("type"), "hello");
    EXPECT_EQ(hello.at("role"), "driver");
    driver.write(command(0.1, 1));
    bool acked_state = false, got_error = false;
    for (int i = 0; i < 500 && !acked_state; ++i) {
      const json msg = driver.read();
      if (msg.at("type") == "state" && msg.value("seq", -1) == 1) acked_state = msg.at("cmd").at("v").at(0) == 0.1;
    }
    EXPECT_TRUE(acked_state);
    driver.write("not json");
    for (int i = 0; i < 500 && !got_error; ++i) got_error = driver.read().at("type") == "error";
    EXPECT_TRUE(got_error);
    Client observer(server.port());
    json msg = observer.read();
    while (msg.at("type") != "hello") msg = observer.read();
    EXPECT_EQ(msg.at("role"), "observer");
    driver.ws.close(websocket::close_code::normal);
    bool promoted = false;
    for (int i = 0; i < 500 && !promoted; ++i) {
      const json m = observer.read();
      promoted = m.at("type") == "role" && m.at("role") == "driver";
    }
    EXPECT_TRUE(promoted);
  } catch (const std::exception& e) {
    ADD_FAILURE() << e.what();
  }
  server.stop();
  loop.join();
}
