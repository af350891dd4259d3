#include <chrono>
#include <optional>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include "mpgrasp/service.h"
#include "models.h"

using namespace mpgrasp;
using namespace mpgrasp::testing;

namespace {

std::vector<Json> events_named(const std::vector<Json>& evs, const std::string& name) {
  std::vector<Json> out;
  for (const Json& e : evs) {
    if (e.value("name", "") == name) out.push_back(e);
  }
  return out;
}

// Advances in 10 ms steps until `pred` holds or `limit` seconds pass,
// collecting every drained event.
template <class Pred>
bool advance_until(ServiceCore& core, std::vector<Json>& evs, double limit, Pred pred) {
  const double end = core.runtime().time() + limit;
  while (core.runtime().time() < end - 1e-9) {
    core.advance(0.01);
    for (Json& e : core.drain_events()) evs.push_back(std::move(e));
    if (pred()) return true;
  }
  return false;
}

Json set_pose_msg(const std::string& id, const Pose& pose) {
  const EulerAngles e = rot_to_euler(pose.R);
  return {{"type", "set_object_pose"},
          {"id", id},
          {"p", {pose.p.x(), pose.p.y(), pose.p.z()}},
          {"o", {e.o.x(), e.o.y(), e.o.z()}}};
}

}  // namespace

TEST(ServiceCore, InitialStateIsIdle) {
  ServiceCore core(bundled(), 1);
  const Json s = core.scene_state();
  EXPECT_EQ(s["type"], "scene_state");
  EXPECT_EQ(s["phase"], "Idle");
  EXPECT_EQ(s["robot_q"].size(), bundled().robot.dof());
  EXPECT_TRUE(s["object_poses"].contains("drill"));
  EXPECT_FALSE(s["paused"].get<bool>());
}

TEST(ServiceCore, PromptYieldsDetectedDrillWithinLatency) {
  ServiceCore core(bundled(), 1);
  EXPECT_TRUE(core.handle(R"({"type":"prompt","text":"Grasp the orange drill"})").empty());
  std::vector<Json> evs;
  const bool got = advance_until(core, evs, 2.0, [&] {
    return !events_named(evs, "detected").empty();
  });
  ASSERT_TRUE(got);
  const Json d = events_named(evs, "detected").front();
  EXPECT_EQ(d["id"], "drill");
  const double t_prompt = events_named(evs, "prompt_received").front()["t"].get<double>();
  EXPECT_LE(d["t"].get<double>() - t_prompt, bundled().sensor.detect_latency + 1e-9);
  EXPECT_EQ(core.scene_state()["target"], "drill");
}

TEST(ServiceCore, DisplacementMidApproachRetargets) {
  ServiceCore core(bundled(), 3);
  core.handle(R"({"type":"prompt","text":"Grasp the orange drill"})");
  std::vector<Json> evs;
  // Half a second into the approach with targets in place.
  double t_targets = -1.0;
  ASSERT_TRUE(advance_until(core, evs, 10.0, [&] {
    if (t_targets < 0.0 && !events_named(evs, "targets").empty()) {
      t_targets = core.runtime().time();
    }
    return t_targets >= 0.0 && core.runtime().time() - t_targets >= 0.5;
  }));
  ASSERT_EQ(core.scene_state()["phase"], "ApproachGrasp");
  const Json before = core.scene_state()["plan_knots"];
  ASSERT_FALSE(before.empty());

  Pose moved = core.runtime().object_pose("drill");
  moved.p.y() += 0.15;
  EXPECT_TRUE(core.handle(set_pose_msg("drill", moved).dump()).empty());
  evs.clear();
  ASSERT_TRUE(advance_until(core, evs, 2.0, [&] {
    return !events_named(evs, "retarget").empty();
  }));
  EXPECT_EQ(events_named(evs, "object_override").size(), 1u);
  core.advance(0.1);  // at least one planner cycle after the retarget
  const Json after = core.scene_state()["plan_knots"];
  ASSERT_FALSE(after.empty());
  // The plan now ends somewhere else.
  double moved_goal = 0.0;
  for (std::size_t j = 0; j < after.back().size(); ++j) {
    moved_goal = std::max(moved_goal, std::abs(after.back()[j].get<double>() -
                                               before.back()[j].get<double>()));
  }
  EXPECT_GT(moved_goal, 0.05);
}

TEST(ServiceCore, UnknownTypeIsRejectedWithoutSideEffects) {
  ServiceCore core(bundled(), 1);
  core.advance(0.2);
  const Json before = core.scene_state();
  const auto reply = core.handle(R"({"type":"foo"})");
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(reply[0]["type"], "error");
  EXPECT_EQ(core.scene_state(), before);
}

TEST(ServiceCore, MalformedMessagesGetErrors) {
  ServiceCore core(bundled(), 1);
  for (const char* bad : {"{not json", "[1,2]", R"({"text":"x"})", R"({"type":"prompt"})",
                          R"({"type":"prompt","text":""})",
                          R"({"type":"set_object_pose","id":"drill","p":[0,0],"o":[0,0,0]})",
                          R"({"type":"set_object_pose","id":"nope","p":[0,0,0],"o":[0,0,0]})"}) {
    const auto reply = core.handle(bad);
    ASSERT_EQ(reply.size(), 1u) << bad;
    EXPECT_EQ(reply[0]["type"], "error") << bad;
    EXPECT_TRUE(reply[0]["reason"].is_string());
  }
  EXPECT_EQ(core.scene_state()["phase"], "Idle");
}

TEST(ServiceCore, PauseFreezesTimeAndResetRestarts) {
  ServiceCore core(bundled(), 1);
  core.handle(R"({"type":"prompt","text":"Grasp the orange drill"})");
  core.advance(0.3);
  core.handle(R"({"type":"pause"})");
  const double t = core.scene_state()["t"].get<double>();
  core.advance(0.5);
  EXPECT_EQ(core.scene_state()["t"].get<double>(), t);
  EXPECT_TRUE(core.scene_state()["paused"].get<bool>());
  core.handle(R"({"type":"resume"})");
  core.advance(0.1);
  EXPECT_NEAR(core.scene_state()["t"].get<double>(), t + 0.1, 1e-9);
  const auto evs = core.drain_events();
  EXPECT_EQ(events_named(evs, "paused").size(), 1u);
  EXPECT_EQ(events_named(evs, "resumed").size(), 1u);

  core.handle(R"({"type":"reset"})");
  const Json s = core.scene_state();
  EXPECT_EQ(s["t"].get<double>(), 0.0);
  EXPECT_EQ(s["phase"], "Idle");
  EXPECT_EQ(events_named(core.drain_events(), "reset").size(), 1u);
}

// --- socket round trip ---------------------------------------------------------

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;

class Client {
 public:
  explicit Client(unsigned short port) : stream_(io_) {
    asio::ip::tcp::resolver resolver(io_);
    auto results = resolver.resolve("127.0.0.1", std::to_string(port));
    asio::connect(stream_.next_layer(), results.begin(), results.end());
    stream_.handshake("127.0.0.1", "/");
    stream_.text(true);
  }
  ~Client() {
    beast::error_code ec;
    stream_.close(ws::close_code::normal, ec);
  }

  void send(const std::string& text) { stream_.write(asio::buffer(text)); }

  Json receive() {
    beast::flat_buffer buf;
    stream_.read(buf);
    return Json::parse(beast::buffers_to_string(buf.data()));
  }

  // Reads until a message satisfies `pred` or `limit` messages pass.
  template <class Pred>
  std::optional<Json> receive_until(Pred pred, int limit = 2000) {
    for (int i = 0; i < limit; ++i) {
      Json m = receive();
      if (pred(m)) return m;
    }
    return std::nullopt;
  }

 private:
  asio::io_context io_;
  ws::stream<asio::ip::tcp::socket> stream_;
};

}  // namespace

TEST(Service, WebSocketRoundTrip) {
  ServiceOptions opt;
  opt.port = 0;
  opt.seed = 5;
  Service service(bundled(), opt);
  const unsigned short port = service.open();
  ASSERT_NE(port, 0);
  std::thread server([&] { service.run(); });

  {
    Client client(port);
    const Json first = client.receive();
    EXPECT_EQ(first["type"], "scene_state");

    client.send(R"({"type":"prompt","text":"Grasp the orange drill"})");
    const auto detected = client.receive_until([](const Json& m) {
      return m["type"] == "event" && m.value("name", "") == "detected";
    });
    ASSERT_TRUE(detected.has_value());
    EXPECT_EQ((*detected)["id"], "drill");

    client.send("{oops");
    const auto err = client.receive_until([](const Json& m) { return m["type"] == "error"; });
    ASSERT_TRUE(err.has_value());

    // Still running after the bad frame.
    const auto state = client.receive_until([](const Json& m) {
      return m["type"] == "scene_state" && m["phase"] != "Idle";
    });
    ASSERT_TRUE(state.has_value());
    EXPECT_EQ((*state)["target"], "drill");
  }

  service.stop();
  server.join();
}
