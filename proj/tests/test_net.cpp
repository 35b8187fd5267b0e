#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "tbag/clock.hpp"
#include <random>

#include "tbag/rig.hpp"
#include "tbag/simdev.hpp"
#include "tbag/tcp_link.hpp"
#include "tbag/wire.hpp"
#include "tbag/ws_bridge.hpp"

using namespace tbag;
using namespace std::chrono_literals;
namespace asio = boost::asio;
namespace beast = boost::beast;
using json = nlohmann::json;

namespace {

JointStateMsg state_msg(double v) {
  JointStateMsg m;
  m.arms.resize(2);
  m.arms[0].position[0] = v;
  m.arms[1].gripper = v;
  return m;
}

std::vector<BusMessage> collect(Subscription& sub, std::size_t want, std::chrono::milliseconds timeout) {
  std::vector<BusMessage> out;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (out.size() < want && std::chrono::steady_clock::now() < deadline) {
    if (auto m = sub.pop_for(10ms)) out.push_back(std::move(*m));
  }
  return out;
}

// Waits until `sub` has been quiet for `quiet`.
std::vector<BusMessage> collect_until_quiet(Subscription& sub, std::chrono::milliseconds quiet) {
  std::vector<BusMessage> out;
  while (auto m = sub.pop_for(quiet)) out.push_back(std::move(*m));
  return out;
}

// Publishes until the remote side has seen one message, so the link's
// subscriptions are known to be live.
void prime(Bus& from, Bus& to) {
  auto sub = to.subscribe("/prime", 16);
  Publisher p(from, "/prime");
  for (int i = 0; i < 500 && !sub.try_pop(); ++i) {
    p.publish(state_msg(0), static_cast<Stamp>(i + 1));
    std::this_thread::sleep_for(5ms);
  }
}

std::string base64_oracle(const std::string& in) {
  static const char* abc = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const unsigned v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8) | std::uint8_t(in[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out += abc[(v >> s) & 63];
  }
  if (i + 1 == in.size()) {
    const unsigned v = std::uint8_t(in[i]) << 16;
    out += abc[(v >> 18) & 63];
    out += abc[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const unsigned v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8);
    out += abc[(v >> 18) & 63];
    out += abc[(v >> 12) & 63];
    out += abc[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string b64(const std::string& s) {
  return ws::base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace

TEST_SUITE("tcp") {
  TEST_CASE("messages cross the link in both directions, in order, without echo") {
    Bus server_bus, client_bus;
    BusServer server(server_bus, "127.0.0.1", 0);
    BusClient client(client_bus, "127.0.0.1", server.port());
    REQUIRE(client.wait_connected(2s));
    prime(server_bus, client_bus);
    prime(client_bus, server_bus);

    auto remote = client_bus.subscribe(topics::kFollowerJointStates, 1024);
    auto local_echo = client_bus.subscribe(topics::kLeaderJointStates, 1024);
    auto back = server_bus.subscribe(topics::kLeaderJointStates, 1024);
    Publisher on_server(server_bus, topics::kFollowerJointStates);
    Publisher on_client(client_bus, topics::kLeaderJointStates);
    for (int i = 0; i < 200; ++i) {
      on_server.publish(state_msg(i), 1000 + i);
      on_client.publish(state_msg(-i), 5000 + i);
    }
    const auto got = collect(remote, 200, 3s);
    REQUIRE(got.size() == 200);
    for (int i = 0; i < 200; ++i) {
      CHECK(got[i].seq == static_cast<std::uint64_t>(i));
      CHECK(got[i].stamp == static_cast<Stamp>(1000 + i));
      CHECK(std::get<JointStateMsg>(got[i].payload) == state_msg(i));
    }
    CHECK(collect(back, 200, 3s).size() == 200);
    std::this_thread::sleep_for(100ms);
    CHECK(local_echo.drain().size() == 200);  // own messages only, none echoed back
    CHECK(server.peer_count() == 1);
  }

  TEST_CASE("a dropped connection loses a gap but never reorders or duplicates") {
    Bus server_bus, client_bus;
    BusServer server(server_bus, "127.0.0.1", 0);
    ClientOptions opts;
    opts.reconnect_delay = 50ms;
    BusClient client(client_bus, "127.0.0.1", server.port(), opts);
    REQUIRE(client.wait_connected(2s));
    prime(server_bus, client_bus);
    auto remote = client_bus.subscribe("/stream", 100000);
    Publisher pub(server_bus, "/stream");
    for (int i = 0; i < 600; ++i) {
      pub.publish(state_msg(i), static_cast<Stamp>(i + 1));
      if (i == 200) server.drop_peers();
      if (i == 400) client.drop_connection();
      std::this_thread::sleep_for(1ms);
    }
    const auto got = collect_until_quiet(remote, 500ms);
    REQUIRE(got.size() > 100);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].seq > got[i - 1].seq);
    CHECK(got.back().seq == 599);
    CHECK(client.stats().connections >= 3);
  }

  TEST_CASE("a peer sending garbage is disconnected") {
    Bus bus;
    BusServer server(bus, "127.0.0.1", 0);
    asio::io_context io;
    asio::ip::tcp::socket sock(io);
    sock.connect({asio::ip::make_address("127.0.0.1"), server.port()});
    const std::string junk = "NOPE this is not a frame at all.........................";
    asio::write(sock, asio::buffer(junk));
    char buf[64];
    boost::system::error_code ec;
    for (int i = 0; i < 100 && !ec; ++i) sock.read_some(asio::buffer(buf), ec);
    CHECK(ec);
    CHECK(server.stats().decode_errors == 1);
  }

  TEST_CASE("client waits for a server that is not up yet") {
    Bus server_bus, client_bus;
    std::uint16_t port;
    {
      asio::io_context io;
      asio::ip::tcp::acceptor a(io, {asio::ip::make_address("127.0.0.1"), 0});
      port = a.local_endpoint().port();
    }
    ClientOptions opts;
    opts.reconnect_delay = 20ms;
    BusClient client(client_bus, "127.0.0.1", port, opts);
    CHECK_FALSE(client.wait_connected(100ms));
    BusServer server(server_bus, "127.0.0.1", port);
    CHECK(client.wait_connected(3s));
  }
}

TEST_SUITE("tcp_soak") {
  TEST_CASE("125 Hz for 10 s delivers at least 99%") {
    Bus server_bus, client_bus;
    BusServer server(server_bus, "127.0.0.1", 0);
    BusClient client(client_bus, "127.0.0.1", server.port());
    REQUIRE(client.wait_connected(2s));
    prime(server_bus, client_bus);
    auto remote = client_bus.subscribe(topics::kFollowerJointStates, 4096);
    std::vector<PeriodicTask> tasks;
    Publisher pub(server_bus, topics::kFollowerJointStates);
    std::uint64_t sent = 0;
    tasks.push_back({"pub", 125.0, 0, [&](Stamp t) {
                       pub.publish(state_msg(double(sent)), t);
                       ++sent;
                     }});
    std::atomic<bool> stop{false};
    const Stamp start = monotonic_now();
    run_realtime(tasks, start, start + 10'000'000'000ull, stop);
    const auto got = collect_until_quiet(remote, 300ms);
    MESSAGE("sent " << sent << ", received " << got.size());
    CHECK(sent >= 1240);
    CHECK(got.size() >= 0.99 * sent);
  }
}

TEST_SUITE("ws") {
  TEST_CASE("base64 matches a reference encoder") {
    CHECK(b64("") == "");
    CHECK(b64("f") == "Zg==");
    CHECK(b64("fo") == "Zm8=");
    CHECK(b64("foobar") == "Zm9vYmFy");
    std::mt19937_64 rng(101);
    for (int i = 0; i < 300; ++i) {
      std::string s(rng() % 70, '\0');
      for (auto& c : s) c = static_cast<char>(rng());
      CHECK(b64(s) == base64_oracle(s));
    }
  }

  TEST_CASE("server messages") {
    ws::ThumbnailThrottle throttle;
    auto text = ws::encode_server_message({"/follower/joint_states", 12, 3, state_msg(0.5)}, throttle);
    REQUIRE(text);
    auto j = json::parse(*text);
    CHECK(j["topic"] == "/follower/joint_states");
    CHECK(j["stamp"] == 12);
    CHECK(j["seq"] == 3);
    CHECK(j["payload"]["type"] == "joint_state");
    CHECK(j["payload"]["arms"][0]["position"][0] == 0.5);

    FeedbackSignal f;
    f.cause = FeedbackCause::Collision;
    f.magnitude.right[2] = 0.25;
    j = json::parse(*ws::encode_server_message({"/teleop/feedback", 1, 0, f}, throttle));
    CHECK(j["payload"]["cause"] == "Collision");
    CHECK(j["payload"]["magnitude"]["right"][2] == 0.25);

    SessionEvent ev{SessionEventCode::StateChanged, static_cast<std::uint64_t>(SessionStateCode::Following)};
    j = json::parse(*ws::encode_server_message({"/session/events", 1, 0, ev}, throttle));
    CHECK(j["payload"]["event"] == "StateChanged");
    CHECK(j["payload"]["state"] == "Following");

    CameraFrame cam{1, 9, 64, 48, test_pattern(1, 9, 64, 48)};
    text = ws::encode_server_message({"/camera/1/frame", 1'000'000'000, 0, cam}, throttle);
    REQUIRE(text);
    j = json::parse(*text);
    CHECK(j["payload"]["thumbnail_width"] == 32);
    CHECK(j["payload"]["thumbnail_height"] == 24);
    CHECK(j["payload"]["rgb_base64"].get<std::string>().size() == 32 * 24 * 3 / 3 * 4);
    CHECK_FALSE(ws::encode_server_message({"/camera/1/frame", 1'050'000'000, 1, cam}, throttle));
    CHECK(ws::encode_server_message({"/camera/2/frame", 1'050'000'000, 0, CameraFrame{2, 0, 8, 8, std::vector<std::uint8_t>(192)}}, throttle));
    CHECK(ws::encode_server_message({"/camera/1/frame", 1'100'000'000, 2, cam}, throttle));
  }

  TEST_CASE("client messages are validated and clamped") {
    const Rig rig = default_rig();
    auto ok = ws::decode_client_message(
        R"({"type":"leader_set","arm":"right","angles":[0,0.4,0,1.2,0,0.5,0],"gripper":0.3})", rig.leaders);
    REQUIRE(std::holds_alternative<ws::LeaderSet>(ok));
    CHECK(std::get<ws::LeaderSet>(ok).arm == 1);
    CHECK(std::get<ws::LeaderSet>(ok).q.gripper == 0.3);
    auto clamped = ws::decode_client_message(R"({"type":"leader_set","arm":0,"angles":[99,0,0,0,0,0,0],"gripper":7})",
                                             rig.leaders);
    REQUIRE(std::holds_alternative<ws::LeaderSet>(clamped));
    CHECK(std::get<ws::LeaderSet>(clamped).q.angles[0] == rig.leaders.left.joint_limits[0].upper);
    CHECK(std::get<ws::LeaderSet>(clamped).q.gripper == rig.leaders.left.gripper_limits.second);
    for (const char* bad : {"", "[]", "{", R"({"type":"nope"})",
                            R"({"type":"leader_set","arm":2,"angles":[0,0,0,0,0,0,0],"gripper":1})",
                            R"({"type":"leader_set","arm":0,"angles":[0,0,0],"gripper":1})",
                            R"({"type":"leader_set","arm":0,"angles":[0,0,0,0,0,0,"x"],"gripper":1})",
                            R"({"type":"leader_set","arm":0,"angles":[0,0,0,0,0,0,0]})",
                            R"({"type":"leader_set","arm":0,"angles":[0,0,0,0,0,0,1e999],"gripper":1})"}) {
      CAPTURE(bad);
      CHECK(std::holds_alternative<ws::MalformedFrame>(ws::decode_client_message(bad, rig.leaders)));
    }
  }

  TEST_CASE("live bridge: page, broadcast, setpoints, malformed frames") {
    const Rig rig = default_rig();
    Bus bus;
    std::mutex mu;
    std::vector<std::pair<std::size_t, JointVector>> sets;
    BridgeOptions opts;
    WsBridge bridge(bus, rig.leaders, [&](std::size_t arm, const JointVector& q) {
      std::lock_guard lock(mu);
      sets.emplace_back(arm, q);
    }, opts);

    asio::io_context io;
    {
      beast::tcp_stream http_stream(io);
      http_stream.connect({asio::ip::make_address("127.0.0.1"), bridge.port()});
      beast::http::request<beast::http::string_body> req{beast::http::verb::get, "/", 11};
      req.set(beast::http::field::host, "localhost");
      beast::http::write(http_stream, req);
      beast::flat_buffer buf;
      beast::http::response<beast::http::string_body> res;
      beast::http::read(http_stream, buf, res);
      CHECK(res.result() == beast::http::status::ok);
      CHECK(res.body().find("<html") != std::string::npos);
    }

    beast::websocket::stream<beast::tcp_stream> ws(io);
    beast::get_lowest_layer(ws).connect({asio::ip::make_address("127.0.0.1"), bridge.port()});
    ws.handshake("localhost", "/");
    for (int i = 0; i < 200 && bridge.client_count() == 0; ++i) std::this_thread::sleep_for(5ms);
    REQUIRE(bridge.client_count() == 1);

    Publisher pub(bus, topics::kFollowerJointStates);
    pub.publish(state_msg(0.75), 42);
    beast::flat_buffer buf;
    ws.read(buf);
    const auto j = json::parse(beast::buffers_to_string(buf.data()));
    CHECK(j["topic"] == topics::kFollowerJointStates);
    CHECK(j["payload"]["arms"][0]["position"][0] == 0.75);

    ws.write(asio::buffer(std::string(R"({"type":"leader_set","arm":"left","angles":[0,0.4,0,1.2,0,0.5,0],"gripper":0.1})")));
    ws.write(asio::buffer(std::string("{broken")));
    for (int i = 0; i < 200 && (bridge.setpoints_applied() < 1 || bridge.malformed_count() < 1); ++i) {
      std::this_thread::sleep_for(5ms);
    }
    CHECK(bridge.setpoints_applied() == 1);
    CHECK(bridge.malformed_count() == 1);
    std::lock_guard lock(mu);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].first == 0);
    CHECK(sets[0].second.gripper == 0.1);
    ws.close(beast::websocket::close_code::normal);
  }
}
