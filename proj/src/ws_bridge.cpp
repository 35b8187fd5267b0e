#include "tbag/ws_bridge.hpp"

#include <deque>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include <openssl/evp.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"
#include "tbag/session.hpp"

namespace tbag::ws {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

CameraFrame thumbnail(const CameraFrame& frame, std::uint16_t max_width) {
  const std::uint16_t stride =
      frame.width <= max_width ? 1 : static_cast<std::uint16_t>((frame.width + max_width - 1) / max_width);
  CameraFrame out = frame;
  out.width = static_cast<std::uint16_t>((frame.width + stride - 1) / stride);
  out.height = static_cast<std::uint16_t>((frame.height + stride - 1) / stride);
  out.pixels.assign(std::size_t{out.width} * out.height * 3, 0);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t src = ((y * stride) * frame.width + x * stride) * 3;
      const std::size_t dst = (y * out.width + x) * 3;
      if (src + 2 < frame.pixels.size()) {
        std::copy_n(frame.pixels.begin() + static_cast<std::ptrdiff_t>(src), 3,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>(dst));
      }
    }
  }
  return out;
}

bool ThumbnailThrottle::admit(std::uint8_t camera_id, Stamp stamp) {
  auto& last = last_[camera_id];
  if (last && stamp < *last + kThumbnailPeriod) return false;
  last = stamp;
  return true;
}

namespace {

json arm_json(const ArmJointState& s) {
  return {{"position", s.position}, {"velocity", s.velocity}, {"effort", s.effort}, {"gripper", s.gripper}};
}

json joints_json(const JointVector& q) { return {{"angles", q.angles}, {"gripper", q.gripper}}; }

const char* cause_name(FeedbackCause c) {
  switch (c) {
    case FeedbackCause::None: return "None";
    case FeedbackCause::Collision: return "Collision";
    case FeedbackCause::JointLimit: return "JointLimit";
    case FeedbackCause::TrackingLag: return "TrackingLag";
  }
  return "Unknown";
}

const char* event_name(SessionEventCode c) {
  switch (c) {
    case SessionEventCode::EpisodeStart: return "EpisodeStart";
    case SessionEventCode::EpisodeStop: return "EpisodeStop";
    case SessionEventCode::StateChanged: return "StateChanged";
  }
  return "Unknown";
}

}  // namespace

std::optional<std::string> encode_server_message(const BusMessage& msg, ThumbnailThrottle& throttle) {
  json payload;
  bool skip = false;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, JointStateMsg>) {
          payload = {{"type", "joint_state"}, {"arms", json::array()}};
          for (const auto& a : p.arms) payload["arms"].push_back(arm_json(a));
        } else if constexpr (std::is_same_v<T, JointCommandMsg>) {
          payload = {{"type", "joint_command"}, {"arms", json::array()}};
          for (const auto& a : p.arms) payload["arms"].push_back(joints_json(a));
        } else if constexpr (std::is_same_v<T, FeedbackSignal>) {
          payload = {{"type", "feedback"},
                     {"cause", cause_name(p.cause)},
                     {"magnitude", {{"left", p.magnitude.left}, {"right", p.magnitude.right}}}};
        } else if constexpr (std::is_same_v<T, CameraFrame>) {
          if (!throttle.admit(p.camera_id, msg.stamp)) {
            skip = true;
            return;
          }
          const CameraFrame thumb = thumbnail(p);
          payload = {{"type", "camera_frame"},   {"camera_id", p.camera_id},
                     {"frame_index", p.frame_index}, {"width", p.width},
                     {"height", p.height},           {"thumbnail_width", thumb.width},
                     {"thumbnail_height", thumb.height}, {"rgb_base64", base64_encode(thumb.pixels)}};
        } else {
          payload = {{"type", "session_event"}, {"event", event_name(p.code)}};
          if (p.arg) payload["arg"] = *p.arg;
          if (p.code == SessionEventCode::StateChanged && p.arg && *p.arg <= 6) {
            payload["state"] = std::string(to_string(static_cast<SessionStateCode>(*p.arg)));
          }
        }
      },
      msg.payload);
  if (skip) return std::nullopt;
  const json out = {{"topic", msg.topic}, {"stamp", msg.stamp}, {"seq", msg.seq}, {"payload", payload}};
  return out.dump();
}

std::variant<LeaderSet, MalformedFrame> decode_client_message(std::string_view text,
                                                              const ArmPair<ArmModel>& leaders) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return MalformedFrame{"not a JSON object"};
  if (!j.contains("type") || j["type"] != "leader_set") return MalformedFrame{"unknown type"};

  LeaderSet out;
  const auto& arm = j.value("arm", json());
  if (arm == "left" || arm == 0) {
    out.arm = 0;
  } else if (arm == "right" || arm == 1) {
    out.arm = 1;
  } else {
    return MalformedFrame{"arm must be 0, 1, \"left\" or \"right\""};
  }
  const auto& angles = j.value("angles", json());
  if (!angles.is_array() || angles.size() != kArmJoints) return MalformedFrame{"angles must have 7 numbers"};
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    if (!angles[i].is_number()) return MalformedFrame{"angles must have 7 numbers"};
    out.q.angles[i] = angles[i].get<double>();
  }
  const auto& gripper = j.value("gripper", json());
  if (!gripper.is_number()) return MalformedFrame{"gripper must be a number"};
  out.q.gripper = gripper.get<double>();
  if (!out.q.finite()) return MalformedFrame{"non-finite value"};
  out.q = clamp_to_limits(leaders[out.arm], out.q);
  return out;
}

}  // namespace tbag::ws

namespace tbag {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using asio::ip::tcp;

namespace {

constexpr std::size_t kClientQueue = 4096;
constexpr std::size_t kMaxPendingText = 1024;
constexpr auto kPumpPeriod = std::chrono::milliseconds(2);

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>tbag bridge</title></head>
<body><p>tbag websocket bridge. Connect a console to this port with a websocket.</p></body></html>
)";

}  // namespace

struct WsBridge::Impl {
  Bus& bus;
  ArmPair<ArmModel> leaders;
  LeaderSink sink;
  BridgeOptions options;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;
  std::atomic<std::size_t> clients{0};
  std::atomic<std::uint64_t> malformed{0};
  std::atomic<std::uint64_t> applied{0};
  std::atomic<bool> stopped{false};
  std::vector<std::weak_ptr<void>> sessions;

  Impl(Bus& b, ArmPair<ArmModel> l, LeaderSink s, BridgeOptions o)
      : bus(b), leaders(std::move(l)), sink(std::move(s)), options(std::move(o)) {}

  void handle_text(const std::string& text) {
    auto decoded = ws::decode_client_message(text, leaders);
    if (std::holds_alternative<ws::MalformedFrame>(decoded)) {
      ++malformed;
      return;
    }
    const auto& set = std::get<ws::LeaderSet>(decoded);
    if (sink) sink(set.arm, set.q);
    ++applied;
  }

  std::string page() const {
    if (!options.static_root.empty()) {
      std::ifstream in(options.static_root / "index.html", std::ios::binary);
      if (in) return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    return kPlaceholderPage;
  }

  void accept();
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, WsBridge::Impl& bridge)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), bridge_(bridge) {}

  void run(http::request<http::string_body> req) {
    sub_ = bridge_.bus.subscribe_all(kClientQueue);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      ++self->bridge_.clients;
      self->counted_ = true;
      self->read();
      self->pump();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (counted_) --bridge_.clients;
    timer_.cancel();
    sub_.close();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      if (self->ws_.got_text()) {
        self->bridge_.handle_text(beast::buffers_to_string(self->buffer_.data()));
      } else {
        ++self->bridge_.malformed;
      }
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void pump() {
    if (closed_) return;
    for (const auto& msg : sub_.drain()) {
      if (auto text = ws::encode_server_message(msg, throttle_)) {
        if (pending_.size() >= kMaxPendingText) pending_.pop_front();
        pending_.push_back(std::move(*text));
      }
    }
    if (!writing_) write_next();
    timer_.expires_after(kPumpPeriod);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->pump();
    });
  }

  void write_next() {
    if (pending_.empty() || closed_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(pending_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->close();
                      self->pending_.pop_front();
                      self->write_next();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  WsBridge::Impl& bridge_;
  Subscription sub_;
  beast::flat_buffer buffer_;
  ws::ThumbnailThrottle throttle_;
  std::deque<std::string> pending_;
  bool writing_ = false;
  bool closed_ = false;
  bool counted_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, WsBridge::Impl& bridge)
      : stream_(std::move(socket)), bridge_(bridge) {}

  void run() {
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

 private:
  void dispatch() {
    if (websocket::is_upgrade(req_)) {
      auto session = std::make_shared<WsSession>(stream_.release_socket(), bridge_);
      std::erase_if(bridge_.sessions, [](const auto& w) { return w.expired(); });
      bridge_.sessions.push_back(session);
      session->run(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(http::status::ok, req_.version());
    res->set(http::field::content_type, "text/html");
    res->body() = bridge_.page();
    res->keep_alive(false);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  beast::tcp_stream stream_;
  WsBridge::Impl& bridge_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

void WsBridge::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), *this)->run();
    accept();
  });
}

WsBridge::WsBridge(Bus& bus, ArmPair<ArmModel> leaders, LeaderSink on_leader_set, BridgeOptions options)
    : impl_(std::make_unique<Impl>(bus, std::move(leaders), std::move(on_leader_set), std::move(options))) {
  tcp::resolver resolver(impl_->io);
  const tcp::endpoint endpoint =
      *resolver.resolve(impl_->options.host, std::to_string(impl_->options.port)).begin();
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

WsBridge::~WsBridge() { stop(); }

std::uint16_t WsBridge::port() const { return impl_->acceptor.local_endpoint().port(); }
std::size_t WsBridge::client_count() const { return impl_->clients.load(); }
std::uint64_t WsBridge::malformed_count() const { return impl_->malformed.load(); }
std::uint64_t WsBridge::setpoints_applied() const { return impl_->applied.load(); }

void WsBridge::stop() {
  if (impl_->stopped.exchange(true)) return;
  asio::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (auto& w : impl_->sessions) {
      if (auto s = w.lock()) std::static_pointer_cast<WsSession>(s)->close();
    }
    impl_->sessions.clear();
    impl_->io.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tbag
