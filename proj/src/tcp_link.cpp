#include "tbag/tcp_link.hpp"

#include <deque>
#include <functional>
#include <set>
#include <thread>

#include <boost/asio.hpp>

#include "tbag/wire.hpp"

namespace tbag {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

constexpr std::size_t kForwardQueue = 8192;
constexpr std::size_t kMaxPendingWrites = 8192;
constexpr auto kPumpPeriod = std::chrono::milliseconds(1);

struct Counters {
  std::atomic<std::uint64_t> sent{0};
  std::atomic<std::uint64_t> received{0};
  std::atomic<std::uint64_t> decode_errors{0};
  std::atomic<std::uint64_t> overflows{0};
  std::atomic<std::uint64_t> connections{0};

  LinkStats snapshot() const {
    return {sent.load(), received.load(), decode_errors.load(), overflows.load(), connections.load()};
  }
};

// One TCP peer. All socket work happens on the owning io_context thread.
class Peer : public std::enable_shared_from_this<Peer> {
 public:
  Peer(tcp::socket socket, Bus& bus, Counters& counters, std::function<void(Peer*)> on_close)
      : socket_(std::move(socket)),
        pump_timer_(socket_.get_executor()),
        bus_(bus),
        counters_(counters),
        on_close_(std::move(on_close)) {}

  void start() {
    boost::system::error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
    origin_ = bus_.allocate_origin();
    sub_ = bus_.subscribe_all(kForwardQueue, origin_);
    read_prefix();
    pump();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
    pump_timer_.cancel();
    sub_.close();
    if (on_close_) on_close_(this);
  }

 private:
  void read_prefix() {
    head_.resize(wire::kPrefixSize);
    asio::async_read(socket_, asio::buffer(head_),
                     [self = shared_from_this()](auto ec, std::size_t) {
                       if (ec) return self->close();
                       try {
                         wire::check_prefix(self->head_);
                       } catch (const wire::DecodeFailure&) {
                         ++self->counters_.decode_errors;
                         return self->close();
                       }
                       self->read_header_rest();
                     });
  }

  void read_header_rest() {
    const std::size_t topic_len = head_[wire::kPrefixSize - 1];
    head_.resize(wire::kHeaderSize + topic_len);
    asio::async_read(socket_,
                     asio::buffer(head_.data() + wire::kPrefixSize,
                                  head_.size() - wire::kPrefixSize),
                     [self = shared_from_this()](auto ec, std::size_t) {
                       if (ec) return self->close();
                       self->read_body();
                     });
  }

  void read_body() {
    std::size_t total = 0;
    try {
      total = wire::frame_length(head_);
    } catch (const wire::DecodeFailure&) {
      ++counters_.decode_errors;
      return close();  // the stream cannot be resynchronized
    }
    const std::size_t header = head_.size();
    head_.resize(total);
    asio::async_read(socket_, asio::buffer(head_.data() + header, total - header),
                     [self = shared_from_this()](auto ec, std::size_t) {
                       if (ec) return self->close();
                       self->deliver();
                     });
  }

  void deliver() {
    try {
      const BusMessage msg = wire::decode_frame(head_);
      ++counters_.received;
      bus_.publish(msg, origin_);
    } catch (const wire::DecodeFailure&) {
      ++counters_.decode_errors;
      return close();
    }
    read_prefix();
  }

  void pump() {
    if (closed_) return;
    for (auto& msg : sub_.drain()) {
      if (pending_.size() >= kMaxPendingWrites) {
        pending_.pop_front();
        ++counters_.overflows;
      }
      pending_.push_back(wire::encode_frame(msg));
    }
    if (!writing_) write_next();
    pump_timer_.expires_after(kPumpPeriod);
    pump_timer_.async_wait([self = shared_from_this()](auto ec) {
      if (!ec) self->pump();
    });
  }

  void write_next() {
    if (pending_.empty() || closed_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    asio::async_write(socket_, asio::buffer(pending_.front()),
                      [self = shared_from_this()](auto ec, std::size_t) {
                        if (ec) return self->close();
                        self->pending_.pop_front();
                        ++self->counters_.sent;
                        self->write_next();
                      });
  }

  tcp::socket socket_;
  asio::steady_timer pump_timer_;
  Bus& bus_;
  Counters& counters_;
  std::function<void(Peer*)> on_close_;
  OriginId origin_ = kLocalOrigin;
  Subscription sub_;
  std::vector<std::uint8_t> head_;
  std::deque<std::vector<std::uint8_t>> pending_;
  bool writing_ = false;
  bool closed_ = false;
};

tcp::endpoint resolve_endpoint(asio::io_context& io, const std::string& host, std::uint16_t port) {
  tcp::resolver resolver(io);
  return *resolver.resolve(host, std::to_string(port)).begin();
}

}  // namespace

struct BusServer::Impl {
  Bus& bus;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::set<std::shared_ptr<Peer>> peers;
  std::atomic<std::size_t> peer_count{0};
  Counters counters;
  std::thread thread;
  std::atomic<bool> stopped{false};

  explicit Impl(Bus& b) : bus(b) {}

  void accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto peer = std::make_shared<Peer>(std::move(socket), bus, counters, [this](Peer* p) {
        for (auto it = peers.begin(); it != peers.end(); ++it) {
          if (it->get() == p) {
            peers.erase(it);
            break;
          }
        }
        peer_count = peers.size();
      });
      peers.insert(peer);
      peer_count = peers.size();
      ++counters.connections;
      peer->start();
      accept();
    });
  }

  void close_peers() {
    auto copy = peers;
    for (auto& p : copy) p->close();
  }
};

BusServer::BusServer(Bus& bus, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>(bus)) {
  const auto endpoint = resolve_endpoint(impl_->io, host, port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

BusServer::~BusServer() { stop(); }

std::uint16_t BusServer::port() const { return impl_->acceptor.local_endpoint().port(); }
std::size_t BusServer::peer_count() const { return impl_->peer_count.load(); }
LinkStats BusServer::stats() const { return impl_->counters.snapshot(); }

void BusServer::drop_peers() {
  asio::post(impl_->io, [this] { impl_->close_peers(); });
}

void BusServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  asio::post(impl_->io, [this] {
    boost::system::error_code ec;
    impl_->acceptor.close(ec);
    impl_->close_peers();
    impl_->io.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

struct BusClient::Impl {
  Bus& bus;
  std::string host;
  std::uint16_t port;
  ClientOptions options;
  asio::io_context io;
  asio::steady_timer retry{io};
  std::shared_ptr<Peer> peer;
  Counters counters;
  std::atomic<bool> connected{false};
  std::atomic<bool> stopping{false};
  std::thread thread;

  Impl(Bus& b, std::string h, std::uint16_t p, ClientOptions o)
      : bus(b), host(std::move(h)), port(p), options(o) {}

  void connect() {
    if (stopping) return;
    auto socket = std::make_shared<tcp::socket>(io);
    tcp::endpoint endpoint;
    try {
      endpoint = resolve_endpoint(io, host, port);
    } catch (const std::exception&) {
      return schedule_retry();
    }
    socket->async_connect(endpoint, [this, socket](boost::system::error_code ec) {
      if (ec) return schedule_retry();
      peer = std::make_shared<Peer>(std::move(*socket), bus, counters, [this](Peer*) {
        connected = false;
        peer.reset();
        if (options.reconnect) schedule_retry();
      });
      ++counters.connections;
      peer->start();
      connected = true;
    });
  }

  void schedule_retry() {
    if (stopping) return;
    retry.expires_after(options.reconnect_delay);
    retry.async_wait([this](auto ec) {
      if (!ec) connect();
    });
  }
};

BusClient::BusClient(Bus& bus, const std::string& host, std::uint16_t port, ClientOptions options)
    : impl_(std::make_unique<Impl>(bus, host, port, options)) {
  asio::post(impl_->io, [this] { impl_->connect(); });
  impl_->thread = std::thread([this] {
    auto guard = asio::make_work_guard(impl_->io);
    impl_->io.run();
  });
}

BusClient::~BusClient() { stop(); }

bool BusClient::connected() const { return impl_->connected.load(); }

bool BusClient::wait_connected(std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!connected()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return true;
}

LinkStats BusClient::stats() const { return impl_->counters.snapshot(); }

void BusClient::drop_connection() {
  asio::post(impl_->io, [this] {
    if (auto p = impl_->peer) p->close();
  });
}

void BusClient::stop() {
  if (impl_->stopping.exchange(true)) return;
  asio::post(impl_->io, [this] {
    impl_->retry.cancel();
    if (auto p = impl_->peer) p->close();
    impl_->io.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tbag
