#pragma once

#include "ait/service/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace ait::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

/// What the network side hands to the control loop.
struct Inbound {
  enum class Kind { connect, disconnect, message } kind = Kind::message;
  ClientId client = 0;
  std::string text;
};

class Inbox {
 public:
  void push(Inbound m) {
    const std::lock_guard lock(mutex_);
    items_.push_back(std::move(m));
  }
  std::vector<Inbound> drain() {
    const std::lock_guard lock(mutex_);
    std::vector<Inbound> out;
    out.swap(items_);
    return out;
  }

 private:
  std::mutex mutex_;
  std::vector<Inbound> items_;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  static constexpr std::size_t kMaxQueued = 256;

  Connection(tcp::socket socket, ClientId id, Inbox& inbox, std::function<void(ClientId)> on_close)
      : ws_(std::move(socket)), id_(id), inbox_(inbox), on_close_(std::move(on_close)) {}

  ClientId id() const { return id_; }

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->open_ = true;
      self->inbox_.push({Inbound::Kind::connect, self->id_, {}});
      self->read();
    });
  }

  /// Queues a frame; must run on the connection's executor. A slow reader loses
  /// frames rather than stalling the loop.
  void send(std::shared_ptr<const std::string> text) {
    if (!open_ || closed_) return;
    if (queue_.size() >= kMaxQueued) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->inbox_.push({Inbound::Kind::message, self->id_, beast::buffers_to_string(self->buffer_.data())});
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    inbox_.push({Inbound::Kind::disconnect, id_, {}});
    on_close_(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  ClientId id_;
  Inbox& inbox_;
  std::function<void(ClientId)> on_close_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
  bool closed_ = false;
};

/// WebSocket endpoint around a LiveSession. Networking runs on its own thread;
/// run() executes the fixed-rate control loop on the calling thread.
class Server {
 public:
  Server(LiveSession& session, unsigned short port, const std::string& address = "0.0.0.0")
      : session_(session), acceptor_(ioc_, tcp::endpoint(asio::ip::make_address(address), port)) {}

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Runs until stop(). `period` defaults to the scenario's control period.
  void run(std::optional<std::chrono::nanoseconds> period = std::nullopt) {
    accept();
    net_ = std::thread([this] { ioc_.run(); });
    const auto dt = period.value_or(std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::duration<double>(session_.simulation().scenario().dt())));
    auto next = std::chrono::steady_clock::now();
    while (!stopping_) {
      std::vector<Outgoing> out;
      for (auto& m : inbox_.drain()) {
        switch (m.kind) {
          case Inbound::Kind::connect:
            members_.push_back(m.client);
            out.push_back(session_.connect(m.client));
            break;
          case Inbound::Kind::disconnect:
            std::erase(members_, m.client);
            for (auto& o : session_.disconnect(m.client)) out.push_back(std::move(o));
            break;
          case Inbound::Kind::message:
            for (auto& o : session_.receive(m.client, m.text)) out.push_back(std::move(o));
            break;
        }
      }
      for (auto& o : session_.tick()) out.push_back(std::move(o));
      dispatch(std::move(out));
      next += dt;
      const auto now = std::chrono::steady_clock::now();
      if (next < now) next = now;  // overrun: skip, do not burst
      std::this_thread::sleep_until(next);
    }
  }

  /// Safe from any thread.
  void stop() {
    if (stopping_.exchange(true)) return;
    asio::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      ioc_.stop();
    });
    if (net_.joinable()) net_.join();
  }

 private:
  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      const ClientId id = next_id_++;
      auto conn = std::make_shared<Connection>(std::move(socket), id, inbox_, [this](ClientId gone) { connections_.erase(gone); });
      connections_.emplace(id, conn);
      conn->start();
      accept();
    });
  }

  // Broadcasts go to clients the session has welcomed, so a hello always
  // precedes the first state a client sees.
  void dispatch(std::vector<Outgoing> out) {
    if (out.empty()) return;
    asio::post(ioc_, [this, out = std::move(out), members = members_] {
      auto deliver = [&](ClientId id, const std::shared_ptr<const std::string>& text) {
        if (auto it = connections_.find(id); it != connections_.end()) it->second->send(text);
      };
      for (const auto& o : out) {
        auto text = std::make_shared<const std::string>(o.text);
        if (o.to) {
          deliver(*o.to, text);
        } else {
          for (ClientId id : members) deliver(id, text);
        }
      }
    });
  }

  LiveSession& session_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::thread net_;
  std::atomic<bool> stopping_{false};
  Inbox inbox_;
  std::unordered_map<ClientId, std::shared_ptr<Connection>> connections_;  // io thread only
  ClientId next_id_ = 1;
  std::vector<ClientId> members_;  // loop thread only
};

}  // namespace ait::service
