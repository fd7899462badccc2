/*
 * Copyright (c) 2026 The Self-Assistant Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Live protocol endpoints. The TCP endpoint carries raw frames; the WebSocket
// endpoint carries one canonical-JSON text message per protocol message.
// All socket work happens on one io thread. The device loop talks to it
// only through drain() (inbound FIFO) and broadcast()/send() (posted).

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "selfassist/json_codec.hpp"
#include "selfassist/protocol.hpp"

namespace selfassist::net
{

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;

class BindError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Endpoint
{
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses HOST:PORT. Port 0 asks the OS for a free port.
inline Endpoint parse_endpoint(const std::string & s)
{
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw std::invalid_argument("expected HOST:PORT, got '" + s + "'");
  }
  const auto port = pmr::detail::parse_int(std::string_view(s).substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) {
    throw std::invalid_argument("bad port in '" + s + "'");
  }
  return {s.substr(0, colon), static_cast<std::uint16_t>(*port)};
}

struct ClientId
{
  enum class Kind : std::uint8_t { tcp, ws };
  Kind kind = Kind::tcp;
  std::uint64_t id = 0;
  friend bool operator==(const ClientId &, const ClientId &) = default;
};

struct Inbound
{
  ClientId client;
  protocol::Message message;
};

class Service
{
public:
  /// Binds the requested endpoints immediately; throws BindError.
  Service(std::optional<Endpoint> tcp_ep, std::optional<Endpoint> ws_ep)
  {
    if (tcp_ep) {
      tcp_acceptor_.emplace(open_acceptor(*tcp_ep));
      tcp_port_ = tcp_acceptor_->local_endpoint().port();
    }
    if (ws_ep) {
      ws_acceptor_.emplace(open_acceptor(*ws_ep));
      ws_port_ = ws_acceptor_->local_endpoint().port();
    }
  }

  Service(const Service &) = delete;
  Service & operator=(const Service &) = delete;

  ~Service() {stop();}

  void start()
  {
    if (tcp_acceptor_) {
      accept_tcp();
    }
    if (ws_acceptor_) {
      accept_ws();
    }
    thread_ = std::thread([this] {ioc_.run();});
  }

  void stop()
  {
    if (stopped_) {
      return;
    }
    stopped_ = true;
    work_.reset();
    asio::post(ioc_, [this] {
        beast::error_code ec;
        if (tcp_acceptor_) {tcp_acceptor_->close(ec);}
        if (ws_acceptor_) {ws_acceptor_->close(ec);}
        for (auto & [id, c] : tcp_clients_) {c->close();}
        for (auto & [id, c] : ws_clients_) {c->close();}
        tcp_clients_.clear();
        ws_clients_.clear();
      });
    if (thread_.joinable()) {
      thread_.join();
    }
    ioc_.stop();
  }

  std::uint16_t tcp_port() const {return tcp_acceptor_ ? tcp_port_ : 0;}
  std::uint16_t ws_port() const {return ws_acceptor_ ? ws_port_ : 0;}

  /// Sends `m` to every connected client.
  void broadcast(const protocol::Message & m)
  {
    auto frame = std::make_shared<const std::vector<std::uint8_t>>(protocol::encode(m));
    auto text = std::make_shared<const std::string>(json::dump(json::to_json(m)));
    asio::post(ioc_, [this, frame, text] {
        for (auto & [id, c] : tcp_clients_) {c->send(frame);}
        for (auto & [id, c] : ws_clients_) {c->send(text);}
      });
  }

  void send(ClientId to, const protocol::Message & m)
  {
    if (to.kind == ClientId::Kind::tcp) {
      auto frame = std::make_shared<const std::vector<std::uint8_t>>(protocol::encode(m));
      asio::post(ioc_, [this, to, frame] {
          if (auto it = tcp_clients_.find(to.id); it != tcp_clients_.end()) {
            it->second->send(frame);
          }
        });
    } else {
      auto text = std::make_shared<const std::string>(json::dump(json::to_json(m)));
      asio::post(ioc_, [this, to, text] {
          if (auto it = ws_clients_.find(to.id); it != ws_clients_.end()) {
            it->second->send(text);
          }
        });
    }
  }

  /// Takes every message received since the last call, in arrival order.
  std::vector<Inbound> drain()
  {
    std::lock_guard lock(inbound_mu_);
    std::vector<Inbound> out;
    out.swap(inbound_);
    return out;
  }

  /// Connected clients (tcp + ws). Thread-safe snapshot.
  std::size_t client_count() const
  {
    std::lock_guard lock(inbound_mu_);
    return connected_;
  }

private:
  class TcpClient : public std::enable_shared_from_this<TcpClient>
  {
  public:
    TcpClient(Service & owner, std::uint64_t id, tcp::socket socket)
    : owner_(owner), id_(id), socket_(std::move(socket)) {}

    void start() {read();}

    void send(std::shared_ptr<const std::vector<std::uint8_t>> frame)
    {
      queue_.push_back(std::move(frame));
      if (queue_.size() == 1) {
        write();
      }
    }

    void close()
    {
      beast::error_code ec;
      socket_.shutdown(tcp::socket::shutdown_both, ec);
      socket_.close(ec);
    }

  private:
    void read()
    {
      socket_.async_read_some(asio::buffer(buf_),
        [self = shared_from_this()](beast::error_code ec, std::size_t n) {
          if (ec) {
            self->owner_.drop_tcp(self->id_);
            return;
          }
          auto out = self->decoder_.push(std::span<const std::uint8_t>(self->buf_.data(), n));
          for (auto & m : out.messages) {
            self->owner_.receive({ClientId::Kind::tcp, self->id_}, std::move(m));
          }
          self->read();
        });
    }

    void write()
    {
      asio::async_write(socket_, asio::buffer(*queue_.front()),
        [self = shared_from_this()](beast::error_code ec, std::size_t) {
          if (ec) {
            self->owner_.drop_tcp(self->id_);
            return;
          }
          self->queue_.pop_front();
          if (!self->queue_.empty()) {
            self->write();
          }
        });
    }

    Service & owner_;
    std::uint64_t id_;
    tcp::socket socket_;
    std::array<std::uint8_t, 4096> buf_{};
    protocol::Decoder decoder_;
    std::deque<std::shared_ptr<const std::vector<std::uint8_t>>> queue_;
  };

  class WsClient : public std::enable_shared_from_this<WsClient>
  {
  public:
    WsClient(Service & owner, std::uint64_t id, tcp::socket socket)
    : owner_(owner), id_(id), ws_(std::move(socket)) {}

    void start()
    {
      ws_.text(true);
      ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
          if (ec) {
            self->owner_.drop_ws(self->id_);
            return;
          }
          self->open_ = true;
          if (!self->queue_.empty()) {
            self->write();
          }
          self->read();
        });
    }

    void send(std::shared_ptr<const std::string> text)
    {
      queue_.push_back(std::move(text));
      if (open_ && queue_.size() == 1) {
        write();
      }
    }

    void close()
    {
      beast::error_code ec;
      beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ec);
      beast::get_lowest_layer(ws_).close(ec);
    }

  private:
    void read()
    {
      ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
          if (ec) {
            self->owner_.drop_ws(self->id_);
            return;
          }
          const auto text = beast::buffers_to_string(self->buf_.data());
          self->buf_.consume(self->buf_.size());
          try {
            self->owner_.receive({ClientId::Kind::ws, self->id_}, json::parse_message(text));
          } catch (const std::exception &) {
            // Malformed client input is dropped; the connection stays up.
          }
          self->read();
        });
    }

    void write()
    {
      ws_.async_write(asio::buffer(*queue_.front()),
        [self = shared_from_this()](beast::error_code ec, std::size_t) {
          if (ec) {
            self->owner_.drop_ws(self->id_);
            return;
          }
          self->queue_.pop_front();
          if (!self->queue_.empty()) {
            self->write();
          }
        });
    }

    Service & owner_;
    std::uint64_t id_;
    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buf_;
    bool open_ = false;
    std::deque<std::shared_ptr<const std::string>> queue_;
  };

  tcp::acceptor open_acceptor(const Endpoint & ep)
  {
    tcp::acceptor acc(ioc_);
    beast::error_code ec;
    const auto addr = asio::ip::make_address(ep.host == "localhost" ? "127.0.0.1" : ep.host, ec);
    if (ec) {
      throw BindError("bad address '" + ep.host + "': " + ec.message());
    }
    const tcp::endpoint endpoint(addr, ep.port);
    acc.open(endpoint.protocol(), ec);
    if (!ec) {acc.set_option(asio::socket_base::reuse_address(true), ec);}
    if (!ec) {acc.bind(endpoint, ec);}
    if (!ec) {acc.listen(asio::socket_base::max_listen_connections, ec);}
    if (ec) {
      throw BindError("cannot bind " + ep.host + ":" + std::to_string(ep.port) + ": " + ec.message());
    }
    return acc;
  }

  void accept_tcp()
  {
    tcp_acceptor_->async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
          return;
        }
        const auto id = next_id_++;
        auto c = std::make_shared<TcpClient>(*this, id, std::move(socket));
        tcp_clients_.emplace(id, c);
        count(+1);
        c->start();
        accept_tcp();
      });
  }

  void accept_ws()
  {
    ws_acceptor_->async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
          return;
        }
        const auto id = next_id_++;
        auto c = std::make_shared<WsClient>(*this, id, std::move(socket));
        ws_clients_.emplace(id, c);
        count(+1);
        c->start();
        accept_ws();
      });
  }

  void drop_tcp(std::uint64_t id)
  {
    if (tcp_clients_.erase(id)) {
      count(-1);
    }
  }

  void drop_ws(std::uint64_t id)
  {
    if (ws_clients_.erase(id)) {
      count(-1);
    }
  }

  void count(int delta)
  {
    std::lock_guard lock(inbound_mu_);
    connected_ = static_cast<std::size_t>(static_cast<long>(connected_) + delta);
  }

  void receive(ClientId from, protocol::Message m)
  {
    // Only client-to-device messages are meaningful inbound.
    if (!std::holds_alternative<protocol::Command>(m) &&
      !std::holds_alternative<protocol::HistoryRequest>(m))
    {
      return;
    }
    std::lock_guard lock(inbound_mu_);
    inbound_.push_back({from, std::move(m)});
  }

  asio::io_context ioc_;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work_{
    asio::make_work_guard(ioc_)};
  std::optional<tcp::acceptor> tcp_acceptor_;
  std::optional<tcp::acceptor> ws_acceptor_;
  std::uint16_t tcp_port_ = 0;
  std::uint16_t ws_port_ = 0;
  std::thread thread_;
  bool stopped_ = false;

  // io thread only
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::shared_ptr<TcpClient>> tcp_clients_;
  std::map<std::uint64_t, std::shared_ptr<WsClient>> ws_clients_;

  mutable std::mutex inbound_mu_;
  std::vector<Inbound> inbound_;
  std::size_t connected_ = 0;
};

}  // namespace selfassist::net
