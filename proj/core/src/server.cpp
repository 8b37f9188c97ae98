#include "safekernel/server.hpp"

#include <chrono>
#include <csignal>
#include <deque>
#include <fstream>
#include <utility>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "safekernel/errors.hpp"
#include "safekernel/io.hpp"

namespace safekernel {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::string id, const ServerConfig& config)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        period_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(config.session.dt))),
        log_(config.log_dir / (id + ".jsonl"), std::ios::app),
        session_(id, config.session, [this](const InterventionRecord& rec) {
          append_record(log_, rec);
          log_.flush();
        }) {}

  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->send(self->session_.state_frame());
      self->read();
      self->next_tick_ = std::chrono::steady_clock::now() + self->period_;
      self->schedule();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      for (auto& reply : self->session_.handle_text(text)) self->send(reply);
      self->read();
    });
  }

  void schedule() {
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      for (auto& msg : self->session_.tick()) self->send(msg);
      self->next_tick_ += self->period_;
      self->schedule();
    });
  }

  void send(const nlohmann::json& message) {
    if (closed_) return;
    outbox_.push_back(message.dump());
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  void close() {
    closed_ = true;
    timer_.cancel();
  }

  websocket::stream<tcp::socket> ws_;
  asio::steady_timer timer_;
  std::chrono::steady_clock::duration period_;
  std::chrono::steady_clock::time_point next_tick_;
  std::ofstream log_;
  Session session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  explicit Impl(ServerConfig cfg) : config(std::move(cfg)), acceptor(ioc) {
    beast::error_code ec;
    const tcp::endpoint endpoint(asio::ip::make_address(config.address, ec), config.port);
    if (ec) throw Error(ErrorKind::invalid_argument, "bad address '" + config.address + "'");
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      throw Error(ErrorKind::io, "cannot listen on " + config.address + ":" + std::to_string(config.port) +
                                     ": " + ec.message());
    }
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), "session-" + std::to_string(++counter), config)->start();
      accept();
    });
  }

  ServerConfig config;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  long counter = 0;
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->accept();
  asio::signal_set signals(impl_->ioc);
  if (impl_->config.stop_on_signal) {
    signals.add(SIGINT);
    signals.add(SIGTERM);
    signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) impl_->ioc.stop();
    });
  }
  impl_->ioc.run();
}

void Server::stop() { impl_->ioc.stop(); }

}  // namespace safekernel
