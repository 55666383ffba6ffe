#include "putty/session/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <mutex>

namespace putty {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session& session)
      : ws_(std::move(socket)), session_(session) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 << 20);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->id_ = self->session_.connect();
      self->box_ = self->session_.outbox(self->id_);
      std::weak_ptr<Connection> weak = self;
      self->box_->set_notify([weak] {
        if (auto c = weak.lock()) asio::post(c->ws_.get_executor(), [c] { c->pump(); });
      });
      self->read();
    });
  }

 private:
  void read() {
    // the socket was accepted on a strand, so handlers are serialized
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                     if (ec) {
                       self->session_.disconnect(self->id_);
                       self->box_->set_notify({});
                       return;
                     }
                     if (self->ws_.got_text())
                       self->session_.receive(self->id_, beast::buffers_to_string(self->buffer_.data()));
                     else
                       self->session_.receive_binary(self->id_);
                     self->buffer_.consume(self->buffer_.size());
                     self->read();
                   });
  }

  void pump() {
    if (writing_ || closing_) return;
    if (box_->closed()) {
      closing_ = true;
      ws_.async_close(websocket::close_code::policy_error, [self = shared_from_this()](beast::error_code) {});
      return;
    }
    auto item = box_->pop();
    if (!item) return;
    writing_ = true;
    current_ = std::move(*item);
    ws_.binary(current_.binary);
    auto done = [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return;
      self->pump();
    };
    if (current_.binary)
      ws_.async_write(asio::buffer(*current_.bytes), std::move(done));
    else
      ws_.async_write(asio::buffer(current_.text), std::move(done));
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session& session_;
  Session::ClientId id_ = 0;
  std::shared_ptr<Outbox> box_;
  beast::flat_buffer buffer_;
  Outbox::Item current_;
  bool writing_ = false;
  bool closing_ = false;
};

}  // namespace

struct SessionServer::Impl {
  Session& session;
  asio::io_context io{1};
  tcp::acceptor acceptor;
  std::thread io_thread;
  std::thread frame_thread;
  std::atomic<bool> stopping{false};
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;

  Impl(Session& s, std::uint16_t port, const std::string& address)
      : session(s), acceptor(io, tcp::endpoint(asio::ip::make_address(address), port)) {}

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), session)->start();
      accept();
    });
  }

  void frame_loop() {
    using Clock = std::chrono::steady_clock;
    auto next = Clock::now();
    while (!stopping) {
      if (session.lockstep()) {
        session.wait_for_input(std::chrono::milliseconds(20));
        session.tick();
        next = Clock::now();
        continue;
      }
      session.tick();
      next += std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(session.simulator().config().frame_interval));
      const auto now = Clock::now();
      if (next < now) next = now;  // behind: do not try to catch up
      std::this_thread::sleep_until(next);
    }
  }
};

SessionServer::SessionServer(Session& session, std::uint16_t port, const std::string& address)
    : impl_(std::make_unique<Impl>(session, port, address)) {}

SessionServer::~SessionServer() { stop(); }

std::uint16_t SessionServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::start() {
  impl_->accept();
  impl_->io_thread = std::thread([this] { impl_->io.run(); });
  impl_->frame_thread = std::thread([this] { impl_->frame_loop(); });
}

void SessionServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  asio::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  if (impl_->frame_thread.joinable()) impl_->frame_thread.join();
  impl_->io.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

void SessionServer::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

// ---------------------------------------------------------------------------
// Client

struct SessionClient::Impl {
  asio::io_context io;
  websocket::stream<tcp::socket> ws{io};
};

SessionClient::SessionClient(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->io);
  const auto results = resolver.resolve(host, std::to_string(port));
  asio::connect(impl_->ws.next_layer(), results.begin(), results.end());
  impl_->ws.read_message_max(256 << 20);
  impl_->ws.handshake(host, "/");
}

SessionClient::~SessionClient() {
  try {
    close();
  } catch (...) {
  }
}

std::uint64_t SessionClient::send(protocol::ClientPayload payload) {
  const protocol::ClientMessage m{next_id_++, std::move(payload)};
  send_raw(protocol::to_json(m).dump());
  return m.id;
}

void SessionClient::send_raw(const std::string& text) {
  impl_->ws.text(true);
  impl_->ws.write(asio::buffer(text));
}

void SessionClient::send_binary(const std::vector<std::uint8_t>& bytes) {
  impl_->ws.binary(true);
  impl_->ws.write(asio::buffer(bytes));
}

SessionClient::Incoming SessionClient::read() {
  beast::flat_buffer buffer;
  impl_->ws.read(buffer);
  if (impl_->ws.got_text())
    return protocol::server_message_from_json(nlohmann::json::parse(beast::buffers_to_string(buffer.data())));
  const auto* data = static_cast<const std::uint8_t*>(buffer.data().data());
  return protocol::decode_mesh_frame(std::span(data, buffer.size()));
}

protocol::ServerMessage SessionClient::await_reply(std::uint64_t id) {
  for (;;) {
    auto in = read();
    if (auto* mesh = std::get_if<protocol::MeshFrame>(&in)) {
      last_mesh_ = std::move(*mesh);
      continue;
    }
    auto& msg = std::get<protocol::ServerMessage>(in);
    if (msg.reply_to != id) continue;
    if (const auto* e = std::get_if<protocol::ErrorMessage>(&msg.payload))
      throw Error("server error " + e->code + ": " + e->message);
    return msg;
  }
}

void SessionClient::close() {
  if (!impl_->ws.is_open()) return;
  beast::error_code ec;
  impl_->ws.close(websocket::close_code::normal, ec);
}

protocol::MeshFrame wire_replay(SessionClient& client, const Trajectory& trajectory, int frames, Real frame_interval) {
  std::size_t cursor = 0;
  for (int f = 0; f < frames; ++f) {
    const Real input_time = f * frame_interval;
    for (; cursor < trajectory.samples.size() && trajectory.samples[cursor].time <= input_time + 1e-9; ++cursor) {
      const auto& s = trajectory.samples[cursor];
      for (int h = 0; h < 2; ++h)
        if (s.hands[h]) client.await_reply(client.send(protocol::PoseUpdate{static_cast<Hand>(h), s.time, *s.hands[h]}));
      for (const auto& e : s.events) {
        std::uint64_t id;
        if (const auto* op = std::get_if<EditOp>(&e)) id = client.send(protocol::Edit{*op});
        else if (const auto* m = std::get_if<MaterialChange>(&e)) id = client.send(protocol::MaterialUpdate{m->object, m->params});
        else id = client.send(protocol::Gesture{e});
        client.await_reply(id);
      }
    }
    client.await_reply(client.send(protocol::Step{1}));
  }
  if (!client.last_mesh()) throw Error("wire replay: no mesh frame received");
  return *client.last_mesh();
}

}  // namespace putty
