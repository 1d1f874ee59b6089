#pragma once
// TCP host for a ServingApp. The host is untrusted infrastructure: it moves
// frames between sockets and the enclave app's entry points and never sees
// anything but handshake bytes and sealed records. Denials surface as ERROR
// frames whose payload is the deny name — a closed vocabulary, never detail.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "chiron/app.hpp"
#include "chiron/bytes.hpp"
#include "chiron/frame.hpp"
#include "chiron/tcp.hpp"

namespace chiron::service {

class Server {
 public:
  Server(app::ServingApp& app, const std::string& host, uint16_t port)
      : app_(app), listener_(host, port) {}

  ~Server() { stop(); }

  uint16_t port() const { return listener_.port(); }

  // Accepts until stop(); one thread per connection.
  void run() {
    while (true) {
      net::TcpStream stream = listener_.accept();
      if (!stream.valid()) break;
      const uint64_t sid = next_session_id_.fetch_add(1);
      std::lock_guard lk(mu_);
      workers_.emplace_back(
          [this, sid, s = std::move(stream)]() mutable { serve(std::move(s), sid); });
    }
    std::vector<std::thread> done;
    {
      std::lock_guard lk(mu_);
      done.swap(workers_);
    }
    for (auto& t : done) {
      if (t.joinable()) t.join();
    }
  }

  void start() {
    accept_thread_ = std::thread([this] { run(); });
  }

  void stop() {
    stopping_.store(true);
    listener_.close();
    {
      // Kick connection threads out of their blocking reads.
      std::lock_guard lk(mu_);
      for (auto* s : live_) s->shutdown_rw();
    }
    if (accept_thread_.joinable()) accept_thread_.join();
  }

 private:
  void serve(net::TcpStream stream, uint64_t sid) {
    {
      std::lock_guard lk(mu_);
      live_.push_back(&stream);
    }
    // A stop() racing with registration may have swept live_ already.
    if (stopping_.load()) stream.shutdown_rw();
    FrameDecoder decoder;
    bool attested = false;
    try {
      while (true) {
        Bytes chunk = stream.read_some();
        if (chunk.empty()) break;  // peer closed
        decoder.feed(chunk);
        bool open = true;
        while (auto next = decoder.next()) {
          if (!next->ok()) {
            send_error(stream, frame_reject_name(next->error()));
            open = false;  // framing is latched dead
            break;
          }
          Frame frame = std::move(next->value());
          if (!handle(stream, sid, attested, frame)) {
            open = false;
            break;
          }
        }
        if (!open) break;
      }
    } catch (const Error&) {
      // connection-level failure; nothing to salvage
    }
    std::lock_guard lk(mu_);
    live_.erase(std::remove(live_.begin(), live_.end(), &stream), live_.end());
  }

  // Returns false when the connection must close.
  bool handle(net::TcpStream& stream, uint64_t sid, bool& attested, const Frame& frame) {
    const auto type = static_cast<MsgType>(frame.msg_type);
    if (type == MsgType::ATTEST_REQ) {
      if (attested) return deny(stream, ServiceDeny::PROTOCOL_VIOLATION);
      auto resp = app_.open_session(sid, frame.payload);
      if (!resp.ok()) return deny(stream, resp.error());
      attested = true;
      stream.write_all(encode_frame(MsgType::ATTEST_RESP, resp.value()));
      return true;
    }
    if (!attested) return deny(stream, ServiceDeny::PROTOCOL_VIOLATION);
    auto result = app_.handle_frame(sid, type, frame.payload);
    if (!result.ok()) return deny(stream, result.error());
    stream.write_all(encode_frame(result.value().reply_type, result.value().payload));
    return true;
  }

  bool deny(net::TcpStream& stream, ServiceDeny d) {
    send_error(stream, service_deny_name(d));
    return deny_keeps_connection(d);
  }

  static void send_error(net::TcpStream& stream, std::string_view name) {
    stream.write_all(encode_frame(MsgType::ERROR, to_bytes(name)));
  }

  app::ServingApp& app_;
  net::TcpListener listener_;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<uint64_t> next_session_id_{1};
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<net::TcpStream*> live_;
};

}  // namespace chiron::service
