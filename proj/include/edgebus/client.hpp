/*
 * Copyright (c) 2026, the edgebus authors
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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "edgebus/net.hpp"
#include "edgebus/wire.hpp"

namespace edgebus::client {

struct Message {
  std::string topic;
  std::string payload;
  bool operator==(const Message&) const = default;
};

/**
 * Blocking pub/sub client over the broker wire protocol. A reader
 * thread demultiplexes inbound frames: Publish frames land in a
 * receive queue, acks wake the pending control call. One control
 * operation (subscribe/ping) may be outstanding at a time; publish is
 * fire-and-forget.
 */
class Client {
 public:
  Client() = default;
  ~Client() { close(); }
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void connect(const std::string& host, std::uint16_t port,
               const std::string& client_id, int timeout_ms = 5000) {
    sock_ = net::TcpSocket::connect_to(host, port, timeout_ms);
    if (!sock_.send_frame(wire::Frame::connect(client_id)))
      throw Error("connect: handshake send failed");
    auto ack = sock_.recv_frame();
    if (!ack || ack->type != wire::FrameType::ConnAck)
      throw Error("connect: no ConnAck");
    if (ack->status != wire::kStatusOk)
      throw Error("connect: refused by broker (status " +
                  std::to_string(ack->status) + ")");
    running_ = true;
    reader_ = std::thread([this] { read_loop(); });
  }

  /// Returns false when the broker refuses the subscription (ACL).
  bool subscribe(const std::string& topic, int timeout_ms = 5000) {
    std::unique_lock<std::mutex> op(op_mu_);
    {
      std::lock_guard<std::mutex> lock(ack_mu_);
      ack_.reset();
    }
    if (!sock_.send_frame(wire::Frame::subscribe(topic)))
      throw Error("subscribe: send failed");
    std::unique_lock<std::mutex> lock(ack_mu_);
    if (!ack_cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                          [this] { return ack_.has_value() || !running_; }))
      throw Error("subscribe: timed out");
    if (!ack_) throw Error("subscribe: connection lost");
    return *ack_ == wire::kStatusOk;
  }

  void publish(const std::string& topic, const std::string& payload = {}) {
    if (!sock_.send_frame(wire::Frame::publish(topic, payload)))
      throw Error("publish: send failed");
  }

  void ping(int timeout_ms = 5000) {
    std::unique_lock<std::mutex> op(op_mu_);
    {
      std::lock_guard<std::mutex> lock(ack_mu_);
      ack_.reset();
    }
    if (!sock_.send_frame(wire::Frame::simple(wire::FrameType::Ping)))
      throw Error("ping: send failed");
    std::unique_lock<std::mutex> lock(ack_mu_);
    if (!ack_cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                          [this] { return ack_.has_value() || !running_; }))
      throw Error("ping: timed out");
  }

  /// Next received message, waiting up to timeout_ms.
  std::optional<Message> receive(int timeout_ms) {
    std::unique_lock<std::mutex> lock(rx_mu_);
    if (!rx_cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                         [this] { return !rx_.empty(); }))
      return std::nullopt;
    Message m = std::move(rx_.front());
    rx_.pop_front();
    return m;
  }

  std::vector<Message> drain() {
    std::lock_guard<std::mutex> lock(rx_mu_);
    std::vector<Message> out(rx_.begin(), rx_.end());
    rx_.clear();
    return out;
  }

  std::uint64_t received_count() const { return received_; }
  bool connected() const { return running_; }

  void disconnect() {
    if (running_)
      sock_.send_frame(wire::Frame::simple(wire::FrameType::Disconnect));
    close();
  }

  void close() {
    running_ = false;
    sock_.shutdown();
    if (reader_.joinable()) reader_.join();
    sock_.close();
    ack_cv_.notify_all();
  }

 private:
  void read_loop() {
    while (running_) {
      std::optional<wire::Frame> f;
      try {
        f = sock_.recv_frame();
      } catch (const Error&) {
        break;
      }
      if (!f) break;
      switch (f->type) {
        case wire::FrameType::Publish: {
          {
            std::lock_guard<std::mutex> lock(rx_mu_);
            rx_.push_back(Message{std::move(f->topic), std::move(f->payload)});
          }
          ++received_;
          rx_cv_.notify_all();
          break;
        }
        case wire::FrameType::SubAck:
        case wire::FrameType::ConnAck:
        case wire::FrameType::PingAck: {
          std::lock_guard<std::mutex> lock(ack_mu_);
          ack_ = f->type == wire::FrameType::PingAck ? wire::kStatusOk
                                                     : f->status;
          ack_cv_.notify_all();
          break;
        }
        case wire::FrameType::Ping:
          sock_.send_frame(wire::Frame::simple(wire::FrameType::PingAck));
          break;
        case wire::FrameType::Disconnect:
          running_ = false;
          break;
        default:
          break;
      }
    }
    running_ = false;
    ack_cv_.notify_all();
    rx_cv_.notify_all();
  }

  net::TcpSocket sock_;
  std::thread reader_;
  std::atomic<bool> running_{false};

  std::mutex op_mu_;  // serializes control operations
  std::mutex ack_mu_;
  std::condition_variable ack_cv_;
  std::optional<std::uint8_t> ack_;

  std::mutex rx_mu_;
  std::condition_variable rx_cv_;
  std::deque<Message> rx_;
  std::atomic<std::uint64_t> received_{0};
};

}  // namespace edgebus::client
