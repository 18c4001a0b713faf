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

#include <cstdint>
#include <string>

#include "edgebus/automaton.hpp"  // for Error

namespace edgebus::wire {

/**
 * The broker wire protocol. Big-endian framing:
 *
 *   frame    = [type: u8][flags: u8][length: u32][body]
 *   Connect  = [idLen: u16][clientId bytes]
 *   Subscribe= [topicLen: u16][topic bytes]
 *   Publish  = [topicLen: u16][topic bytes][payload bytes]
 *   ConnAck / SubAck = [status: u8], 0 = OK
 *   Ping / PingAck / Disconnect = empty body
 *
 * Topic names are limited to 65535 bytes and payloads to 2^24 - 1.
 * Delivery is at-most-once; there are no acknowledgments beyond the
 * connection and subscription handshakes.
 */

enum class FrameType : std::uint8_t {
  Connect = 1,
  ConnAck = 2,
  Subscribe = 3,
  SubAck = 4,
  Publish = 5,
  Ping = 6,
  PingAck = 7,
  Disconnect = 8,
};

inline const char* to_string(FrameType t) {
  switch (t) {
    case FrameType::Connect: return "Connect";
    case FrameType::ConnAck: return "ConnAck";
    case FrameType::Subscribe: return "Subscribe";
    case FrameType::SubAck: return "SubAck";
    case FrameType::Publish: return "Publish";
    case FrameType::Ping: return "Ping";
    case FrameType::PingAck: return "PingAck";
    case FrameType::Disconnect: return "Disconnect";
  }
  return "?";
}

constexpr std::size_t kMaxTopic = 65535;
constexpr std::size_t kMaxPayload = (1u << 24) - 1;
constexpr std::size_t kMaxBody = 2 + kMaxTopic + kMaxPayload;
constexpr std::size_t kHeaderSize = 6;

constexpr std::uint8_t kStatusOk = 0;
constexpr std::uint8_t kStatusRefused = 1;

struct Frame {
  FrameType type = FrameType::Ping;
  std::uint8_t flags = 0;
  std::string topic;      // Publish, Subscribe
  std::string payload;    // Publish
  std::string client_id;  // Connect
  std::uint8_t status = 0;  // ConnAck, SubAck

  bool operator==(const Frame&) const = default;

  static Frame connect(std::string client_id) {
    Frame f;
    f.type = FrameType::Connect;
    f.client_id = std::move(client_id);
    return f;
  }
  static Frame conn_ack(std::uint8_t status) {
    Frame f;
    f.type = FrameType::ConnAck;
    f.status = status;
    return f;
  }
  static Frame subscribe(std::string topic) {
    Frame f;
    f.type = FrameType::Subscribe;
    f.topic = std::move(topic);
    return f;
  }
  static Frame sub_ack(std::uint8_t status) {
    Frame f;
    f.type = FrameType::SubAck;
    f.status = status;
    return f;
  }
  static Frame publish(std::string topic, std::string payload) {
    Frame f;
    f.type = FrameType::Publish;
    f.topic = std::move(topic);
    f.payload = std::move(payload);
    return f;
  }
  static Frame simple(FrameType t) {
    Frame f;
    f.type = t;
    return f;
  }
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

}  // namespace detail

inline std::string encode_frame(const Frame& f) {
  if (f.topic.size() > kMaxTopic)
    throw Error("frame topic exceeds " + std::to_string(kMaxTopic) + " bytes");
  if (f.payload.size() > kMaxPayload)
    throw Error("frame payload exceeds " + std::to_string(kMaxPayload) +
                " bytes");
  if (f.client_id.size() > kMaxTopic)
    throw Error("client id exceeds " + std::to_string(kMaxTopic) + " bytes");

  std::string body;
  switch (f.type) {
    case FrameType::Connect:
      detail::put_u16(body, static_cast<std::uint16_t>(f.client_id.size()));
      body += f.client_id;
      break;
    case FrameType::Subscribe:
      detail::put_u16(body, static_cast<std::uint16_t>(f.topic.size()));
      body += f.topic;
      break;
    case FrameType::Publish:
      detail::put_u16(body, static_cast<std::uint16_t>(f.topic.size()));
      body += f.topic;
      body += f.payload;
      break;
    case FrameType::ConnAck:
    case FrameType::SubAck:
      body.push_back(static_cast<char>(f.status));
      break;
    case FrameType::Ping:
    case FrameType::PingAck:
    case FrameType::Disconnect:
      break;
  }

  std::string out;
  out.reserve(kHeaderSize + body.size());
  out.push_back(static_cast<char>(f.type));
  out.push_back(static_cast<char>(f.flags));
  detail::put_u32(out, static_cast<std::uint32_t>(body.size()));
  out += body;
  return out;
}

/// Header fields pulled out of the fixed 6-byte prefix.
struct FrameHeader {
  std::uint8_t type = 0;
  std::uint8_t flags = 0;
  std::uint32_t length = 0;
};

inline FrameHeader decode_header(const unsigned char* p) {
  FrameHeader h;
  h.type = p[0];
  h.flags = p[1];
  h.length = detail::get_u32(p + 2);
  return h;
}

/// Decodes a frame body. Throws on malformed input: unknown type,
/// short body, length mismatch, or trailing bytes.
inline Frame decode_body(const FrameHeader& h, const std::string& body) {
  if (body.size() != h.length) throw Error("frame body length mismatch");
  if (h.length > kMaxBody) throw Error("frame exceeds maximum size");
  const auto* p = reinterpret_cast<const unsigned char*>(body.data());

  Frame f;
  f.flags = h.flags;
  switch (h.type) {
    case static_cast<std::uint8_t>(FrameType::Connect): {
      f.type = FrameType::Connect;
      if (body.size() < 2) throw Error("short Connect frame");
      std::uint16_t n = detail::get_u16(p);
      if (body.size() != 2u + n) throw Error("bad Connect frame length");
      f.client_id = body.substr(2, n);
      return f;
    }
    case static_cast<std::uint8_t>(FrameType::Subscribe): {
      f.type = FrameType::Subscribe;
      if (body.size() < 2) throw Error("short Subscribe frame");
      std::uint16_t n = detail::get_u16(p);
      if (body.size() != 2u + n) throw Error("bad Subscribe frame length");
      f.topic = body.substr(2, n);
      return f;
    }
    case static_cast<std::uint8_t>(FrameType::Publish): {
      f.type = FrameType::Publish;
      if (body.size() < 2) throw Error("short Publish frame");
      std::uint16_t n = detail::get_u16(p);
      if (body.size() < 2u + n) throw Error("bad Publish frame length");
      f.topic = body.substr(2, n);
      f.payload = body.substr(2 + n);
      if (f.payload.size() > kMaxPayload)
        throw Error("Publish payload exceeds maximum size");
      return f;
    }
    case static_cast<std::uint8_t>(FrameType::ConnAck):
    case static_cast<std::uint8_t>(FrameType::SubAck): {
      f.type = static_cast<FrameType>(h.type);
      if (body.size() != 1) throw Error("bad ack frame length");
      f.status = static_cast<std::uint8_t>(body[0]);
      return f;
    }
    case static_cast<std::uint8_t>(FrameType::Ping):
    case static_cast<std::uint8_t>(FrameType::PingAck):
    case static_cast<std::uint8_t>(FrameType::Disconnect): {
      f.type = static_cast<FrameType>(h.type);
      if (!body.empty()) throw Error("unexpected body on control frame");
      return f;
    }
    default:
      throw Error("unknown frame type " + std::to_string(h.type));
  }
}

/// Whole-buffer decode, mostly for tests.
inline Frame decode_frame(const std::string& bytes) {
  if (bytes.size() < kHeaderSize) throw Error("short frame header");
  FrameHeader h =
      decode_header(reinterpret_cast<const unsigned char*>(bytes.data()));
  if (bytes.size() != kHeaderSize + h.length)
    throw Error("frame length mismatch");
  return decode_body(h, bytes.substr(kHeaderSize));
}

}  // namespace edgebus::wire
