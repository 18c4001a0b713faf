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
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "edgebus/ea_text.hpp"
#include "edgebus/monitors.hpp"
#include "edgebus/net.hpp"
#include "edgebus/strings.hpp"
#include "edgebus/wire.hpp"

namespace edgebus::broker {

/// The four message flow directions a monitor can be bound to; a
/// binding expands to the concrete links in that direction, with
/// explicit per-link bindings taking precedence.
enum class FlowDirection { ImPub, ImSub, ExPub, ExSub };

inline const char* to_string(FlowDirection d) {
  switch (d) {
    case FlowDirection::ImPub: return "im_pub";
    case FlowDirection::ImSub: return "im_sub";
    case FlowDirection::ExPub: return "ex_pub";
    case FlowDirection::ExSub: return "ex_sub";
  }
  return "?";
}

struct BridgeDecl {
  std::string peer;
  std::string host;        // empty for passive declarations
  std::uint16_t port = 0;
  bool active = false;     // we initiate; the peer is our parent
  std::string ingress_type;  // type of link peer -> us
  std::string egress_type;   // type of link us -> peer
};

struct MonitorBinding {
  bool per_link = false;
  FlowDirection direction = FlowDirection::ImPub;
  std::string src, dst;  // per-link form
  std::string ref;       // automaton file, native monitor name, or "identity"
};

/**
 * Per-broker configuration, parsed from line-oriented directives:
 *
 *   broker <name>
 *   listen <addr:port>
 *   linktype <name>
 *   allow <t1> <t2> | deny <t1> <t2>     # one form per file
 *   client-default ingress <type> egress <type>
 *   bridge <peer> <addr:port | -> ingress <type> egress <type>
 *   monitor <im_pub|im_sub|ex_pub|ex_sub> <ea file | native name>
 *   monitor-link <src> <dst> <ea file | native name>
 *   subscription-acl <clientId> <topic>
 */
struct BrokerConfig {
  std::string name;
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 0;
  std::set<std::string> link_types;
  std::set<std::pair<std::string, std::string>> allow;
  std::optional<std::pair<std::string, std::string>> client_types;
  std::vector<BridgeDecl> bridges;
  std::vector<MonitorBinding> monitors;
  std::map<std::string, std::set<std::string>> subscription_acl;
  std::string base_dir = ".";  // resolves relative automaton paths

  const BridgeDecl* bridge_for(const std::string& peer) const {
    for (const auto& b : bridges)
      if (b.peer == peer) return &b;
    return nullptr;
  }

  static BrokerConfig parse(const std::string& text,
                            const std::string& origin = "<config>");
  static BrokerConfig parse_file(const std::string& path);
};

inline BrokerConfig BrokerConfig::parse(const std::string& text,
                                        const std::string& origin) {
  BrokerConfig cfg;
  std::set<std::pair<std::string, std::string>> denied;
  bool saw_allow = false, saw_deny = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& m) {
    throw Error(origin + ":" + std::to_string(lineno) + ": " + m);
  };

  auto parse_direction = [&](const std::string& s) {
    if (s == "im_pub") return FlowDirection::ImPub;
    if (s == "im_sub") return FlowDirection::ImSub;
    if (s == "ex_pub") return FlowDirection::ExPub;
    if (s == "ex_sub") return FlowDirection::ExSub;
    fail("unknown flow direction '" + s + "'");
    return FlowDirection::ImPub;
  };

  while (std::getline(in, line)) {
    ++lineno;
    auto tok = strings::split_ws(strings::strip_comment(line));
    if (tok.empty()) continue;
    const std::string& kw = tok[0];

    if (kw == "broker" && tok.size() == 2) {
      if (!cfg.name.empty()) fail("duplicate broker directive");
      cfg.name = tok[1];
    } else if (kw == "listen" && tok.size() == 2) {
      auto [host, port] = net::parse_endpoint(tok[1]);
      cfg.listen_host = host;
      cfg.listen_port = port;
    } else if (kw == "linktype" && tok.size() == 2) {
      if (!cfg.link_types.insert(tok[1]).second)
        fail("duplicate link type '" + tok[1] + "'");
    } else if (kw == "allow" && tok.size() == 3) {
      if (saw_deny) fail("cannot mix allow and deny forms");
      saw_allow = true;
      cfg.allow.insert({tok[1], tok[2]});
    } else if (kw == "deny" && tok.size() == 3) {
      if (saw_allow) fail("cannot mix allow and deny forms");
      saw_deny = true;
      denied.insert({tok[1], tok[2]});
    } else if (kw == "client-default" && tok.size() == 5 &&
               tok[1] == "ingress" && tok[3] == "egress") {
      cfg.client_types = {tok[2], tok[4]};
    } else if (kw == "bridge" && tok.size() == 7 && tok[3] == "ingress" &&
               tok[5] == "egress") {
      BridgeDecl b;
      b.peer = tok[1];
      if (tok[2] != "-") {
        auto [host, port] = net::parse_endpoint(tok[2]);
        b.host = host;
        b.port = port;
        b.active = true;
      }
      b.ingress_type = tok[4];
      b.egress_type = tok[6];
      if (cfg.bridge_for(b.peer)) fail("duplicate bridge '" + b.peer + "'");
      cfg.bridges.push_back(std::move(b));
    } else if (kw == "monitor" && tok.size() == 3) {
      MonitorBinding m;
      m.per_link = false;
      m.direction = parse_direction(tok[1]);
      m.ref = tok[2];
      cfg.monitors.push_back(std::move(m));
    } else if (kw == "monitor-link" && tok.size() == 4) {
      MonitorBinding m;
      m.per_link = true;
      m.src = tok[1];
      m.dst = tok[2];
      m.ref = tok[3];
      cfg.monitors.push_back(std::move(m));
    } else if (kw == "subscription-acl" && tok.size() == 3) {
      cfg.subscription_acl[tok[1]].insert(tok[2]);
    } else {
      fail("unknown or malformed directive '" + kw + "'");
    }
  }

  if (cfg.name.empty()) throw Error(origin + ": missing broker directive");
  if (saw_deny) {
    for (const auto& t1 : cfg.link_types)
      for (const auto& t2 : cfg.link_types)
        if (!denied.count({t1, t2})) cfg.allow.insert({t1, t2});
  }
  auto check_type = [&](const std::string& t, const std::string& what) {
    if (!cfg.link_types.count(t))
      throw Error(origin + ": " + what + " references undeclared link type '" +
                  t + "'");
  };
  for (const auto& [t1, t2] : cfg.allow) {
    check_type(t1, "allow table");
    check_type(t2, "allow table");
  }
  for (const auto& b : cfg.bridges) {
    check_type(b.ingress_type, "bridge '" + b.peer + "'");
    check_type(b.egress_type, "bridge '" + b.peer + "'");
  }
  if (cfg.client_types) {
    check_type(cfg.client_types->first, "client-default");
    check_type(cfg.client_types->second, "client-default");
  }
  return cfg;
}

inline BrokerConfig BrokerConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open broker config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  BrokerConfig cfg = parse(buf.str(), path);
  cfg.base_dir = std::filesystem::path(path).parent_path().string();
  if (cfg.base_dir.empty()) cfg.base_dir = ".";
  return cfg;
}

/**
 * The networked broker. Accepts client and bridge connections,
 * enforces the brokering table on every forwarding decision, and
 * runs per-link monitors at link ingress and egress.
 *
 * Concurrency: one reader thread per connection feeds a single
 * bounded routing queue consumed by one router thread, which owns all
 * monitor state. Per-link monitor serialization and per-link order
 * preservation follow from the per-connection read order and queue
 * FIFO. Frames that cannot be delivered are dropped (at-most-once).
 */
class Broker {
 public:
  struct Options {
    std::uint64_t seed = 0;
    std::function<void(const std::string&)> log;  //"ROUTE ..." / "EA ..."
    size_t queue_capacity = 65536;
    int reconnect_initial_ms = 500;
    int reconnect_max_ms = 30000;
  };

  Broker(BrokerConfig config, const MonitorRegistry* registry,
         Options options = {})
      : cfg_(std::move(config)), registry_(registry), opts_(std::move(options)) {
    if (!opts_.log) {
      std::string name = cfg_.name;
      opts_.log = [name](const std::string& msg) {
        std::ostringstream line;
        line << "[" << name << "] " << msg << "\n";
        std::cerr << line.str();
      };
    }
  }

  ~Broker() { stop(); }

  void start() {
    listener_ = net::TcpListener::listen_on(cfg_.listen_host, cfg_.listen_port);
    running_ = true;
    router_thread_ = std::thread([this] { route_loop(); });
    accept_thread_ = std::thread([this] { accept_loop(); });
    for (const auto& b : cfg_.bridges) {
      if (!b.active) continue;
      connector_threads_.emplace_back([this, b] { connector_loop(b); });
    }
  }

  void stop() {
    bool was_running = running_.exchange(false);
    if (!was_running) return;
    listener_.wake();
    {
      std::lock_guard<std::mutex> lock(sessions_mu_);
      for (auto& [id, s] : sessions_) s->sock.shutdown();
    }
    queue_cv_.notify_all();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (router_thread_.joinable()) router_thread_.join();
    for (auto& t : connector_threads_)
      if (t.joinable()) t.join();
    {
      std::lock_guard<std::mutex> lock(threads_mu_);
      for (auto& t : reader_threads_)
        if (t.joinable()) t.join();
    }
    listener_.close();
  }

  std::uint16_t port() const { return listener_.port(); }
  const std::string& name() const { return cfg_.name; }
  std::uint64_t dropped_frames() const { return dropped_; }

  /// Peers and clients with a live session; lets harnesses wait for
  /// bridges to come up without sending probe traffic.
  std::vector<std::string> connected_peers() {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
  }

 private:
  struct Session {
    std::string id;
    bool is_bridge = false;
    std::string ingress_type;
    std::string egress_type;
    net::TcpSocket sock;
    std::mutex write_mu;
    std::set<std::string> subs;
    std::mutex subs_mu;
  };
  using SessionPtr = std::shared_ptr<Session>;

  struct RoutedEvent {
    std::string from;
    std::string in_type;
    MonitorEvent event;
  };

  // ---- connection handling ------------------------------------------------

  void accept_loop() {
    while (running_) {
      auto sock = listener_.accept();
      if (!sock) break;
      if (!running_) break;
      auto s = std::make_shared<Session>();
      s->sock = std::move(*sock);
      std::lock_guard<std::mutex> lock(threads_mu_);
      reader_threads_.emplace_back([this, s] { serve_connection(s); });
    }
  }

  bool handshake(const SessionPtr& s) {
    std::optional<wire::Frame> f;
    try {
      f = s->sock.recv_frame();
    } catch (const Error&) {
      return false;
    }
    if (!f || f->type != wire::FrameType::Connect || f->client_id.empty())
      return false;
    s->id = f->client_id;
    if (const BridgeDecl* b = cfg_.bridge_for(s->id)) {
      s->is_bridge = true;
      s->ingress_type = b->ingress_type;
      s->egress_type = b->egress_type;
    } else {
      if (!cfg_.client_types) {
        s->sock.send_frame(wire::Frame::conn_ack(wire::kStatusRefused));
        return false;
      }
      s->ingress_type = cfg_.client_types->first;
      s->egress_type = cfg_.client_types->second;
    }
    if (!s->sock.send_frame(wire::Frame::conn_ack(wire::kStatusOk)))
      return false;
    register_session(s);
    return true;
  }

  void serve_connection(const SessionPtr& s) {
    if (!handshake(s)) {
      s->sock.close();
      return;
    }
    read_frames(s);
    deregister_session(s);
    s->sock.close();
  }

  /// Shared frame pump for inbound sessions and connector sessions.
  void read_frames(const SessionPtr& s) {
    while (running_) {
      std::optional<wire::Frame> f;
      try {
        f = s->sock.recv_frame();
      } catch (const Error& e) {
        log("PROTOCOL " + s->id + " " + e.what());
        break;
      }
      if (!f) break;
      switch (f->type) {
        case wire::FrameType::Publish:
          enqueue(RoutedEvent{s->id, s->ingress_type,
                              MonitorEvent{std::move(f->topic),
                                           std::move(f->payload)}});
          break;
        case wire::FrameType::Subscribe:
          handle_subscribe(s, f->topic);
          break;
        case wire::FrameType::Ping:
          send_frame(s, wire::Frame::simple(wire::FrameType::PingAck));
          break;
        case wire::FrameType::Disconnect:
          return;
        case wire::FrameType::PingAck:
          break;
        default:
          log("PROTOCOL " + s->id + " unexpected " +
              wire::to_string(f->type));
          return;
      }
    }
  }

  void handle_subscribe(const SessionPtr& s, const std::string& topic) {
    if (s->is_bridge) {
      // Bridges receive everything the brokering table admits;
      // subscriptions are a client concept.
      send_frame(s, wire::Frame::sub_ack(wire::kStatusRefused));
      return;
    }
    auto acl = cfg_.subscription_acl.find(s->id);
    if (acl != cfg_.subscription_acl.end() && !acl->second.count(topic)) {
      log("ACL " + s->id + " denied " + topic);
      send_frame(s, wire::Frame::sub_ack(wire::kStatusRefused));
      return;
    }
    {
      std::lock_guard<std::mutex> lock(s->subs_mu);
      s->subs.insert(topic);  // idempotent
    }
    send_frame(s, wire::Frame::sub_ack(wire::kStatusOk));
  }

  void register_session(const SessionPtr& s) {
    SessionPtr old;
    {
      std::lock_guard<std::mutex> lock(sessions_mu_);
      auto it = sessions_.find(s->id);
      if (it != sessions_.end()) {
        old = it->second;  // takeover: newest connection wins
      }
      sessions_[s->id] = s;
    }
    if (old) old->sock.shutdown();
  }

  void deregister_session(const SessionPtr& s) {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    auto it = sessions_.find(s->id);
    if (it != sessions_.end() && it->second == s) sessions_.erase(it);
  }

  // ---- bridge connector ---------------------------------------------------

  void connector_loop(const BridgeDecl& decl) {
    int backoff = opts_.reconnect_initial_ms;
    while (running_) {
      SessionPtr s;
      try {
        net::TcpSocket sock =
            net::TcpSocket::connect_to(decl.host, decl.port, 2000);
        if (!sock.send_frame(wire::Frame::connect(cfg_.name)))
          throw Error("bridge handshake failed");
        auto ack = sock.recv_frame();
        if (!ack || ack->type != wire::FrameType::ConnAck ||
            ack->status != wire::kStatusOk)
          throw Error("bridge refused");
        s = std::make_shared<Session>();
        s->id = decl.peer;
        s->is_bridge = true;
        s->ingress_type = decl.ingress_type;
        s->egress_type = decl.egress_type;
        s->sock = std::move(sock);
      } catch (const Error& e) {
        if (!running_) return;
        log("BRIDGE " + decl.peer + " down (" + e.what() + ")");
        backoff = sleep_backoff(backoff);
        continue;
      }
      log("BRIDGE " + decl.peer + " up");
      backoff = opts_.reconnect_initial_ms;
      register_session(s);
      read_frames(s);
      deregister_session(s);
      s->sock.close();
      if (running_) log("BRIDGE " + decl.peer + " lost");
    }
  }

  int sleep_backoff(int current_ms) {
    int slept = 0;
    while (running_ && slept < current_ms) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      slept += 50;
    }
    return std::min(current_ms * 2, opts_.reconnect_max_ms);
  }

  // ---- routing ------------------------------------------------------------

  void enqueue(RoutedEvent ev) {
    {
      std::lock_guard<std::mutex> lock(queue_mu_);
      if (queue_.size() >= opts_.queue_capacity) {
        ++dropped_;
        return;  // at-most-once: overload sheds load
      }
      queue_.push_back(std::move(ev));
    }
    queue_cv_.notify_one();
  }

  void route_loop() {
    while (true) {
      RoutedEvent ev;
      {
        std::unique_lock<std::mutex> lock(queue_mu_);
        queue_cv_.wait(lock, [this] { return !queue_.empty() || !running_; });
        if (queue_.empty()) {
          if (!running_) return;
          continue;
        }
        ev = std::move(queue_.front());
        queue_.pop_front();
      }
      route_event(ev);
    }
  }

  void route_event(const RoutedEvent& ev) {
    MonitorOutput admitted;
    LinkMonitor* monitor = ingress_monitor(ev.from);
    if (monitor && !monitor->is_identity()) {
      std::string before = monitor->state();
      monitor->on_event(ev.event, admitted);
      log("EA " + ev.from + "->" + cfg_.name + " " + before + " " +
          ev.event.topic + " -> " + monitor->state() + " " +
          std::to_string(admitted.size()));
    } else {
      admitted.push_back(ev.event);
    }
    if (admitted.empty()) return;

    std::vector<SessionPtr> targets;
    {
      std::lock_guard<std::mutex> lock(sessions_mu_);
      for (const auto& [id, s] : sessions_) {
        if (id != ev.from) targets.push_back(s);
      }
    }

    for (const auto& e : admitted) {
      for (const auto& t : targets) {
        bool wants = false;
        if (t->is_bridge) {
          wants = true;
        } else {
          std::lock_guard<std::mutex> lock(t->subs_mu);
          wants = t->subs.count(e.topic) != 0;
        }
        if (!wants) continue;
        bool allowed = cfg_.allow.count({ev.in_type, t->egress_type}) != 0;
        log("ROUTE " + ev.from + "->" + cfg_.name + " " + ev.in_type + " " +
            cfg_.name + "->" + t->id + " " + t->egress_type + " " + e.topic +
            (allowed ? " allowed" : " denied"));
        if (!allowed) continue;
        deliver(t, e);
      }
    }
  }

  void deliver(const SessionPtr& t, const MonitorEvent& e) {
    MonitorOutput out;
    LinkMonitor* monitor = egress_monitor(t->id);
    if (monitor && !monitor->is_identity()) {
      std::string before = monitor->state();
      monitor->on_event(e, out);
      log("EA " + cfg_.name + "->" + t->id + " " + before + " " + e.topic +
          " -> " + monitor->state() + " " + std::to_string(out.size()));
    } else {
      out.push_back(e);
    }
    for (const auto& o : out) {
      wire::Frame f = wire::Frame::publish(o.topic, o.payload);
      if (!send_frame(t, f)) {
        t->sock.shutdown();  // reader notices and deregisters
        break;
      }
    }
  }

  bool send_frame(const SessionPtr& s, const wire::Frame& f) {
    std::lock_guard<std::mutex> lock(s->write_mu);
    return s->sock.send_frame(f);
  }

  // ---- monitor resolution (router thread only) ----------------------------

  LinkMonitor* ingress_monitor(const std::string& from) {
    auto it = ingress_monitors_.find(from);
    if (it == ingress_monitors_.end()) {
      it = ingress_monitors_
               .emplace(from, resolve_monitor(from, cfg_.name, true))
               .first;
    }
    return it->second ? &*it->second : nullptr;
  }

  LinkMonitor* egress_monitor(const std::string& to) {
    auto it = egress_monitors_.find(to);
    if (it == egress_monitors_.end()) {
      it = egress_monitors_
               .emplace(to, resolve_monitor(cfg_.name, to, false))
               .first;
    }
    return it->second ? &*it->second : nullptr;
  }

  /// Explicit per-link binding first, then the direction rule.
  std::optional<LinkMonitor> resolve_monitor(const std::string& src,
                                             const std::string& dst,
                                             bool ingress) {
    const std::string& peer = ingress ? src : dst;
    const BridgeDecl* bridge = cfg_.bridge_for(peer);
    FlowDirection dir;
    if (ingress) {
      dir = (bridge && bridge->active) ? FlowDirection::ExPub
                                       : FlowDirection::ImPub;
    } else {
      dir = (bridge && bridge->active) ? FlowDirection::ExSub
                                       : FlowDirection::ImSub;
    }
    const MonitorBinding* chosen = nullptr;
    for (const auto& m : cfg_.monitors) {
      if (m.per_link) {
        if (m.src == src && m.dst == dst) {
          chosen = &m;
          break;  // per-link bindings override direction bindings
        }
      } else if (!chosen && m.direction == dir) {
        chosen = &m;
      }
    }
    if (!chosen) return std::nullopt;
    return make_monitor(chosen->ref, src + "->" + dst);
  }

  LinkMonitor make_monitor(const std::string& ref, const std::string& link) {
    if (ref == "identity")
      return LinkMonitor::from_automaton(EditAutomaton::identity());
    if (registry_ && registry_->contains(ref)) {
      std::uint64_t seed = opts_.seed;
      for (char c : link) seed = seed * 1099511628211ull + (unsigned char)c;
      return LinkMonitor::from_native(registry_->instantiate(ref, seed));
    }
    std::filesystem::path p(ref);
    if (p.is_relative()) p = std::filesystem::path(cfg_.base_dir) / p;
    auto cached = ea_cache_.find(p.string());
    if (cached == ea_cache_.end())
      cached = ea_cache_.emplace(p.string(), parse_ea_file(p.string())).first;
    return LinkMonitor::from_automaton(cached->second);
  }

  void log(const std::string& msg) { opts_.log(msg); }

  BrokerConfig cfg_;
  const MonitorRegistry* registry_;
  Options opts_;

  net::TcpListener listener_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread router_thread_;
  std::vector<std::thread> connector_threads_;

  std::mutex threads_mu_;
  std::vector<std::thread> reader_threads_;

  std::mutex sessions_mu_;
  std::map<std::string, SessionPtr> sessions_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<RoutedEvent> queue_;
  std::atomic<std::uint64_t> dropped_{0};

  // Router-thread state: monitor instances keyed by the peer entity,
  // preserved across transport reconnects (the link, not the session,
  // owns the automaton state).
  std::map<std::string, std::optional<LinkMonitor>> ingress_monitors_;
  std::map<std::string, std::optional<LinkMonitor>> egress_monitors_;
  std::map<std::string, EditAutomaton> ea_cache_;
};

}  // namespace edgebus::broker
