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
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edgebus/automaton.hpp"

namespace edgebus {

/// A message as seen by a monitor: the topic plus opaque payload bytes.
struct MonitorEvent {
  std::string topic;
  std::string payload;
  bool operator==(const MonitorEvent&) const = default;
};

using MonitorOutput = std::vector<MonitorEvent>;

/**
 * Native monitors for computation-heavy policies are registered as a
 * table of callbacks: a constructor/destructor pair managing an
 * opaque per-link state handle, and a transition function receiving
 * the message, the state handle, and the output event queue.
 * Enqueueing nothing suppresses the event; enqueueing several injects.
 */
struct MonitorVtable {
  std::function<void*(std::uint64_t seed)> construct;
  std::function<void(void*)> destroy;
  std::function<void(const MonitorEvent&, void*, MonitorOutput&)> transition;
};

/// A constructed monitor instance owning its state handle.
class MonitorInstance {
 public:
  MonitorInstance(const MonitorVtable* vtable, std::uint64_t seed)
      : vtable_(vtable),
        state_(vtable->construct ? vtable->construct(seed) : nullptr,
               [vtable](void* p) {
                 if (vtable->destroy && p) vtable->destroy(p);
               }) {}

  void transition(const MonitorEvent& in, MonitorOutput& out) {
    vtable_->transition(in, state_.get(), out);
  }

 private:
  const MonitorVtable* vtable_;
  std::unique_ptr<void, std::function<void(void*)>> state_;
};

class MonitorRegistry {
 public:
  void register_monitor(const std::string& name, MonitorVtable vtable) {
    if (!vtable.transition)
      throw Error("monitor '" + name + "' has no transition callback");
    auto [it, inserted] = table_.emplace(name, std::move(vtable));
    if (!inserted)
      throw Error("monitor '" + name + "' is already registered");
  }

  bool contains(const std::string& name) const {
    return table_.count(name) != 0;
  }

  MonitorInstance instantiate(const std::string& name,
                              std::uint64_t seed) const {
    auto it = table_.find(name);
    if (it == table_.end())
      throw Error("unknown native monitor '" + name + "'");
    return MonitorInstance(&it->second, seed);
  }

 private:
  std::map<std::string, MonitorVtable> table_;
};

namespace builtin_monitors {

namespace detail {

inline std::uint64_t xorshift(std::uint64_t x) {
  x ^= x << 13;
  x ^= x >> 7;
  x ^= x << 17;
  return x;
}

struct CemState {
  std::uint64_t rng;
};

// Work factor for the byte-proportional monitor. Sized so a typical
// sensor-reading payload costs well over the per-message routing
// cost, which is what makes the monitor the bottleneck in saturation
// measurements.
constexpr int kCemRoundsPerByte = 3000;

}  // namespace detail

/// "sem-passthrough": the fastest possible monitor, emits the input
/// message unaltered.
inline MonitorVtable sem_passthrough() {
  MonitorVtable v;
  v.construct = [](std::uint64_t) -> void* { return nullptr; };
  v.destroy = [](void*) {};
  v.transition = [](const MonitorEvent& in, void*, MonitorOutput& out) {
    out.push_back(in);
  };
  return v;
}

/// "cem-busywork": performs pseudo-random work for every payload byte
/// and emits a random payload of the same size, typifying a monitor
/// whose cost is proportional to the message size.
inline MonitorVtable cem_busywork() {
  MonitorVtable v;
  v.construct = [](std::uint64_t seed) -> void* {
    return new detail::CemState{seed ? seed : 0x9e3779b97f4a7c15ull};
  };
  v.destroy = [](void* p) { delete static_cast<detail::CemState*>(p); };
  v.transition = [](const MonitorEvent& in, void* handle, MonitorOutput& out) {
    auto* st = static_cast<detail::CemState*>(handle);
    std::uint64_t h = st->rng;
    for (unsigned char b : in.payload) {
      h ^= b;
      for (int i = 0; i < detail::kCemRoundsPerByte; ++i)
        h = detail::xorshift(h);
    }
    std::string payload(in.payload.size(), '\0');
    for (size_t i = 0; i < payload.size(); ++i) {
      h = detail::xorshift(h);
      payload[i] = static_cast<char>(h & 0xff);
    }
    st->rng = h;
    out.push_back(MonitorEvent{in.topic, std::move(payload)});
  };
  return v;
}

inline void register_all(MonitorRegistry& registry) {
  registry.register_monitor("sem-passthrough", sem_passthrough());
  registry.register_monitor("cem-busywork", cem_busywork());
}

}  // namespace builtin_monitors

/**
 * The uniform per-link monitor the broker drives: either an edit
 * automaton threading its current state (output events inherit the
 * triggering event's payload), or a native registry instance.
 * Identity automata short-circuit on a fast path.
 */
class LinkMonitor {
 public:
  static LinkMonitor from_automaton(EditAutomaton ea) {
    LinkMonitor m;
    m.identity_ = ea.is_identity();
    m.state_ = ea.initial();
    m.ea_ = std::make_shared<EditAutomaton>(std::move(ea));
    return m;
  }

  static LinkMonitor from_native(MonitorInstance instance) {
    LinkMonitor m;
    m.native_ = std::make_shared<MonitorInstance>(std::move(instance));
    return m;
  }

  bool is_identity() const { return identity_; }
  const std::string& state() const { return state_; }

  /// Runs one event through the monitor. Open-world: topics unknown
  /// to an automaton take its wildcard/default rules.
  void on_event(const MonitorEvent& in, MonitorOutput& out) {
    if (identity_) {
      out.push_back(in);
      return;
    }
    if (native_) {
      native_->transition(in, out);
      return;
    }
    auto r = ea_->step_any(state_, in.topic);
    state_ = std::move(r.state);
    for (auto& topic : r.output)
      out.push_back(MonitorEvent{std::move(topic), in.payload});
  }

 private:
  std::shared_ptr<EditAutomaton> ea_;
  std::shared_ptr<MonitorInstance> native_;
  std::string state_ = "native";
  bool identity_ = false;
};

}  // namespace edgebus
