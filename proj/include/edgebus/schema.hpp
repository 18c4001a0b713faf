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

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgebus/automaton.hpp"

namespace edgebus {

enum class EntityKind { Device, Broker };

/// A directed network link between two entities. Each direction of a
/// connection is a distinct link with its own type and monitor.
struct Link {
  std::string src;
  std::string dst;
  auto operator<=>(const Link&) const = default;
  Link reversed() const { return Link{dst, src}; }
};

inline std::string to_string(const Link& l) { return l.src + "->" + l.dst; }

enum class LinkClass { Publish, Notify, Bridge };

inline const char* to_string(LinkClass c) {
  switch (c) {
    case LinkClass::Publish: return "publish";
    case LinkClass::Notify: return "notify";
    case LinkClass::Bridge: return "bridge";
  }
  return "?";
}

/**
 * The connection graph: disjoint device and broker sets plus a
 * symmetric, irreflexive link relation that never connects two
 * devices. Symmetry and the other structural invariants are checked
 * by validate_schema, not enforced on mutation.
 */
struct ConnectionGraph {
  std::set<std::string> devices;
  std::set<std::string> brokers;
  std::set<Link> links;

  bool operator==(const ConnectionGraph&) const = default;

  bool is_device(const std::string& e) const { return devices.count(e) != 0; }
  bool is_broker(const std::string& e) const { return brokers.count(e) != 0; }
  bool is_entity(const std::string& e) const {
    return is_device(e) || is_broker(e);
  }
  bool has_link(const std::string& x, const std::string& y) const {
    return links.count(Link{x, y}) != 0;
  }
  bool has_link(const Link& l) const { return links.count(l) != 0; }

  std::optional<EntityKind> kind_of(const std::string& e) const {
    if (is_device(e)) return EntityKind::Device;
    if (is_broker(e)) return EntityKind::Broker;
    return std::nullopt;
  }
};

/// Publish / Notify / Bridge by endpoint kinds.
/// Throws when an endpoint is not a declared entity.
inline LinkClass classify(const Link& link, const ConnectionGraph& graph) {
  auto src = graph.kind_of(link.src);
  auto dst = graph.kind_of(link.dst);
  if (!src) throw Error("unknown entity '" + link.src + "'");
  if (!dst) throw Error("unknown entity '" + link.dst + "'");
  if (*src == EntityKind::Device && *dst == EntityKind::Broker)
    return LinkClass::Publish;
  if (*src == EntityKind::Broker && *dst == EntityKind::Device)
    return LinkClass::Notify;
  if (*src == EntityKind::Broker && *dst == EntityKind::Broker)
    return LinkClass::Bridge;
  throw Error("link " + to_string(link) + " connects two devices");
}

/// Monitored links are the ones with a broker as destination.
inline bool monitored(const Link& link, const ConnectionGraph& graph) {
  return classify(link, graph) != LinkClass::Notify;
}

/**
 * The brokering policy: declared link types, a total type assignment
 * over links, and the allow table over type pairs. allow(t1, t2)
 * means a broker may forward an event received from a link of type t1
 * to a link of type t2.
 */
struct BrokeringPolicy {
  std::set<std::string> link_types;
  std::map<Link, std::string> type_of;
  std::set<std::pair<std::string, std::string>> allow;

  bool operator==(const BrokeringPolicy&) const = default;

  bool allows(const std::string& t1, const std::string& t2) const {
    return allow.count({t1, t2}) != 0;
  }

  const std::string* type_for(const Link& l) const {
    auto it = type_of.find(l);
    return it == type_of.end() ? nullptr : &it->second;
  }
};

/// Per-notify-link subscription sets: sub(broker->device) is the set
/// of topics the device subscribed to at that broker.
struct Subscriptions {
  std::map<Link, std::set<std::string>> by_link;

  bool operator==(const Subscriptions&) const = default;

  bool subscribed(const Link& l, const std::string& topic) const {
    auto it = by_link.find(l);
    return it != by_link.end() && it->second.count(topic) != 0;
  }
};

/**
 * The event policy: the topic alphabet plus the edit automaton
 * assigned to each monitored link. Links with no entry carry the
 * identity automaton, which keeps the assignment total without
 * forcing verbose configurations.
 */
struct EventPolicy {
  std::set<std::string> alphabet;
  std::map<Link, EditAutomaton> monitors;

  bool operator==(const EventPolicy&) const = default;

  const EditAutomaton& monitor_on(const Link& l) const {
    static const EditAutomaton kIdentity = EditAutomaton::identity();
    auto it = monitors.find(l);
    return it == monitors.end() ? kIdentity : it->second;
  }
};

/**
 * The full system schema: connection graph, brokering policy, event
 * policy, subscriptions, and the name of the task ordering used by
 * the simulator. All components are immutable value types; a schema
 * can be shared freely across threads once built.
 */
struct Schema {
  ConnectionGraph graph;
  BrokeringPolicy brokering;
  EventPolicy events;
  Subscriptions subscriptions;
  std::string task_ordering = "fifo";

  bool operator==(const Schema&) const = default;
};

/// propagate(x, y, z): an event passing through link (x,y) may be
/// forwarded by y through link (y,z). False when either link is
/// missing or the type pair is not allowed; never throws.
inline bool propagate(const Schema& schema, const std::string& x,
                      const std::string& y, const std::string& z) {
  const Link in{x, y}, out{y, z};
  if (!schema.graph.has_link(in) || !schema.graph.has_link(out)) return false;
  const std::string* t1 = schema.brokering.type_for(in);
  const std::string* t2 = schema.brokering.type_for(out);
  if (!t1 || !t2) return false;
  return schema.brokering.allows(*t1, *t2);
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/**
 * Checks every structural invariant of a schema and reports all
 * violations with the offending element. Violations are data, not
 * failures; the schema is left untouched.
 */
inline ValidationReport validate_schema(const Schema& schema) {
  ValidationReport report;
  auto bad = [&report](std::string msg) {
    report.violations.push_back(std::move(msg));
  };

  const ConnectionGraph& g = schema.graph;
  for (const auto& e : g.devices) {
    if (g.brokers.count(e))
      bad("entity '" + e + "' declared as both device and broker");
    if (e.empty()) bad("empty device name");
  }
  for (const auto& e : g.brokers) {
    if (e.empty()) bad("empty broker name");
  }

  for (const auto& l : g.links) {
    if (l.src == l.dst) bad("self-loop link " + to_string(l));
    if (!g.is_entity(l.src))
      bad("link " + to_string(l) + " references unknown entity '" + l.src +
          "'");
    if (!g.is_entity(l.dst))
      bad("link " + to_string(l) + " references unknown entity '" + l.dst +
          "'");
    if (g.is_device(l.src) && g.is_device(l.dst))
      bad("device-device link " + to_string(l));
    if (!g.has_link(l.reversed()))
      bad("asymmetric link " + to_string(l) + " (reverse direction missing)");
  }

  const BrokeringPolicy& bp = schema.brokering;
  for (const auto& l : g.links) {
    if (!bp.type_for(l)) bad("untyped link " + to_string(l));
  }
  for (const auto& [l, t] : bp.type_of) {
    if (!g.has_link(l))
      bad("type assigned to unknown link " + to_string(l));
    if (!bp.link_types.count(t))
      bad("link " + to_string(l) + " uses undeclared link type '" + t + "'");
  }
  for (const auto& [t1, t2] : bp.allow) {
    if (!bp.link_types.count(t1))
      bad("allow pair references undeclared link type '" + t1 + "'");
    if (!bp.link_types.count(t2))
      bad("allow pair references undeclared link type '" + t2 + "'");
  }

  for (const auto& [l, topics] : schema.subscriptions.by_link) {
    bool is_notify = g.is_broker(l.src) && g.is_device(l.dst) && g.has_link(l);
    if (!is_notify) {
      bad("subscription on non-notify link " + to_string(l));
    }
    for (const auto& t : topics) {
      if (!schema.events.alphabet.count(t))
        bad("subscription topic '" + t + "' on " + to_string(l) +
            " not in alphabet");
    }
  }

  for (const auto& [l, ea] : schema.events.monitors) {
    if (!g.has_link(l)) {
      bad("monitor assigned to unknown link " + to_string(l));
      continue;
    }
    if (g.is_entity(l.src) && g.is_entity(l.dst) &&
        classify(l, g) == LinkClass::Notify)
      bad("monitor assigned to notify link " + to_string(l));
    for (const auto& t : ea.mentioned_topics()) {
      if (!schema.events.alphabet.count(t))
        bad("automaton on " + to_string(l) + " names topic '" + t +
            "' not in alphabet");
    }
  }

  return report;
}

}  // namespace edgebus
