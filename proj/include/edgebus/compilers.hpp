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

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "edgebus/schema.hpp"
#include "edgebus/strings.hpp"

namespace edgebus::policy {

/**
 * Compilation of high-level policies into schemas: an up/down broker
 * hierarchy realizing the common-ancestor scoping rule, and
 * RBAC-style protection domains built from per-role broker pairs,
 * a relay bus, six link types and filtering monitors.
 */

/// parent(child, parent): `parent` encloses `child`. Devices are
/// always leaves; chains must be acyclic.
struct ParenthoodRelation {
  std::set<std::pair<std::string, std::string>> child_parent;

  std::set<std::string> parents_of(const std::string& e) const {
    std::set<std::string> out;
    for (const auto& [c, p] : child_parent)
      if (c == e) out.insert(p);
    return out;
  }
};

struct HierarchyPolicy {
  std::set<std::string> devices;
  std::set<std::string> brokers;
  ParenthoodRelation parenthood;
};

namespace detail {

inline void check_acyclic(const HierarchyPolicy& policy) {
  // Kahn-style peel; anything left sits on a cycle.
  std::map<std::string, int> out_degree;
  std::map<std::string, std::set<std::string>> rev;
  std::set<std::string> nodes;
  for (const auto& [c, p] : policy.parenthood.child_parent) {
    if (c == p) throw Error("cyclic parenthood: '" + c + "' is its own parent");
    out_degree[c]++;
    rev[p].insert(c);
    nodes.insert(c);
    nodes.insert(p);
  }
  std::vector<std::string> roots;
  for (const auto& n : nodes)
    if (!out_degree.count(n)) roots.push_back(n);
  size_t seen = roots.size();
  while (!roots.empty()) {
    std::string n = roots.back();
    roots.pop_back();
    for (const auto& c : rev[n]) {
      if (--out_degree[c] == 0) {
        roots.push_back(c);
        ++seen;
      }
    }
  }
  if (seen != nodes.size()) throw Error("cyclic parenthood chain");
}

}  // namespace detail

/**
 * Builds the connection graph and brokering policy that realize the
 * scoping rule: links to a parent are typed "up", links to a child
 * "down", and everything is allowed except forwarding from a "down"
 * link to an "up" link. Events climb, then descend, never climb
 * again, so visibility is exactly common ancestry.
 *
 * The result has an empty alphabet and no subscriptions; callers add
 * those for simulation.
 */
inline Schema compile_hierarchy(const HierarchyPolicy& policy) {
  for (const auto& [c, p] : policy.parenthood.child_parent) {
    if (policy.devices.count(p))
      throw Error("device '" + p + "' cannot be a parent");
    if (!policy.devices.count(c) && !policy.brokers.count(c))
      throw Error("parenthood references undeclared entity '" + c + "'");
    if (!policy.brokers.count(p))
      throw Error("parenthood references undeclared broker '" + p + "'");
  }
  detail::check_acyclic(policy);

  Schema s;
  s.graph.devices = policy.devices;
  s.graph.brokers = policy.brokers;
  s.brokering.link_types = {"up", "down"};
  for (const auto& t1 : s.brokering.link_types)
    for (const auto& t2 : s.brokering.link_types)
      if (!(t1 == "down" && t2 == "up")) s.brokering.allow.insert({t1, t2});

  for (const auto& [c, p] : policy.parenthood.child_parent) {
    Link up{c, p}, down{p, c};
    s.graph.links.insert(up);
    s.graph.links.insert(down);
    s.brokering.type_of[up] = "up";
    s.brokering.type_of[down] = "down";
  }
  return s;
}

/**
 * An RBAC-style protection-domain policy. `wants` is the per-device
 * subscription choice; a device with no entry subscribes to every
 * topic (the role filters still gate what it can receive).
 * `senior_of` (junior, senior) pairs request the role-hierarchy
 * extension: seniors inherit the junior roles' publishable and
 * subscribable events.
 */
struct RbacPolicy {
  std::set<std::string> devices;
  std::set<std::string> roles;
  std::set<std::pair<std::string, std::string>> ua;  // (device, role)
  std::map<std::string, std::set<std::string>> pub_of;
  std::map<std::string, std::set<std::string>> sub_of;
  std::set<std::string> topics;
  std::map<std::string, std::set<std::string>> wants;
  std::set<std::pair<std::string, std::string>> senior_of;  // (junior, senior)

  std::set<std::string> roles_of(const std::string& d) const {
    std::set<std::string> out;
    for (const auto& [dev, r] : ua)
      if (dev == d) out.insert(r);
    return out;
  }

  std::set<std::string> effective_wants(const std::string& d) const {
    auto it = wants.find(d);
    return it == wants.end() ? topics : it->second;
  }
};

inline std::string pub_broker(const std::string& role) { return role + ".pub"; }
inline std::string sub_broker(const std::string& role) { return role + ".sub"; }

namespace detail {

inline void check_rbac(const RbacPolicy& p) {
  for (const auto& [d, r] : p.ua) {
    if (!p.devices.count(d))
      throw Error("role assignment references undeclared device '" + d + "'");
    if (!p.roles.count(r))
      throw Error("role assignment references undeclared role '" + r + "'");
  }
  auto check_topic_map = [&](const std::map<std::string, std::set<std::string>>&
                                 m,
                             const char* what) {
    for (const auto& [r, ts] : m) {
      if (!p.roles.count(r))
        throw Error(std::string(what) + " references undeclared role '" + r +
                    "'");
      for (const auto& t : ts)
        if (!p.topics.count(t))
          throw Error(std::string(what) + " references undeclared topic '" +
                      t + "'");
    }
  };
  check_topic_map(p.pub_of, "pub set");
  check_topic_map(p.sub_of, "sub set");
  for (const auto& [j, s] : p.senior_of) {
    if (!p.roles.count(j) || !p.roles.count(s))
      throw Error("role hierarchy references undeclared role");
    if (j == s) throw Error("role '" + j + "' cannot be its own senior");
  }
  // The seniority relation must be acyclic or events would circulate.
  {
    std::map<std::string, std::set<std::string>> seniors;
    for (const auto& [j, s] : p.senior_of) seniors[j].insert(s);
    for (const auto& r : p.roles) {
      std::set<std::string> seen;
      std::vector<std::string> stack{r};
      while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        for (const auto& s : seniors[cur]) {
          if (s == r) throw Error("cyclic role hierarchy through '" + r + "'");
          if (seen.insert(s).second) stack.push_back(s);
        }
      }
    }
  }
  for (const auto& d : p.devices) {
    if (d == "Bus") throw Error("device name 'Bus' collides with the relay broker");
    for (const auto& r : p.roles) {
      if (d == pub_broker(r) || d == sub_broker(r))
        throw Error("device name '" + d + "' collides with a role broker");
    }
  }
}

inline std::set<std::string> role_topics(
    const std::map<std::string, std::set<std::string>>& m,
    const std::string& r) {
  auto it = m.find(r);
  return it == m.end() ? std::set<std::string>{} : it->second;
}

}  // namespace detail

/**
 * The protection-domain construction: per role r, a publication
 * broker r.pub and a subscription broker r.sub, both bridged to a
 * relay broker Bus. Devices link to the brokers of their roles. The
 * allow table admits exactly device -> pub broker -> Bus -> sub
 * broker -> device, and filters on (r.pub, Bus) and (Bus, r.sub)
 * restrict traffic to pub(r) and sub(r).
 */
inline Schema compile_rbac(const RbacPolicy& policy) {
  detail::check_rbac(policy);

  Schema s;
  s.graph.devices = policy.devices;
  s.graph.brokers.insert("Bus");
  s.events.alphabet = policy.topics;
  s.brokering.link_types = {"SubUp",  "SubDown", "PubUp",
                            "PubDown", "DevUp",  "DevDown"};
  s.brokering.allow = {{"PubUp", "SubDown"},
                       {"DevUp", "PubUp"},
                       {"SubDown", "DevDown"}};

  auto add_link = [&s](const std::string& x, const std::string& y,
                       const std::string& txy, const std::string& tyx) {
    Link fwd{x, y}, rev{y, x};
    s.graph.links.insert(fwd);
    s.graph.links.insert(rev);
    s.brokering.type_of[fwd] = txy;
    s.brokering.type_of[rev] = tyx;
  };

  for (const auto& r : policy.roles) {
    const std::string rp = pub_broker(r), rs = sub_broker(r);
    s.graph.brokers.insert(rp);
    s.graph.brokers.insert(rs);
    add_link(rp, "Bus", "PubUp", "PubDown");
    add_link(rs, "Bus", "SubUp", "SubDown");
    s.events.monitors[Link{rp, "Bus"}] = EditAutomaton::filter(
        detail::role_topics(policy.pub_of, r), policy.topics);
    s.events.monitors[Link{"Bus", rs}] = EditAutomaton::filter(
        detail::role_topics(policy.sub_of, r), policy.topics);
  }

  for (const auto& [d, r] : policy.ua) {
    add_link(d, pub_broker(r), "DevUp", "DevDown");
    add_link(d, sub_broker(r), "DevUp", "DevDown");
    Link notify{sub_broker(r), d};
    for (const auto& t : policy.effective_wants(d))
      s.subscriptions.by_link[notify].insert(t);
  }

  // Role hierarchy: seniors reach junior filters going down the pub
  // side, junior-admitted events climb the sub side. The two extra
  // allow pairs are inert without hierarchy links.
  if (!policy.senior_of.empty()) {
    s.brokering.allow.insert({"PubUp", "PubUp"});
    s.brokering.allow.insert({"SubDown", "SubDown"});
    for (const auto& [junior, senior] : policy.senior_of) {
      add_link(pub_broker(senior), pub_broker(junior), "PubUp", "PubDown");
      add_link(sub_broker(junior), sub_broker(senior), "SubDown", "SubUp");
    }
  }

  return s;
}

/// Direct evaluation of the RBAC delivery predicate: publisher may
/// send the topic under some role, subscriber may receive it under
/// some role, and the subscriber asked for it.
inline bool rbac_oracle(const RbacPolicy& policy, const std::string& publisher,
                        const std::string& topic,
                        const std::string& subscriber) {
  if (!policy.devices.count(publisher))
    throw Error("rbac_oracle: undeclared device '" + publisher + "'");
  if (!policy.devices.count(subscriber))
    throw Error("rbac_oracle: undeclared device '" + subscriber + "'");

  // Senior roles inherit junior pub/sub sets transitively.
  auto inherited = [&policy](const std::string& role,
                             const std::map<std::string, std::set<std::string>>&
                                 base) {
    std::set<std::string> topics = detail::role_topics(base, role);
    std::vector<std::string> stack{role};
    std::set<std::string> seen{role};
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      for (const auto& [junior, senior] : policy.senior_of) {
        if (senior != cur || seen.count(junior)) continue;
        seen.insert(junior);
        stack.push_back(junior);
        auto jt = detail::role_topics(base, junior);
        topics.insert(jt.begin(), jt.end());
      }
    }
    return topics;
  };

  bool can_publish = false;
  for (const auto& r : policy.roles_of(publisher))
    if (inherited(r, policy.pub_of).count(topic)) can_publish = true;
  bool can_receive = false;
  for (const auto& r : policy.roles_of(subscriber))
    if (inherited(r, policy.sub_of).count(topic)) can_receive = true;
  return can_publish && can_receive &&
         policy.effective_wants(subscriber).count(topic) != 0;
}

/// Hierarchy policy documents: `broker <n>`, `device <n>`,
/// `parent <child> <parent>`.
inline HierarchyPolicy parse_hierarchy_policy(
    const std::string& text, const std::string& origin = "<hierarchy>") {
  HierarchyPolicy p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = strings::split_ws(strings::strip_comment(line));
    if (tok.empty()) continue;
    auto fail = [&](const std::string& m) {
      throw Error(origin + ":" + std::to_string(lineno) + ": " + m);
    };
    if (tok[0] == "broker" && tok.size() == 2) {
      if (p.brokers.count(tok[1]) || p.devices.count(tok[1]))
        fail("duplicate declaration of entity '" + tok[1] + "'");
      p.brokers.insert(tok[1]);
    } else if (tok[0] == "device" && tok.size() == 2) {
      if (p.brokers.count(tok[1]) || p.devices.count(tok[1]))
        fail("duplicate declaration of entity '" + tok[1] + "'");
      p.devices.insert(tok[1]);
    } else if (tok[0] == "parent" && tok.size() == 3) {
      p.parenthood.child_parent.insert({tok[1], tok[2]});
    } else {
      fail("expected 'broker <n>', 'device <n>' or 'parent <child> <parent>'");
    }
  }
  return p;
}

/// RBAC policy documents: `role`, `device`, `topic`, `member <device>
/// <role>`, `pub <role> <topic>`, `sub <role> <topic>`, `want
/// <device> <topic>`, `senior <senior> <junior>`.
inline RbacPolicy parse_rbac_policy(const std::string& text,
                                    const std::string& origin = "<rbac>") {
  RbacPolicy p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = strings::split_ws(strings::strip_comment(line));
    if (tok.empty()) continue;
    auto fail = [&](const std::string& m) {
      throw Error(origin + ":" + std::to_string(lineno) + ": " + m);
    };
    if (tok[0] == "role" && tok.size() == 2) {
      if (!p.roles.insert(tok[1]).second)
        fail("duplicate role '" + tok[1] + "'");
    } else if (tok[0] == "device" && tok.size() == 2) {
      if (!p.devices.insert(tok[1]).second)
        fail("duplicate device '" + tok[1] + "'");
    } else if (tok[0] == "topic" && tok.size() == 2) {
      if (!p.topics.insert(tok[1]).second)
        fail("duplicate topic '" + tok[1] + "'");
    } else if (tok[0] == "member" && tok.size() == 3) {
      p.ua.insert({tok[1], tok[2]});
    } else if (tok[0] == "pub" && tok.size() == 3) {
      p.pub_of[tok[1]].insert(tok[2]);
    } else if (tok[0] == "sub" && tok.size() == 3) {
      p.sub_of[tok[1]].insert(tok[2]);
    } else if (tok[0] == "want" && tok.size() == 3) {
      p.wants[tok[1]].insert(tok[2]);
    } else if (tok[0] == "senior" && tok.size() == 3) {
      p.senior_of.insert({tok[2], tok[1]});  // stored as (junior, senior)
    } else {
      fail("unknown directive '" + tok[0] + "'");
    }
  }
  return p;
}

}  // namespace edgebus::policy
