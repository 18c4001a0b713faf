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
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "edgebus/schema.hpp"

namespace edgebus::sim {

/// transmit(x, y, a): event a is in flight on link (x, y).
struct TransmitTask {
  std::string src;
  std::string dst;
  std::string topic;
  auto operator<=>(const TransmitTask&) const = default;
};

/// broker(x, y, w): broker y processes the event sequence w that
/// arrived over link (x, y); x is remembered for the no-echo rule.
struct BrokerTask {
  std::string src;
  std::string at;
  std::vector<std::string> events;
  auto operator<=>(const BrokerTask&) const = default;
};

using Task = std::variant<TransmitTask, BrokerTask>;

/// A task with its generation time and the generation time of the
/// publication it derives from. `seq` is a stable insertion id used
/// only for deterministic tie-breaking and work-list bookkeeping.
struct AnnotatedTask {
  Task task;
  std::uint64_t t_gen = 0;
  std::uint64_t t_pub = 0;
  std::uint64_t seq = 0;
  auto operator<=>(const AnnotatedTask&) const = default;
};

inline std::string to_string(const Task& task) {
  std::ostringstream out;
  if (const auto* t = std::get_if<TransmitTask>(&task)) {
    out << "transmit(" << t->src << "->" << t->dst << ", " << t->topic << ")";
  } else {
    const auto& b = std::get<BrokerTask>(task);
    out << "broker(" << b.src << "->" << b.at << ", [";
    for (size_t i = 0; i < b.events.size(); ++i)
      out << (i ? " " : "") << b.events[i];
    out << "])";
  }
  return out.str();
}

inline std::string to_string(const AnnotatedTask& a) {
  return to_string(a.task) + " gen=" + std::to_string(a.t_gen) +
         " pub=" + std::to_string(a.t_pub);
}

/// Strict partial order over annotated tasks: ordering(a, b) means a
/// must be discharged before b. Different orderings simulate
/// different relative network speeds.
using TaskOrdering =
    std::function<bool(const AnnotatedTask&, const AnnotatedTask&)>;

/// Everything is incomparable; maximal nondeterminism.
inline TaskOrdering trivial_ordering() {
  return [](const AnnotatedTask&, const AnnotatedTask&) { return false; };
}

/// Brokering happens "instantaneously": broker tasks precede transmit
/// tasks, and transmits on one link are FIFO by generation time. This
/// approximates a real single-threaded broker.
inline TaskOrdering broker_fifo_ordering() {
  return [](const AnnotatedTask& a, const AnnotatedTask& b) {
    bool a_broker = std::holds_alternative<BrokerTask>(a.task);
    bool b_broker = std::holds_alternative<BrokerTask>(b.task);
    if (a_broker && !b_broker) return true;
    if (!a_broker && !b_broker) {
      const auto& ta = std::get<TransmitTask>(a.task);
      const auto& tb = std::get<TransmitTask>(b.task);
      if (ta.src == tb.src && ta.dst == tb.dst) return a.t_gen < b.t_gen;
    }
    return false;
  };
}

inline TaskOrdering task_ordering(const std::string& name) {
  if (name == "trivial") return trivial_ordering();
  if (name == "fifo") return broker_fifo_ordering();
  throw Error("unknown task ordering '" + name + "'");
}

/// Global state: clock, per-monitored-link automaton states, and the
/// work list of pending annotated tasks.
struct SystemState {
  std::uint64_t clock = 0;
  std::map<Link, std::string> ea_states;
  std::vector<AnnotatedTask> work_list;
  std::uint64_t next_seq = 0;
};

/// The initial state: clock 0, every monitored link's automaton at its
/// initial state, empty work list.
inline SystemState initial_state(const Schema& schema) {
  SystemState st;
  for (const auto& l : schema.graph.links) {
    if (monitored(l, schema.graph))
      st.ea_states[l] = schema.events.monitor_on(l).initial();
  }
  return st;
}

/// All minimal elements of the work list under the ordering — the set
/// the scheduler may choose from. Empty iff the work list is empty.
inline std::vector<AnnotatedTask> select(
    const std::vector<AnnotatedTask>& work_list, const TaskOrdering& before) {
  std::vector<AnnotatedTask> minimal;
  for (const auto& a : work_list) {
    bool dominated = false;
    for (const auto& b : work_list) {
      if (b.seq != a.seq && before(b, a)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) minimal.push_back(a);
  }
  return minimal;
}

namespace detail {

inline LinkClass class_of(const Schema& schema, const std::string& x,
                          const std::string& y) {
  return classify(Link{x, y}, schema.graph);
}

inline bool in_work_list(const SystemState& st, const AnnotatedTask& a) {
  for (const auto& t : st.work_list)
    if (t == a) return true;
  return false;
}

inline void erase_task(SystemState& st, const AnnotatedTask& a) {
  for (auto it = st.work_list.begin(); it != st.work_list.end(); ++it) {
    if (*it == a) {
      st.work_list.erase(it);
      return;
    }
  }
}

inline void require_selected(const Schema& schema, const TaskOrdering& before,
                             const SystemState& st, const AnnotatedTask& a,
                             const char* rule) {
  (void)schema;
  if (!in_work_list(st, a))
    throw Error(std::string(rule) + ": task not in work list: " +
                sim::to_string(a));
  for (const auto& b : st.work_list) {
    if (b.seq != a.seq && before(b, a))
      throw Error(std::string(rule) + ": task is not minimal: " +
                  sim::to_string(a));
  }
}

inline AnnotatedTask push(SystemState& st, Task task, std::uint64_t t_gen,
                          std::uint64_t t_pub) {
  AnnotatedTask a{std::move(task), t_gen, t_pub, st.next_seq++};
  st.work_list.push_back(a);
  return a;
}

}  // namespace detail

/// T-Publish: device publishes an event to a broker it is linked to.
/// Adds transmit(device, broker, topic) stamped with the current
/// clock as both generation and publication time.
inline SystemState t_publish(const Schema& schema, SystemState st,
                             const std::string& device,
                             const std::string& broker,
                             const std::string& topic,
                             AnnotatedTask* out_created = nullptr) {
  if (detail::class_of(schema, device, broker) != LinkClass::Publish)
    throw Error("t_publish: " + device + "->" + broker +
                " is not a publish link");
  if (!schema.events.alphabet.count(topic))
    throw Error("t_publish: topic '" + topic + "' not in alphabet");
  AnnotatedTask created = detail::push(
      st, TransmitTask{device, broker, topic}, st.clock, st.clock);
  if (out_created) *out_created = created;
  st.clock += 1;
  return st;
}

/// T-Notify: a transmit on a notify link delivers the event to the
/// device and is consumed; delivery is terminal.
inline SystemState t_notify(const Schema& schema, const TaskOrdering& before,
                            SystemState st, const AnnotatedTask& a) {
  detail::require_selected(schema, before, st, a, "t_notify");
  const auto* t = std::get_if<TransmitTask>(&a.task);
  if (!t) throw Error("t_notify: not a transmit task: " + sim::to_string(a));
  if (detail::class_of(schema, t->src, t->dst) != LinkClass::Notify)
    throw Error("t_notify: " + t->src + "->" + t->dst +
                " is not a notify link");
  detail::erase_task(st, a);
  st.clock += 1;
  return st;
}

/// T-Deliver: a transmit on a monitored link runs the link's edit
/// automaton; a broker task carries the (possibly rewritten) output
/// onward unless the automaton suppressed everything.
inline SystemState t_deliver(const Schema& schema, const TaskOrdering& before,
                             SystemState st, const AnnotatedTask& a,
                             std::vector<AnnotatedTask>* out_created = nullptr) {
  detail::require_selected(schema, before, st, a, "t_deliver");
  const auto* t = std::get_if<TransmitTask>(&a.task);
  if (!t) throw Error("t_deliver: not a transmit task: " + sim::to_string(a));
  Link link{t->src, t->dst};
  if (detail::class_of(schema, t->src, t->dst) == LinkClass::Notify)
    throw Error("t_deliver: " + to_string(link) + " is not a monitored link");

  const EditAutomaton& ea = schema.events.monitor_on(link);
  auto r = ea.step(st.ea_states.at(link), t->topic);
  st.ea_states[link] = r.state;
  detail::erase_task(st, a);
  if (!r.output.empty()) {
    AnnotatedTask created = detail::push(
        st, BrokerTask{t->src, t->dst, std::move(r.output)}, st.clock,
        a.t_pub);
    if (out_created) out_created->push_back(created);
  }
  st.clock += 1;
  return st;
}

/// T-Broker: broker y takes the first event of a received sequence,
/// creates transmits to every bridge neighbour and every subscribed
/// device permitted by the brokering policy (never echoing back to
/// the task's source), and keeps the rest of the sequence as a
/// residual broker task.
inline SystemState t_broker(const Schema& schema, const TaskOrdering& before,
                            SystemState st, const AnnotatedTask& a,
                            std::vector<AnnotatedTask>* out_created = nullptr) {
  detail::require_selected(schema, before, st, a, "t_broker");
  const auto* b = std::get_if<BrokerTask>(&a.task);
  if (!b) throw Error("t_broker: not a broker task: " + sim::to_string(a));
  if (b->events.empty())
    throw Error("t_broker: empty event sequence: " + sim::to_string(a));
  if (!schema.graph.is_broker(b->at))
    throw Error("t_broker: '" + b->at + "' is not a broker");

  const std::string& x = b->src;
  const std::string& y = b->at;
  const std::string& head = b->events.front();
  std::vector<std::string> rest(b->events.begin() + 1, b->events.end());

  detail::erase_task(st, a);
  std::uint64_t now = st.clock;
  if (!rest.empty()) {
    AnnotatedTask res =
        detail::push(st, BrokerTask{x, y, std::move(rest)}, now, a.t_pub);
    if (out_created) out_created->push_back(res);
  }
  for (const auto& z : schema.graph.brokers) {
    if (z == x) continue;
    if (!schema.graph.has_link(y, z)) continue;
    if (!propagate(schema, x, y, z)) continue;
    AnnotatedTask tr =
        detail::push(st, TransmitTask{y, z, head}, now, a.t_pub);
    if (out_created) out_created->push_back(tr);
  }
  for (const auto& z : schema.graph.devices) {
    if (z == x) continue;
    Link notify_link{y, z};
    if (!schema.graph.has_link(notify_link)) continue;
    if (!schema.subscriptions.subscribed(notify_link, head)) continue;
    if (!propagate(schema, x, y, z)) continue;
    AnnotatedTask tr =
        detail::push(st, TransmitTask{y, z, head}, now, a.t_pub);
    if (out_created) out_created->push_back(tr);
  }
  st.clock += 1;
  return st;
}

/// Picks one task out of select()'s minimal set; must be
/// deterministic given its construction so runs are reproducible.
using Scheduler = std::function<size_t(const std::vector<AnnotatedTask>&)>;

/// Lexicographic tie-break over a canonical task key.
inline Scheduler lex_scheduler() {
  return [](const std::vector<AnnotatedTask>& choices) {
    size_t best = 0;
    auto key = [](const AnnotatedTask& a) {
      return std::make_tuple(a.task.index(), sim::to_string(a.task), a.t_gen,
                             a.t_pub, a.seq);
    };
    for (size_t i = 1; i < choices.size(); ++i)
      if (key(choices[i]) < key(choices[best])) best = i;
    return best;
  };
}

/// Seeded tie-break; identical seeds give identical runs.
inline Scheduler random_scheduler(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const std::vector<AnnotatedTask>& choices) {
    return static_cast<size_t>((*rng)() % choices.size());
  };
}

struct Publication {
  std::string device;
  std::string broker;
  std::string topic;
  std::optional<std::uint64_t> at;  // absent: apply once quiescent
};

struct TraceEvent {
  std::uint64_t clock = 0;  // clock when the rule fired
  std::string rule;
  AnnotatedTask fired;
  std::vector<AnnotatedTask> added;
};

struct Trace {
  std::vector<TraceEvent> events;
  // Per-device delivered topic sequences, in notification order.
  std::map<std::string, std::vector<std::string>> delivered;
  SystemState final_state;
};

struct RunOptions {
  std::optional<std::string> ordering;  // default: schema.task_ordering
  Scheduler scheduler = lex_scheduler();
  std::uint64_t max_steps = 0;  // 0: 10000 x max(1, |publications|)
};

/**
 * Drives the transition rules to quiescence. Publications without a
 * scheduled time are serialized: each is applied only once the work
 * list has drained. Publications with a time are applied as soon as
 * the clock reaches it (jumping the clock forward when the system is
 * idle). Script order is preserved either way.
 *
 * Aborts with a diagnostic once max_steps rule firings have happened;
 * cyclic broker graphs with permissive policies need not terminate.
 */
inline Trace run_to_quiescence(const Schema& schema,
                               const std::vector<Publication>& publications,
                               const RunOptions& options = {}) {
  TaskOrdering before =
      task_ordering(options.ordering.value_or(schema.task_ordering));
  std::uint64_t max_steps =
      options.max_steps ? options.max_steps
                        : 10000 * std::max<std::uint64_t>(
                                      1, publications.size());

  Trace trace;
  SystemState st = initial_state(schema);
  size_t next_pub = 0;
  std::uint64_t steps = 0;

  auto fire_publish = [&](const Publication& p) {
    AnnotatedTask created;
    std::uint64_t at = st.clock;
    st = t_publish(schema, std::move(st), p.device, p.broker, p.topic,
                   &created);
    trace.events.push_back(TraceEvent{at, "T-Publish", created, {created}});
  };

  while (true) {
    // Timed publications due now go first, in script order.
    while (next_pub < publications.size() && publications[next_pub].at &&
           *publications[next_pub].at <= st.clock) {
      fire_publish(publications[next_pub++]);
    }
    if (st.work_list.empty()) {
      if (next_pub >= publications.size()) break;
      const Publication& p = publications[next_pub];
      if (p.at && *p.at > st.clock) st.clock = *p.at;
      fire_publish(p);
      ++next_pub;
      continue;
    }

    if (++steps > max_steps)
      throw Error("run_to_quiescence: step bound " +
                  std::to_string(max_steps) + " exceeded with " +
                  std::to_string(st.work_list.size()) +
                  " tasks pending; the schema likely contains a " +
                  "propagation cycle");

    std::vector<AnnotatedTask> minimal = select(st.work_list, before);
    const AnnotatedTask chosen = minimal[options.scheduler(minimal)];

    TraceEvent ev;
    ev.clock = st.clock;
    ev.fired = chosen;
    if (std::holds_alternative<BrokerTask>(chosen.task)) {
      ev.rule = "T-Broker";
      st = t_broker(schema, before, std::move(st), chosen, &ev.added);
    } else {
      const auto& t = std::get<TransmitTask>(chosen.task);
      if (detail::class_of(schema, t.src, t.dst) == LinkClass::Notify) {
        ev.rule = "T-Notify";
        st = t_notify(schema, before, std::move(st), chosen);
        trace.delivered[t.dst].push_back(t.topic);
      } else {
        ev.rule = "T-Deliver";
        st = t_deliver(schema, before, std::move(st), chosen, &ev.added);
      }
    }
    trace.events.push_back(std::move(ev));
  }

  trace.final_state = std::move(st);
  return trace;
}

/// Parses a publications script: `publish <device> <broker> <topic> [@t]`
inline std::vector<Publication> parse_publications(
    const std::string& text, const std::string& origin = "<script>") {
  std::vector<Publication> pubs;
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
    if (tok[0] != "publish") fail("unknown directive '" + tok[0] + "'");
    if (tok.size() != 4 && tok.size() != 5)
      fail("expected 'publish <device> <broker> <topic> [@t]'");
    Publication p{tok[1], tok[2], tok[3], std::nullopt};
    if (tok.size() == 5) {
      if (tok[4].empty() || tok[4][0] != '@') fail("expected '@<time>'");
      try {
        p.at = std::stoull(tok[4].substr(1));
      } catch (...) {
        fail("bad time '" + tok[4] + "'");
      }
    }
    pubs.push_back(std::move(p));
  }
  return pubs;
}

/// Human- and machine-readable trace text, one rule firing per line,
/// then one delivery summary line per device.
inline std::string render_trace(const Trace& trace) {
  std::ostringstream out;
  for (const auto& ev : trace.events) {
    out << "t=" << ev.clock << " " << ev.rule << " "
        << sim::to_string(ev.fired.task);
    if (!ev.added.empty()) {
      out << " =>";
      for (const auto& a : ev.added) out << " " << sim::to_string(a.task);
    }
    out << "\n";
  }
  for (const auto& [device, topics] : trace.delivered) {
    out << "delivered " << device << ":";
    for (const auto& t : topics) out << " " << t;
    out << "\n";
  }
  return out.str();
}

}  // namespace edgebus::sim
