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

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace edgebus {

/// Error type shared by the whole library. Parse errors carry
/// "<origin>:<line>:" prefixes in the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What a state does with a topic that has no explicit edge.
/// Preserve/Suppress/Emit correspond to the wildcard labels
/// "*", "!*" and "*->w". A state with no wildcard edge gets
/// {Suppress, self}, the implicit "!*" self-loop.
enum class EaDefaultKind { Preserve, Suppress, Emit };

/**
 * An edit automaton: a finite-control event transformer with a total
 * transition function (state, topic) -> (state, topic sequence).
 *
 * An empty output sequence suppresses the input event, a singleton
 * passes or replaces it, and longer sequences inject events.
 *
 * The transition function is total over arbitrary topics: topics with
 * no explicit edge from the current state take the state's default
 * rule. An automaton may additionally declare a closed alphabet, in
 * which case step() rejects topics outside it.
 *
 * Instances are immutable after construction and safe to share across
 * threads; per-link mutable state is just the current state name,
 * owned by the caller.
 */
class EditAutomaton {
 public:
  struct Edge {
    std::string target;
    std::vector<std::string> outputs;
    bool operator==(const Edge&) const = default;
  };

  struct DefaultRule {
    EaDefaultKind kind = EaDefaultKind::Suppress;
    std::string target;
    std::vector<std::string> outputs;  // used when kind == Emit
    bool operator==(const DefaultRule&) const = default;
  };

  struct State {
    std::map<std::string, Edge> edges;
    DefaultRule fallback;
    bool operator==(const State&) const = default;
  };

  struct StepResult {
    std::string state;
    std::vector<std::string> output;
    bool operator==(const StepResult&) const = default;
  };

  EditAutomaton() : EditAutomaton(make_identity()) {}

  bool operator==(const EditAutomaton&) const = default;

  const std::string& initial() const { return initial_; }
  const std::map<std::string, State>& states() const { return states_; }
  const std::set<std::string>& alphabet() const { return alphabet_; }
  bool closed() const { return closed_; }

  bool has_state(const std::string& name) const {
    return states_.count(name) != 0;
  }

  /// The identity automaton: one state, every event preserved.
  static EditAutomaton identity() { return make_identity(); }

  /// True for the canonical identity form: a single state whose
  /// default rule preserves everything and that has no explicit edges.
  bool is_identity() const {
    if (states_.size() != 1) return false;
    const State& s = states_.begin()->second;
    return s.edges.empty() && s.fallback.kind == EaDefaultKind::Preserve &&
           s.fallback.target == initial_;
  }

  /// Event filter: passes topics in `allowed`, suppresses the rest.
  static EditAutomaton filter(const std::set<std::string>& allowed,
                              const std::set<std::string>& alphabet) {
    for (const auto& a : allowed) {
      if (!alphabet.count(a))
        throw Error("filter: allowed topic '" + a + "' not in alphabet");
    }
    EditAutomaton ea;
    ea.initial_ = "q0";
    State s;
    s.fallback = {EaDefaultKind::Suppress, "q0", {}};
    for (const auto& a : allowed) s.edges[a] = Edge{"q0", {a}};
    ea.states_ = {{"q0", std::move(s)}};
    ea.alphabet_ = alphabet;
    ea.closed_ = true;
    return ea;
  }

  /// Event mapper: renames every topic according to the total map `f`.
  static EditAutomaton mapper(const std::map<std::string, std::string>& f,
                              const std::set<std::string>& alphabet) {
    EditAutomaton ea;
    ea.initial_ = "q0";
    State s;
    s.fallback = {EaDefaultKind::Suppress, "q0", {}};
    for (const auto& a : alphabet) {
      auto it = f.find(a);
      if (it == f.end())
        throw Error("mapper: map is partial, no image for topic '" + a + "'");
      if (!alphabet.count(it->second))
        throw Error("mapper: image topic '" + it->second +
                    "' not in alphabet");
      s.edges[a] = Edge{"q0", {it->second}};
    }
    ea.states_ = {{"q0", std::move(s)}};
    ea.alphabet_ = alphabet;
    ea.closed_ = true;
    return ea;
  }

  /// One transition. Honors the closed alphabet when declared.
  StepResult step(const std::string& state, const std::string& topic) const {
    if (closed_ && !alphabet_.count(topic))
      throw Error("step: topic '" + topic + "' not in automaton alphabet");
    return step_any(state, topic);
  }

  /// One transition with open-world topics: anything not explicitly
  /// named takes the state's default rule. Used on live broker links,
  /// where the alphabet cannot be assumed closed.
  StepResult step_any(const std::string& state,
                      const std::string& topic) const {
    auto it = states_.find(state);
    if (it == states_.end()) throw Error("step: unknown state '" + state + "'");
    const State& row = it->second;
    auto eit = row.edges.find(topic);
    if (eit != row.edges.end())
      return StepResult{eit->second.target, eit->second.outputs};
    switch (row.fallback.kind) {
      case EaDefaultKind::Preserve:
        return StepResult{row.fallback.target, {topic}};
      case EaDefaultKind::Emit:
        return StepResult{row.fallback.target, row.fallback.outputs};
      case EaDefaultKind::Suppress:
        break;
    }
    return StepResult{row.fallback.target, {}};
  }

  /// Left fold of step() from the initial state, concatenating outputs.
  std::vector<std::string> run(const std::vector<std::string>& input) const {
    std::string q = initial_;
    std::vector<std::string> out;
    for (const auto& a : input) {
      StepResult r = step(q, a);
      q = std::move(r.state);
      out.insert(out.end(), r.output.begin(), r.output.end());
    }
    return out;
  }

  /// Copy with a different declared alphabet. `closed` makes step()
  /// reject topics outside it; step_any is unaffected.
  EditAutomaton with_alphabet(std::set<std::string> alphabet,
                              bool closed) const {
    EditAutomaton copy = *this;
    copy.alphabet_ = std::move(alphabet);
    copy.closed_ = closed;
    return copy;
  }

  /// Every topic named by the automaton, triggers and outputs alike.
  std::set<std::string> mentioned_topics() const {
    std::set<std::string> topics;
    for (const auto& [name, st] : states_) {
      for (const auto& [trigger, e] : st.edges) {
        topics.insert(trigger);
        topics.insert(e.outputs.begin(), e.outputs.end());
      }
      if (st.fallback.kind == EaDefaultKind::Emit)
        topics.insert(st.fallback.outputs.begin(), st.fallback.outputs.end());
    }
    return topics;
  }

 private:
  friend class EaBuilder;

  static EditAutomaton make_identity() {
    EditAutomaton ea;
    ea.initial_ = "q0";
    State s;
    s.fallback = {EaDefaultKind::Preserve, "q0", {}};
    ea.states_ = {{"q0", std::move(s)}};
    return ea;
  }

  std::map<std::string, State> states_;
  std::string initial_;
  std::set<std::string> alphabet_;
  bool closed_ = false;
};

/**
 * Incremental construction of an edit automaton with the structural
 * checks of the transition-diagram conventions: no duplicate edge on
 * one (state, topic), at most one wildcard per state, all referenced
 * states declared, exactly one initial state (a state explicitly
 * marked, or failing that the state named "q0").
 */
class EaBuilder {
 public:
  EaBuilder& state(const std::string& name, bool initial = false) {
    if (name.empty()) throw Error("state name must be non-empty");
    if (rows_.count(name))
      throw Error("duplicate declaration of state '" + name + "'");
    rows_[name];  // default row, fallback patched in build()
    order_.push_back(name);
    if (initial) {
      if (!initial_.empty())
        throw Error("more than one initial state ('" + initial_ + "' and '" +
                    name + "')");
      initial_ = name;
    }
    return *this;
  }

  /// Explicit edge. outputs carries the normalized label: {trigger}
  /// for "a", {} for "!a", the listed sequence for "a->w1,w2,...".
  EaBuilder& edge(const std::string& from, const std::string& trigger,
                  const std::string& to, std::vector<std::string> outputs) {
    Row& row = row_for(from);
    if (row.edges.count(trigger))
      throw Error("duplicate transition from state '" + from + "' on topic '" +
                  trigger + "'");
    row.edges[trigger] = EditAutomaton::Edge{to, std::move(outputs)};
    targets_.insert(to);
    return *this;
  }

  /// Wildcard edge ("*", "!*" or "*->w...") from `from` to `to`.
  EaBuilder& wildcard(const std::string& from, EaDefaultKind kind,
                      const std::string& to,
                      std::vector<std::string> outputs = {}) {
    Row& row = row_for(from);
    if (row.has_wildcard)
      throw Error("more than one wildcard edge from state '" + from + "'");
    row.has_wildcard = true;
    row.fallback = EditAutomaton::DefaultRule{kind, to, std::move(outputs)};
    targets_.insert(to);
    return *this;
  }

  EditAutomaton build(std::set<std::string> alphabet = {},
                      bool closed = false) {
    if (rows_.empty()) throw Error("automaton has no states");
    std::string initial = initial_;
    if (initial.empty()) {
      if (!rows_.count("q0"))
        throw Error("no initial state: mark one or name it q0");
      initial = "q0";
    }
    for (const auto& t : targets_) {
      if (!rows_.count(t)) throw Error("undeclared state '" + t + "'");
    }
    EditAutomaton ea;
    ea.initial_ = initial;
    for (const auto& name : order_) {
      Row& row = rows_[name];
      EditAutomaton::State st;
      st.edges = std::move(row.edges);
      if (row.has_wildcard) {
        st.fallback = std::move(row.fallback);
      } else {
        st.fallback = {EaDefaultKind::Suppress, name, {}};
      }
      ea.states_.emplace(name, std::move(st));
    }
    ea.alphabet_ = std::move(alphabet);
    ea.closed_ = closed;
    return ea;
  }

 private:
  struct Row {
    std::map<std::string, EditAutomaton::Edge> edges;
    bool has_wildcard = false;
    EditAutomaton::DefaultRule fallback;
  };

  Row& row_for(const std::string& name) {
    auto it = rows_.find(name);
    if (it == rows_.end())
      throw Error("edge from undeclared state '" + name + "'");
    return it->second;
  }

  std::map<std::string, Row> rows_;
  std::vector<std::string> order_;
  std::set<std::string> targets_;
  std::string initial_;
};

}  // namespace edgebus
