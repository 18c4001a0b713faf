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
#include <sstream>
#include <string>
#include <vector>

#include "edgebus/automaton.hpp"
#include "edgebus/strings.hpp"

namespace edgebus {

/**
 * Line-oriented edit-automaton documents:
 *
 *   state <name> [initial]
 *   edge <from> <label> <to>
 *
 * with label one of
 *
 *   a            preserve a           (a -> a)
 *   !a           suppress a           (a -> empty)
 *   a->w1,w2     transform a          (a -> w1 w2 ...)
 *   *            preserve the rest
 *   !*           suppress the rest
 *   *->w1,w2     transform the rest
 *
 * "the rest" means every topic without an explicit edge from the same
 * state. A state with no wildcard edge implicitly suppresses unlisted
 * topics in place. '#' starts a comment.
 */

namespace detail {

inline void apply_ea_line(EaBuilder& b, const std::vector<std::string>& tok,
                          const std::string& where) {
  if (tok[0] == "state") {
    if (tok.size() == 2) {
      b.state(tok[1]);
    } else if (tok.size() == 3 && tok[2] == "initial") {
      b.state(tok[1], true);
    } else {
      throw Error(where + ": expected 'state <name> [initial]'");
    }
    return;
  }
  if (tok[0] == "edge") {
    if (tok.size() != 4)
      throw Error(where + ": expected 'edge <from> <label> <to>'");
    const std::string& from = tok[1];
    const std::string& label = tok[2];
    const std::string& to = tok[3];

    bool negated = label.size() > 1 && label[0] == '!';
    std::string body = negated ? label.substr(1) : label;
    std::string trigger = body;
    std::vector<std::string> outputs;
    bool has_arrow = false;

    size_t arrow = body.find("->");
    if (arrow != std::string::npos) {
      has_arrow = true;
      trigger = body.substr(0, arrow);
      std::string rhs = body.substr(arrow + 2);
      if (rhs.empty())
        throw Error(where + ": empty output list (use !" + trigger +
                    " to suppress)");
      for (auto& w : strings::split(rhs, ',')) {
        if (w.empty()) throw Error(where + ": empty output topic in label");
        outputs.push_back(w);
      }
    }
    if (trigger.empty()) throw Error(where + ": empty trigger in label");
    if (negated && has_arrow)
      throw Error(where + ": '!' cannot be combined with '->'");

    if (trigger == "*") {
      EaDefaultKind kind = negated ? EaDefaultKind::Suppress
                           : has_arrow ? EaDefaultKind::Emit
                                       : EaDefaultKind::Preserve;
      b.wildcard(from, kind, to, std::move(outputs));
    } else {
      if (!negated && !has_arrow) outputs = {trigger};
      b.edge(from, trigger, to, std::move(outputs));
    }
    return;
  }
  throw Error(where + ": unknown directive '" + tok[0] + "'");
}

}  // namespace detail

/// Parses an automaton document. `origin` names the source in errors.
inline EditAutomaton parse_ea(const std::string& text,
                              const std::string& origin = "<ea>") {
  EaBuilder b;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_anything = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = strings::split_ws(strings::strip_comment(line));
    if (tok.empty()) continue;
    saw_anything = true;
    detail::apply_ea_line(b, tok, origin + ":" + std::to_string(lineno));
  }
  if (!saw_anything) throw Error(origin + ": empty automaton document");
  try {
    return b.build();
  } catch (const Error& e) {
    throw Error(origin + ": " + e.what());
  }
}

inline EditAutomaton parse_ea_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open automaton file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ea(buf.str(), path);
}

/// Canonical textual form; parse_ea(render_ea(ea)) reproduces ea up to
/// the declared alphabet, which the document format does not carry.
inline std::string render_ea(const EditAutomaton& ea) {
  std::ostringstream out;
  out << "state " << ea.initial() << " initial\n";
  for (const auto& [name, st] : ea.states()) {
    if (name != ea.initial()) out << "state " << name << "\n";
  }
  for (const auto& [name, st] : ea.states()) {
    for (const auto& [trigger, e] : st.edges) {
      out << "edge " << name << " ";
      if (e.outputs.empty()) {
        out << "!" << trigger;
      } else if (e.outputs.size() == 1 && e.outputs[0] == trigger) {
        out << trigger;
      } else {
        out << trigger << "->" << strings::join(e.outputs, ",");
      }
      out << " " << e.target << "\n";
    }
    const auto& fb = st.fallback;
    bool implicit_suppress =
        fb.kind == EaDefaultKind::Suppress && fb.target == name;
    if (!implicit_suppress) {
      out << "edge " << name << " ";
      switch (fb.kind) {
        case EaDefaultKind::Preserve: out << "*"; break;
        case EaDefaultKind::Suppress: out << "!*"; break;
        case EaDefaultKind::Emit:
          out << "*->" << strings::join(fb.outputs, ",");
          break;
      }
      out << " " << fb.target << "\n";
    }
  }
  return out.str();
}

}  // namespace edgebus
