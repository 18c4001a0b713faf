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
#include <sstream>
#include <string>

#include "edgebus/ea_text.hpp"
#include "edgebus/schema.hpp"
#include "edgebus/strings.hpp"

namespace edgebus {

/**
 * Line-oriented schema documents, the shared configuration grammar of
 * the simulator, the analyzers and the compilers:
 *
 *   device <name>                  broker <name>
 *   topic <name>                   linktype <name>
 *   link <x> <y> <t_xy> [<t_yx>]   # with <t_yx>, declares both directions
 *   allow <t1> <t2>                # or: deny <t1> <t2> (complement form;
 *                                  # a document uses one form, not both)
 *   subscribe <broker> <device> <topic>
 *   ordering <trivial|fifo>
 *   automaton <name>
 *     ... edit-automaton lines ...
 *   end
 *   monitor <src> <dst> <automaton-name | identity | file path>
 *
 * Duplicate declarations are reported as errors with their line, never
 * resolved last-wins. Semantic problems (unknown entities, asymmetric
 * links, ...) are left to validate_schema.
 */

namespace detail {

struct SchemaParseCtx {
  Schema schema;
  std::map<std::string, EditAutomaton> automata;
  std::map<Link, std::string> monitor_refs;
  std::set<std::pair<std::string, std::string>> denied;
  bool saw_allow = false;
  bool saw_deny = false;
};

inline void finish_brokering(SchemaParseCtx& ctx, const std::string& origin) {
  if (ctx.saw_deny) {
    auto& bp = ctx.schema.brokering;
    for (const auto& t1 : bp.link_types)
      for (const auto& t2 : bp.link_types)
        if (!ctx.denied.count({t1, t2})) bp.allow.insert({t1, t2});
  }
  (void)origin;
}

}  // namespace detail

inline Schema parse_schema(const std::string& text,
                           const std::string& origin = "<schema>") {
  detail::SchemaParseCtx ctx;
  Schema& s = ctx.schema;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  EaBuilder ea_builder;
  std::string ea_name;
  int ea_start_line = 0;
  bool in_automaton = false;

  auto where = [&] { return origin + ":" + std::to_string(lineno); };
  auto fail = [&](const std::string& msg) { throw Error(where() + ": " + msg); };

  while (std::getline(in, line)) {
    ++lineno;
    auto tok = strings::split_ws(strings::strip_comment(line));
    if (tok.empty()) continue;

    if (in_automaton) {
      if (tok[0] == "end") {
        if (tok.size() != 1) fail("expected bare 'end'");
        try {
          ctx.automata[ea_name] = ea_builder.build();
        } catch (const Error& e) {
          throw Error(origin + ":" + std::to_string(ea_start_line) +
                      ": automaton '" + ea_name + "': " + e.what());
        }
        ea_builder = EaBuilder{};
        in_automaton = false;
      } else {
        detail::apply_ea_line(ea_builder, tok, where());
      }
      continue;
    }

    const std::string& kw = tok[0];
    if (kw == "device" || kw == "broker") {
      if (tok.size() != 2) fail("expected '" + kw + " <name>'");
      if (s.graph.is_entity(tok[1]))
        fail("duplicate declaration of entity '" + tok[1] + "'");
      (kw == "device" ? s.graph.devices : s.graph.brokers).insert(tok[1]);
    } else if (kw == "topic") {
      if (tok.size() != 2) fail("expected 'topic <name>'");
      if (!s.events.alphabet.insert(tok[1]).second)
        fail("duplicate declaration of topic '" + tok[1] + "'");
    } else if (kw == "linktype") {
      if (tok.size() != 2) fail("expected 'linktype <name>'");
      if (!s.brokering.link_types.insert(tok[1]).second)
        fail("duplicate declaration of link type '" + tok[1] + "'");
    } else if (kw == "link") {
      if (tok.size() != 4 && tok.size() != 5)
        fail("expected 'link <x> <y> <type_xy> [<type_yx>]'");
      Link fwd{tok[1], tok[2]};
      if (!s.graph.links.insert(fwd).second)
        fail("duplicate link " + to_string(fwd));
      s.brokering.type_of[fwd] = tok[3];
      if (tok.size() == 5) {
        Link rev = fwd.reversed();
        if (!s.graph.links.insert(rev).second)
          fail("duplicate link " + to_string(rev));
        s.brokering.type_of[rev] = tok[4];
      }
    } else if (kw == "allow") {
      if (tok.size() != 3) fail("expected 'allow <t1> <t2>'");
      if (ctx.saw_deny) fail("cannot mix allow and deny forms");
      ctx.saw_allow = true;
      s.brokering.allow.insert({tok[1], tok[2]});
    } else if (kw == "deny") {
      if (tok.size() != 3) fail("expected 'deny <t1> <t2>'");
      if (ctx.saw_allow) fail("cannot mix allow and deny forms");
      ctx.saw_deny = true;
      ctx.denied.insert({tok[1], tok[2]});
    } else if (kw == "subscribe") {
      if (tok.size() != 4) fail("expected 'subscribe <broker> <device> <topic>'");
      s.subscriptions.by_link[Link{tok[1], tok[2]}].insert(tok[3]);
    } else if (kw == "ordering") {
      if (tok.size() != 2) fail("expected 'ordering <name>'");
      s.task_ordering = tok[1];
    } else if (kw == "automaton") {
      if (tok.size() != 2) fail("expected 'automaton <name>'");
      if (ctx.automata.count(tok[1]))
        fail("duplicate automaton '" + tok[1] + "'");
      ea_name = tok[1];
      ea_start_line = lineno;
      in_automaton = true;
    } else if (kw == "monitor") {
      if (tok.size() != 4) fail("expected 'monitor <src> <dst> <automaton>'");
      Link l{tok[1], tok[2]};
      if (ctx.monitor_refs.count(l))
        fail("duplicate monitor on link " + to_string(l));
      ctx.monitor_refs[l] = tok[3];
    } else {
      fail("unknown directive '" + kw + "'");
    }
  }
  if (in_automaton)
    throw Error(origin + ":" + std::to_string(ea_start_line) +
                ": automaton '" + ea_name + "' not closed with 'end'");

  detail::finish_brokering(ctx, origin);

  for (const auto& [l, ref] : ctx.monitor_refs) {
    if (ref == "identity") continue;  // identity is the default anyway
    auto it = ctx.automata.find(ref);
    EditAutomaton ea =
        it != ctx.automata.end() ? it->second : parse_ea_file(ref);
    // Bind to the schema's closed alphabet; the step() contract then
    // rejects topics outside it, matching the formal model.
    s.events.monitors[l] = ea.with_alphabet(s.events.alphabet, true);
  }
  return s;
}

inline Schema parse_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str(), path);
}

/// Canonical rendering; parse_schema(render_schema(s)) == s holds for
/// every schema whose monitors are expressible in the document format
/// (closed-alphabet automata round-trip as their open form bound to
/// the schema alphabet, which is behaviorally identical).
inline std::string render_schema(const Schema& s) {
  std::ostringstream out;
  for (const auto& d : s.graph.devices) out << "device " << d << "\n";
  for (const auto& b : s.graph.brokers) out << "broker " << b << "\n";
  for (const auto& t : s.events.alphabet) out << "topic " << t << "\n";
  for (const auto& t : s.brokering.link_types) out << "linktype " << t << "\n";
  for (const auto& l : s.graph.links) {
    out << "link " << l.src << " " << l.dst;
    const std::string* t = s.brokering.type_for(l);
    out << " " << (t ? *t : "?") << "\n";
  }
  for (const auto& [t1, t2] : s.brokering.allow)
    out << "allow " << t1 << " " << t2 << "\n";
  for (const auto& [l, topics] : s.subscriptions.by_link) {
    for (const auto& t : topics)
      out << "subscribe " << l.src << " " << l.dst << " " << t << "\n";
  }
  out << "ordering " << s.task_ordering << "\n";
  int n = 0;
  for (const auto& [l, ea] : s.events.monitors) {
    std::string name = "ea" + std::to_string(n++);
    out << "automaton " << name << "\n";
    std::istringstream body(render_ea(ea));
    std::string bl;
    while (std::getline(body, bl)) out << "  " << bl << "\n";
    out << "end\n";
    out << "monitor " << l.src << " " << l.dst << " " << name << "\n";
  }
  return out.str();
}

}  // namespace edgebus
