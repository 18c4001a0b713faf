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

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edgebus/schema.hpp"
#include "edgebus/strings.hpp"

namespace edgebus::flow {

/**
 * Static flow analysis over schemas.
 *
 * A flow route is a sequence of entities x0..xn whose consecutive
 * pairs are links, whose interior entities are all brokers, and where
 * every interior broker xi satisfies x(i-1) != x(i+1) and
 * propagate(x(i-1), xi, x(i+1)). Reachability between links is
 * computed on the directed line graph of links, whose edges encode
 * exactly the interior-broker condition; the transitive closure is a
 * Floyd-Warshall-style triple loop, O(M^3) in the number of links.
 */

/// Stable link numbering for the reachability matrix.
struct LinkIndex {
  std::vector<Link> links;
  std::map<Link, size_t> index;

  static LinkIndex from(const Schema& schema) {
    LinkIndex idx;
    for (const auto& l : schema.graph.links) {
      idx.index[l] = idx.links.size();
      idx.links.push_back(l);
    }
    return idx;
  }
};

class ReachMatrix {
 public:
  ReachMatrix(LinkIndex idx, std::vector<std::vector<bool>> m)
      : idx_(std::move(idx)), m_(std::move(m)) {}

  /// True iff some flow route starts with `from` and ends with `to`.
  /// A single link is a (degenerate) route, so the diagonal is true.
  bool reachable(const Link& from, const Link& to) const {
    auto i = idx_.index.find(from);
    auto j = idx_.index.find(to);
    if (i == idx_.index.end() || j == idx_.index.end()) return false;
    return m_[i->second][j->second];
  }

  const LinkIndex& index() const { return idx_; }

 private:
  LinkIndex idx_;
  std::vector<std::vector<bool>> m_;
};

/// Link-to-link flow-route reachability over the whole schema.
inline ReachMatrix link_reachability(const Schema& schema) {
  LinkIndex idx = LinkIndex::from(schema);
  const size_t n = idx.links.size();
  std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));

  for (size_t i = 0; i < n; ++i) {
    m[i][i] = true;
    const Link& a = idx.links[i];
    if (!schema.graph.is_broker(a.dst)) continue;
    for (size_t j = 0; j < n; ++j) {
      const Link& b = idx.links[j];
      if (b.src != a.dst) continue;       // consecutive links share the joint
      if (b.dst == a.src) continue;       // no immediate backtrack
      if (!propagate(schema, a.src, a.dst, b.dst)) continue;
      m[i][j] = true;
    }
  }
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i) {
      if (!m[i][k]) continue;
      for (size_t j = 0; j < n; ++j)
        if (m[k][j]) m[i][j] = true;
    }
  return ReachMatrix(std::move(idx), std::move(m));
}

/// Exhaustive DFS enumeration of flow routes with up to max_len
/// entities. Routes that would revisit a directed link are cut off:
/// they exist whenever cycles do and add no reachability information.
/// Serves as the independent oracle for link_reachability.
inline std::vector<std::vector<std::string>> brute_force_routes(
    const Schema& schema, size_t max_len) {
  std::vector<std::vector<std::string>> routes;
  if (max_len < 2) return routes;

  std::vector<Link> used;
  std::vector<std::string> path;

  auto extendable = [&](const Link& next) {
    return std::find(used.begin(), used.end(), next) == used.end();
  };

  std::function<void()> dfs = [&]() {
    routes.push_back(path);
    if (path.size() >= max_len) return;
    const std::string& joint = path.back();
    if (!schema.graph.is_broker(joint)) return;  // devices end a route
    const std::string& prev = path[path.size() - 2];
    for (const auto& l : schema.graph.links) {
      if (l.src != joint) continue;
      if (l.dst == prev) continue;
      if (!propagate(schema, prev, joint, l.dst)) continue;
      if (!extendable(l)) continue;
      used.push_back(l);
      path.push_back(l.dst);
      dfs();
      path.pop_back();
      used.pop_back();
    }
  };

  for (const auto& l : schema.graph.links) {
    used = {l};
    path = {l.src, l.dst};
    dfs();
  }
  return routes;
}

/**
 * A partially ordered set of security labels plus a per-link label
 * assignment. The order is given as Hasse edges; leq is its
 * reflexive-transitive closure, computed once at construction.
 */
class SecurityLabeling {
 public:
  SecurityLabeling(std::set<std::string> labels,
                   std::set<std::pair<std::string, std::string>> hasse,
                   std::map<Link, std::string> assignment)
      : labels_(std::move(labels)),
        assignment_(std::move(assignment)) {
    for (const auto& [lo, hi] : hasse) {
      if (!labels_.count(lo) || !labels_.count(hi))
        throw Error("order edge references undeclared label ('" + lo +
                    "' <= '" + hi + "')");
      leq_.insert({lo, hi});
    }
    for (const auto& l : labels_) leq_.insert({l, l});
    std::vector<std::string> ls(labels_.begin(), labels_.end());
    for (const auto& k : ls)
      for (const auto& i : ls)
        for (const auto& j : ls)
          if (leq_.count({i, k}) && leq_.count({k, j})) leq_.insert({i, j});
  }

  /// Labeling that reads the schema's link types as labels, the
  /// standard construction for information-flow brokering policies.
  static SecurityLabeling from_link_types(
      const Schema& schema,
      std::set<std::pair<std::string, std::string>> hasse) {
    std::map<Link, std::string> assignment;
    for (const auto& [l, t] : schema.brokering.type_of) assignment[l] = t;
    return SecurityLabeling(schema.brokering.link_types, std::move(hasse),
                            std::move(assignment));
  }

  bool has_label(const std::string& l) const { return labels_.count(l) != 0; }
  bool leq(const std::string& a, const std::string& b) const {
    return leq_.count({a, b}) != 0;
  }
  const std::string* label_of(const Link& l) const {
    auto it = assignment_.find(l);
    return it == assignment_.end() ? nullptr : &it->second;
  }
  const std::map<Link, std::string>& assignment() const { return assignment_; }

 private:
  std::set<std::string> labels_;
  std::set<std::pair<std::string, std::string>> leq_;
  std::map<Link, std::string> assignment_;
};

struct BlpReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/**
 * Checks that the schema realizes monotone information flow under the
 * labeling: (a) every allow pair (t1, t2) has t1 <= t2 as labels,
 * (b) every device reads down and writes up (each notify link into a
 * device is labeled no higher than each publish link out of it),
 * (c) every flow route carries monotonically nondecreasing labels.
 */
inline BlpReport check_blp(const Schema& schema,
                           const SecurityLabeling& labeling) {
  BlpReport report;
  auto bad = [&](std::string m) { report.violations.push_back(std::move(m)); };

  for (const auto& l : schema.graph.links) {
    if (!labeling.label_of(l)) bad("unlabeled link " + to_string(l));
  }

  for (const auto& [t1, t2] : schema.brokering.allow) {
    if (!labeling.has_label(t1) || !labeling.has_label(t2)) {
      bad("allow pair references unknown label (" + t1 + ", " + t2 + ")");
      continue;
    }
    if (!labeling.leq(t1, t2))
      bad("allow pair violates label order (" + t1 + " ≰ " + t2 + ")");
  }

  for (const auto& d : schema.graph.devices) {
    for (const auto& in : schema.graph.links) {
      if (in.dst != d) continue;
      const std::string* lin = labeling.label_of(in);
      if (!lin) continue;
      for (const auto& out : schema.graph.links) {
        if (out.src != d) continue;
        const std::string* lout = labeling.label_of(out);
        if (!lout) continue;
        if (!labeling.leq(*lin, *lout))
          bad("read-down/write-up violation at device '" + d + "': " +
              to_string(in) + " labeled " + *lin + ", " + to_string(out) +
              " labeled " + *lout + " (" + *lin + " ≰ " + *lout + ")");
      }
    }
  }

  // Route monotonicity, checked against the enumerated routes.
  size_t max_len = schema.graph.links.size() + 1;
  for (const auto& route : brute_force_routes(schema, max_len)) {
    const std::string* prev = nullptr;
    for (size_t i = 0; i + 1 < route.size(); ++i) {
      const std::string* cur =
          labeling.label_of(Link{route[i], route[i + 1]});
      if (!cur) break;  // already reported as unlabeled
      if (prev && !labeling.leq(*prev, *cur)) {
        bad("non-monotone labels along route " + strings::join(route, " ") +
            " (" + *prev + " ≰ " + *cur + ")");
        break;
      }
      prev = cur;
    }
  }

  return report;
}

/// Labeling documents: `label <name>`, `order <lo> <hi>` (a Hasse
/// edge lo <= hi), and optional `linklabel <src> <dst> <label>`
/// overrides. Links without an override are labeled with their link
/// type, so the default poset is over the schema's type names.
inline SecurityLabeling parse_labeling(const std::string& text,
                                       const Schema& schema,
                                       const std::string& origin = "<labels>") {
  std::set<std::string> labels;
  std::set<std::pair<std::string, std::string>> hasse;
  std::map<Link, std::string> overrides;

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
    if (tok[0] == "label" && tok.size() == 2) {
      if (!labels.insert(tok[1]).second)
        fail("duplicate label '" + tok[1] + "'");
    } else if (tok[0] == "order" && tok.size() == 3) {
      hasse.insert({tok[1], tok[2]});
    } else if (tok[0] == "linklabel" && tok.size() == 4) {
      overrides[Link{tok[1], tok[2]}] = tok[3];
    } else {
      fail("expected 'label <n>', 'order <lo> <hi>' or "
           "'linklabel <src> <dst> <label>'");
    }
  }

  std::map<Link, std::string> assignment;
  for (const auto& [l, t] : schema.brokering.type_of) assignment[l] = t;
  for (const auto& [l, lab] : overrides) assignment[l] = lab;
  return SecurityLabeling(std::move(labels), std::move(hasse),
                          std::move(assignment));
}

/// Fiege-style visibility: an event published in `publisher_broker`
/// can reach a subscriber of `subscriber_broker` iff some flow route
/// leads from a publish link into the former to a notify link out of
/// the latter.
inline bool visible(const Schema& schema, const std::string& publisher_broker,
                    const std::string& subscriber_broker,
                    const ReachMatrix* precomputed = nullptr) {
  std::optional<ReachMatrix> local;
  if (!precomputed) local.emplace(link_reachability(schema));
  const ReachMatrix& m = precomputed ? *precomputed : *local;
  for (const auto& in : schema.graph.links) {
    if (in.dst != publisher_broker || !schema.graph.is_device(in.src))
      continue;
    for (const auto& out : schema.graph.links) {
      if (out.src != subscriber_broker || !schema.graph.is_device(out.dst))
        continue;
      if (m.reachable(in, out)) return true;
    }
  }
  return false;
}

}  // namespace edgebus::flow
