//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include <algorithm>
#include <set>
#include <stdexcept>

#include "dedopt/eval.hpp"

namespace dedopt {

namespace {

struct Edge {
  std::string from, to;
  bool strict;  // negation or aggregation: stratum must strictly increase
};

}  // namespace

Strata stratify(const Program& p) {
  std::set<std::string> rels;
  for (const auto& rel : p.relations)
    if (rel.is_idb_schema()) rels.insert(rel.name);

  std::vector<Edge> edges;
  for (const auto& c : p.components) {
    for (const auto& r : c.rules) {
      if (!r.classify_ok)
        throw std::runtime_error("cannot stratify: " + r.classify_err);
      if (r.kind != RuleKind::Synchronous) continue;
      bool agg_head = std::any_of(r.head.terms.begin(), r.head.terms.end(),
                                  [](const Term& t) { return t.kind == TermKind::Agg; });
      for (const auto& l : r.lits) {
        if (l.is_delay()) continue;
        const Relation* rel = p.find_relation(l.relation);
        if (!rel || !rel->is_idb_schema()) continue;
        edges.push_back({l.relation, r.head.relation, l.negated || agg_head});
      }
    }
  }

  // Bellman-Ford-style longest path; a strict edge inside a cycle never
  // stabilizes, which is exactly the non-stratifiable case.
  Strata s;
  for (const auto& r : rels) s.stratum[r] = 0;
  bool changed = true;
  int iters = 0;
  const int limit = static_cast<int>(rels.size()) + 2;
  while (changed) {
    changed = false;
    if (++iters > limit)
      throw std::runtime_error(
          "non-stratifiable program: a same-timestep cycle crosses a "
          "negation or aggregation edge");
    for (const auto& e : edges) {
      int need = s.stratum[e.from] + (e.strict ? 1 : 0);
      if (s.stratum[e.to] < need) {
        s.stratum[e.to] = need;
        changed = true;
      }
    }
  }
  for (const auto& [rel, st] : s.stratum) s.count = std::max(s.count, st + 1);
  return s;
}

}  // namespace dedopt
