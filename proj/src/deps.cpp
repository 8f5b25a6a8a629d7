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
#include <map>
#include <set>

#include "dedopt/analysis.hpp"

namespace dedopt {

std::string FnChain::str() const {
  if (opaque) return "opaque";
  if (fns.empty()) return "id";
  std::string out;
  for (const auto& f : fns) out = out.empty() ? f : f + "." + out;
  return out;
}

bool DependencySet::has_fd(const std::string& rel, int domain, int range,
                           const FnChain* fn) const {
  for (const auto& fd : fds)
    if (fd.relation == rel && fd.domain == domain && fd.range == range &&
        (!fn || fd.fn == *fn))
      return true;
  return false;
}

bool DependencySet::has_cd(const std::string& from, int fa, const std::string& to,
                           int ta) const {
  for (const auto& cd : cds)
    if (cd.from == from && cd.from_attr == fa && cd.to == to && cd.to_attr == ta)
      return true;
  return false;
}

std::string DependencySet::str() const {
  std::string out;
  for (const auto& fd : fds)
    out += "fd " + fd.relation + "." + std::to_string(fd.domain + 1) + " -> " +
           fd.relation + "." + std::to_string(fd.range + 1) + " : " + fd.fn.str() +
           "\n";
  for (const auto& cd : cds)
    out += "cd " + cd.from + "." + std::to_string(cd.from_attr + 1) + " -> " + cd.to +
           "." + std::to_string(cd.to_attr + 1) + " : " + cd.fn.str() + "\n";
  return out;
}

namespace {

constexpr size_t kMaxChain = 3;

using FdKey = std::tuple<int, int, FnChain>;  // domain, range, chain
using FdMap = std::map<std::string, std::set<FdKey>>;

// literal instance inside a rule: relation + per-attr variable ("" = const/agg)
struct LitInst {
  std::string rel;
  std::vector<std::string> vars;
  bool is_head;
};

struct RuleGraph {
  std::vector<LitInst> lits;
  // reach[from][to] = chains (from-value determines to-value via chain)
  std::map<std::string, std::map<std::string, std::set<FnChain>>> reach;
};

std::string attr_var(const Term& t) {
  return t.kind == TermKind::Var ? t.var : std::string();
}

RuleGraph build_rule_graph(const Rule& r, const Program& p, const FdMap& fds) {
  RuleGraph g;
  auto add_lit = [&](const Literal& l, bool head) {
    const Relation* rel = p.find_relation(l.relation);
    if (!rel || !rel->is_idb_schema()) return;
    LitInst li;
    li.rel = l.relation;
    li.is_head = head;
    for (int i = 0; i < rel->payload_arity(); ++i) li.vars.push_back(attr_var(l.terms[i]));
    g.lits.push_back(std::move(li));
  };
  add_lit(r.head, true);
  for (const auto& l : r.lits)
    if (!l.negated && !l.is_delay()) add_lit(l, false);

  // seed edges
  struct Edge {
    std::string from, to;
    FnChain fn;
  };
  std::vector<Edge> edges;
  for (const auto& l : r.lits) {
    if (l.negated || l.is_delay()) continue;
    const Relation* rel = p.find_relation(l.relation);
    if (!rel) continue;
    if (rel->kind == RelationKind::EdbFunction && rel->fn_inputs == 1 &&
        rel->fn_outputs == 1) {
      std::string in = attr_var(l.terms[0]), out = attr_var(l.terms[1]);
      if (!in.empty() && !out.empty()) edges.push_back({in, out, FnChain{false, {l.relation}}});
    }
    auto it = fds.find(l.relation);
    if (it == fds.end()) continue;
    // attribute indexing: payload attrs for IDB, raw for stored EDB
    auto var_at = [&](int idx) -> std::string {
      if (idx >= static_cast<int>(l.terms.size())) return {};
      return attr_var(l.terms[idx]);
    };
    for (const auto& [d, rg, chain] : it->second) {
      std::string from = var_at(d), to = var_at(rg);
      if (!from.empty() && !to.empty()) edges.push_back({from, to, chain});
    }
  }

  // reachability with bounded chain composition
  std::set<std::string> vars;
  for (const auto& li : g.lits)
    for (const auto& v : li.vars)
      if (!v.empty()) vars.insert(v);
  for (const auto& e : edges) {
    vars.insert(e.from);
    vars.insert(e.to);
  }
  for (const auto& v : vars) g.reach[v][v].insert(FnChain{});
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& e : edges) {
      // for every x reaching e.from, x reaches e.to via chain+e.fn
      for (auto& [x, tos] : g.reach) {
        auto ft = tos.find(e.from);
        if (ft == tos.end()) continue;
        std::vector<FnChain> next;
        for (const auto& ch : ft->second) {
          FnChain composed = ch;
          composed.opaque = composed.opaque || e.fn.opaque;
          for (const auto& f : e.fn.fns) composed.fns.push_back(f);
          if (composed.fns.size() > kMaxChain) continue;
          next.push_back(std::move(composed));
        }
        for (auto& ch : next)
          if (g.reach[x][e.to].insert(ch).second) grew = true;
      }
    }
  }
  return g;
}

// FD candidates for the head of a rule.
std::set<FdKey> head_fd_candidates(const Rule& r, const Program& p, const FdMap& fds) {
  std::set<FdKey> out;
  const Relation* hrel = p.find_relation(r.head.relation);
  if (!hrel || !hrel->is_idb_schema()) return out;
  RuleGraph g = build_rule_graph(r, p, fds);
  int pa = hrel->payload_arity();
  for (int i = 0; i < pa; ++i) {
    std::string vi = attr_var(r.head.terms[i]);
    if (vi.empty()) continue;
    for (int j = 0; j < pa; ++j) {
      if (i == j) continue;
      std::string vj = attr_var(r.head.terms[j]);
      if (vj.empty()) continue;
      auto it = g.reach.find(vi);
      if (it == g.reach.end()) continue;
      auto jt = it->second.find(vj);
      if (jt == it->second.end()) continue;
      for (const auto& ch : jt->second) out.insert({i, j, ch});
    }
  }
  return out;
}

}  // namespace

DependencySet infer_dependencies(const Program& p) {
  FdMap fds;
  // seeds: EDB-function input->output, and explicit @fd annotations
  for (const auto& rel : p.relations) {
    if (rel.kind == RelationKind::EdbFunction && rel.fn_inputs == 1 &&
        rel.fn_outputs == 1)
      fds[rel.name].insert({0, 1, FnChain{false, {rel.name}}});
  }
  for (const auto& fd : p.fd_annotations) {
    if (fd.domain.size() != 1 || fd.range.size() != 1) continue;
    FnChain ch;
    if (fd.fn.empty())
      ch.opaque = true;
    else
      ch.fns = {fd.fn};
    fds[fd.relation].insert({fd.domain[0], fd.range[0], ch});
  }

  // union phase: accumulate everything any rule can justify
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& c : p.components)
      for (const auto& r : c.rules) {
        if (!r.classify_ok) continue;
        for (const auto& key : head_fd_candidates(r, p, fds))
          if (fds[r.head.relation].insert(key).second) grew = true;
      }
  }

  // intersection phase: strip candidates some defining rule cannot justify
  bool shrunk = true;
  while (shrunk) {
    shrunk = false;
    std::map<std::string, std::set<FdKey>> per_rel_intersection;
    std::set<std::string> has_defs;
    for (const auto& c : p.components)
      for (const auto& r : c.rules) {
        if (!r.classify_ok) continue;
        std::set<FdKey> cand = head_fd_candidates(r, p, fds);
        const std::string& rel = r.head.relation;
        if (!has_defs.count(rel)) {
          per_rel_intersection[rel] = cand;
          has_defs.insert(rel);
        } else {
          std::set<FdKey> merged;
          std::set_intersection(per_rel_intersection[rel].begin(),
                                per_rel_intersection[rel].end(), cand.begin(),
                                cand.end(), std::inserter(merged, merged.begin()));
          per_rel_intersection[rel] = std::move(merged);
        }
      }
    for (const auto& rel : has_defs) {
      if (fds[rel] != per_rel_intersection[rel]) {
        fds[rel] = per_rel_intersection[rel];
        shrunk = true;
      }
    }
  }

  // co-partition dependencies: valid in every rule where both relations occur
  struct CdKey {
    std::string from;
    int fa;
    std::string to;
    int ta;
    FnChain fn;
    bool operator<(const CdKey& o) const {
      return std::tie(from, fa, to, ta, fn) < std::tie(o.from, o.fa, o.to, o.ta, o.fn);
    }
  };
  std::map<CdKey, int> support;   // rules where the pair co-occurs and holds
  std::map<std::pair<std::string, std::string>, int> cooccur;
  std::set<CdKey> candidates;

  std::vector<const Rule*> rules;
  for (const auto& c : p.components)
    for (const auto& r : c.rules)
      if (r.classify_ok) rules.push_back(&r);

  for (const Rule* r : rules) {
    RuleGraph g = build_rule_graph(*r, p, fds);
    std::set<std::pair<std::string, std::string>> pairs_here;
    for (const auto& a : g.lits)
      for (const auto& b : g.lits) {
        if (a.rel == b.rel) continue;
        pairs_here.insert({a.rel, b.rel});
      }
    for (const auto& pr : pairs_here) cooccur[pr]++;

    // candidate CDs: chains observed between some instance pair in this rule
    std::set<CdKey> holds_here;
    for (const auto& a : g.lits)
      for (const auto& b : g.lits) {
        if (a.rel == b.rel) continue;
        for (size_t i = 0; i < a.vars.size(); ++i) {
          if (a.vars[i].empty()) continue;
          for (size_t j = 0; j < b.vars.size(); ++j) {
            if (b.vars[j].empty()) continue;
            auto it = g.reach.find(a.vars[i]);
            std::set<FnChain> chains;
            if (it != g.reach.end()) {
              auto jt = it->second.find(b.vars[j]);
              if (jt != it->second.end()) chains = jt->second;
            }
            for (const auto& ch : chains)
              holds_here.insert(
                  {a.rel, static_cast<int>(i), b.rel, static_cast<int>(j), ch});
          }
        }
      }
    // recount: a CD holds in this rule iff every instance pair supports it
    std::set<CdKey> confirmed;
    for (const auto& k : holds_here) {
      bool all = true;
      for (const auto& a : g.lits) {
        if (a.rel != k.from) continue;
        for (const auto& b : g.lits) {
          if (b.rel != k.to) continue;
          if (static_cast<size_t>(k.fa) >= a.vars.size() ||
              static_cast<size_t>(k.ta) >= b.vars.size() || a.vars[k.fa].empty() ||
              b.vars[k.ta].empty()) {
            all = false;
            continue;
          }
          auto it = g.reach.find(a.vars[k.fa]);
          bool found = false;
          if (it != g.reach.end()) {
            auto jt = it->second.find(b.vars[k.ta]);
            if (jt != it->second.end() && jt->second.count(k.fn)) found = true;
          }
          if (!found) all = false;
        }
      }
      if (all) confirmed.insert(k);
    }
    for (const auto& k : confirmed) {
      support[k]++;
      candidates.insert(k);
    }
  }

  DependencySet out;
  for (const auto& [rel, keys] : fds) {
    for (const auto& [d, rg, ch] : keys) {
      FunctionalDependency fd;
      fd.relation = rel;
      fd.domain = d;
      fd.range = rg;
      fd.fn = ch;
      out.fds.push_back(std::move(fd));
    }
  }
  for (const auto& k : candidates) {
    if (support[k] != cooccur[{k.from, k.to}]) continue;  // must hold everywhere
    CoPartitionDependency cd;
    cd.from = k.from;
    cd.from_attr = k.fa;
    cd.to = k.to;
    cd.to_attr = k.ta;
    cd.fn = k.fn;
    out.cds.push_back(std::move(cd));
  }
  return out;
}

}  // namespace dedopt
