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
#include <functional>
#include <map>
#include <set>

#include "dedopt/analysis.hpp"
#include "dedopt/eval.hpp"
#include "dedopt/printer.hpp"

namespace dedopt {

namespace {

// Union-find over term strings; congruence is approximated by building
// function applications over raw variable names, which covers the chains the
// dialect's rules produce.
struct UF {
  std::map<std::string, std::string> parent;
  const std::string& find(const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return parent.find(x)->second;
    }
    if (it->second == x) return it->second;
    std::string root = find(it->second);
    parent[x] = root;
    return parent.find(x)->second;
  }
  void unite(const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[ra] = rb;
  }
};

std::string apply_chain(const FnChain& ch, const std::string& base) {
  std::string out = base;
  for (const auto& f : ch.fns) out = f + "(" + out + ")";
  return out;
}

struct CoveredLit {
  const Literal* lit;
  bool is_head;
};

// literal instances whose facts live on the partitioned node
std::vector<CoveredLit> covered_literals(const Rule& r,
                                         const std::set<std::string>& covered) {
  std::vector<CoveredLit> out;
  auto consider = [&](const Literal& l, bool head) {
    if (l.is_delay()) return;
    if (!covered.count(l.relation)) return;
    out.push_back({&l, head});
  };
  if (r.kind != RuleKind::Asynchronous) consider(r.head, true);
  for (const auto& l : r.lits) consider(l, false);
  return out;
}

UF rule_uf(const Rule& r, const Program& p, const DependencySet& deps, bool use_fns) {
  UF uf;
  if (!use_fns) return uf;
  auto var_of = [](const Term& t) -> std::string {
    return t.kind == TermKind::Var ? t.var : std::string();
  };
  auto edges_for = [&](const Literal& l) {
    const Relation* rel = p.find_relation(l.relation);
    if (!rel) return;
    if (rel->kind == RelationKind::EdbFunction && rel->fn_inputs == 1 &&
        rel->fn_outputs == 1) {
      std::string in = var_of(l.terms[0]), out = var_of(l.terms[1]);
      if (!in.empty() && !out.empty()) uf.unite(l.relation + "(" + in + ")", out);
    }
    for (const auto& fd : deps.fds) {
      if (fd.relation != l.relation || !fd.fn.computable()) continue;
      if (fd.domain >= static_cast<int>(l.terms.size()) ||
          fd.range >= static_cast<int>(l.terms.size()))
        continue;
      std::string from = var_of(l.terms[fd.domain]), to = var_of(l.terms[fd.range]);
      if (!from.empty() && !to.empty()) uf.unite(apply_chain(fd.fn, from), to);
    }
  };
  edges_for(r.head);
  for (const auto& l : r.lits)
    if (!l.negated && !l.is_delay()) edges_for(l);
  return uf;
}

struct Candidate {
  int attr;
  FnChain via;
};

}  // namespace

const PolicyEntry* DistributionPolicy::entry_for(const std::string& rel) const {
  for (const auto& e : entries)
    if (e.relation == rel) return &e;
  return nullptr;
}

std::string DistributionPolicy::route(const Program& p, const std::string& rel,
                                      const Tuple& payload) const {
  const PolicyEntry* e = entry_for(rel);
  if (!e) throw std::runtime_error("policy does not cover '" + rel + "'");
  Value key = payload.at(e->key_attr);
  for (const auto& f : e->via.fns) {
    const Relation* frel = p.find_relation(f);
    if (!frel || frel->kind != RelationKind::EdbFunction)
      throw std::runtime_error("policy chain function '" + f + "' unavailable");
    Tuple out;
    if (!eval_builtin_function(*frel, {key}, out))
      throw std::runtime_error("policy chain function rejected a key");
    key = out[0];
  }
  return nodes[tuple_hash({key}) % nodes.size()];
}

PolicySearchResult find_distribution_policy(const Component& c, const Program& p,
                                            const DependencySet& deps,
                                            const std::vector<std::string>& nodes,
                                            PolicyMode mode,
                                            const std::vector<std::string>& replicated) {
  PolicySearchResult res;
  std::set<std::string> covered;
  for (const auto& r : c.rules) {
    auto consider = [&](const Literal& l) {
      if (l.is_delay()) return;
      const Relation* rel = p.find_relation(l.relation);
      if (!rel || !rel->is_idb_schema()) return;
      if (std::find(replicated.begin(), replicated.end(), l.relation) !=
          replicated.end())
        return;
      covered.insert(l.relation);
    };
    if (r.kind != RuleKind::Asynchronous) consider(r.head);
    for (const auto& l : r.lits)
      if (!l.is_delay()) consider(l);
  }

  // candidate (attr, via) per relation, deterministic order
  bool use_fns = mode == PolicyMode::CoHashCd;
  std::vector<std::string> rels(covered.begin(), covered.end());
  std::map<std::string, std::vector<Candidate>> cands;
  std::vector<std::string> fn_names;
  if (use_fns)
    for (const auto& rel : p.relations)
      if (rel.kind == RelationKind::EdbFunction && rel.fn_inputs == 1 &&
          rel.fn_outputs == 1 && !rel.builtin.empty())
        fn_names.push_back(rel.name);
  std::sort(fn_names.begin(), fn_names.end());

  for (const auto& rel : rels) {
    const Relation* r = p.find_relation(rel);
    std::set<int> agg_pos;
    for (const auto& comp : p.components)
      for (const auto& rule : comp.rules)
        if (rule.head.relation == rel)
          for (size_t i = 0; i < rule.head.terms.size(); ++i)
            if (rule.head.terms[i].kind == TermKind::Agg)
              agg_pos.insert(static_cast<int>(i));
    for (int a = 0; a < r->payload_arity(); ++a) {
      if (agg_pos.count(a)) continue;
      cands[rel].push_back({a, FnChain{}});
      if (use_fns)
        for (const auto& f : fn_names) cands[rel].push_back({a, FnChain{false, {f}}});
    }
    if (cands[rel].empty()) {
      res.blocking_pair = rel;
      res.blocking_rule = "no partitionable attribute on '" + rel + "'";
      return res;
    }
  }

  // pre-build per-rule union-finds
  struct RuleCtx {
    const Rule* rule;
    std::vector<CoveredLit> lits;
    UF uf;
  };
  std::vector<RuleCtx> ctxs;
  for (const auto& r : c.rules) {
    RuleCtx ctx{&r, covered_literals(r, covered), rule_uf(r, p, deps, use_fns)};
    if (!ctx.lits.empty()) ctxs.push_back(std::move(ctx));
  }

  std::map<std::string, Candidate> chosen;
  std::string block_rule, block_pair;

  // a rule is checkable once all its covered relations are assigned
  auto check_rule = [&](RuleCtx& ctx) -> std::pair<bool, std::string> {
    std::string cls;
    for (const auto& cl : ctx.lits) {
      auto it = chosen.find(cl.lit->relation);
      if (it == chosen.end()) return {true, ""};  // defer
      const Candidate& cand = it->second;
      const Term& t = cl.lit->terms[cand.attr];
      std::string term;
      if (t.kind == TermKind::Var)
        term = apply_chain(cand.via, t.var);
      else if (t.kind == TermKind::Const)
        term = "const:" + t.constant.str();
      else
        return {false, cl.lit->relation};  // aggregate position: no key
      std::string root = ctx.uf.find(term);
      if (cls.empty())
        cls = root;
      else if (cls != root)
        return {false, cl.lit->relation};
    }
    return {true, ""};
  };

  // deterministic backtracking over relations (lexicographic)
  std::function<bool(size_t)> assign = [&](size_t idx) -> bool {
    if (idx == rels.size()) return true;
    const std::string& rel = rels[idx];
    for (const auto& cand : cands[rel]) {
      chosen[rel] = cand;
      bool ok = true;
      for (auto& ctx : ctxs) {
        auto [pass, witness] = check_rule(ctx);
        if (!pass) {
          ok = false;
          block_rule = print_rule(*ctx.rule);
          block_pair = witness;
          for (const auto& cl : ctx.lits)
            if (cl.lit->relation != witness) {
              block_pair = cl.lit->relation + " vs " + witness;
              break;
            }
          break;
        }
      }
      if (ok && assign(idx + 1)) return true;
      chosen.erase(rel);
    }
    return false;
  };

  // a pair of literals no candidate combination can co-locate is a hard
  // blocker; report it in preference to whatever the search failed on last
  auto pair_feasible = [&](RuleCtx& ctx, const CoveredLit& a, const CoveredLit& b) {
    for (const auto& ca : cands[a.lit->relation])
      for (const auto& cb : cands[b.lit->relation]) {
        const Term& ta = a.lit->terms[ca.attr];
        const Term& tb = b.lit->terms[cb.attr];
        if (ta.kind != TermKind::Var || tb.kind != TermKind::Var) continue;
        if (ctx.uf.find(apply_chain(ca.via, ta.var)) ==
            ctx.uf.find(apply_chain(cb.via, tb.var)))
          return true;
      }
    return false;
  };
  auto diagnose = [&]() {
    for (int pass = 0; pass < 2; ++pass) {  // body/body pairs first
      for (auto& ctx : ctxs) {
        const auto& lits = ctx.lits;
        for (size_t i = 0; i < lits.size(); ++i)
          for (size_t j = i + 1; j < lits.size(); ++j) {
            if (pass == 0 && (lits[i].is_head || lits[j].is_head)) continue;
            if (lits[i].lit->relation == lits[j].lit->relation) continue;
            if (pair_feasible(ctx, lits[i], lits[j])) continue;
            block_rule = print_rule(*ctx.rule);
            block_pair = lits[i].lit->relation + " vs " + lits[j].lit->relation;
            return true;
          }
      }
    }
    return false;
  };

  if (!assign(0)) {
    res.ok = false;
    diagnose();
    res.blocking_rule = block_rule;
    res.blocking_pair = block_pair;
    return res;
  }

  res.ok = true;
  res.policy.nodes = nodes;
  res.policy.mode = mode == PolicyMode::CoHash ? "cohash" : "cohash+cd";
  for (const auto& rel : rels) {
    PolicyEntry e;
    e.relation = rel;
    e.key_attr = chosen[rel].attr;
    e.via = chosen[rel].via;
    res.policy.entries.push_back(std::move(e));
  }
  return res;
}

std::string check_parallel_disjoint(const Instance& inst, const Program& p,
                                    const DistributionPolicy& policy) {
  std::set<std::string> covered;
  for (const auto& e : policy.entries) covered.insert(e.relation);

  const auto& facts = inst.facts();
  std::vector<std::set<std::string>> routes(facts.size());
  std::vector<char> done(facts.size(), 0);

  std::function<const std::set<std::string>&(int)> visit =
      [&](int id) -> const std::set<std::string>& {
    if (done[id]) return routes[id];
    done[id] = 1;
    const auto& f = facts[id];
    if (!f.loc.empty() && covered.count(inst.rel_name(f.rel)))
      routes[id].insert(policy.route(p, inst.rel_name(f.rel), f.payload));
    for (const auto& d : inst.provenance()[id])
      for (int b : d.body) {
        const auto& sub = visit(b);
        routes[id].insert(sub.begin(), sub.end());
      }
    return routes[id];
  };

  for (size_t i = 0; i < facts.size(); ++i) {
    const auto& r = visit(static_cast<int>(i));
    if (r.size() > 1) {
      std::string out = "proof tree of " + inst.rel_name(facts[i].rel) +
                        tuple_str(facts[i].payload) + " spans nodes:";
      for (const auto& n : r) out += " " + n;
      return out;
    }
  }
  return "";
}

}  // namespace dedopt
