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

#include "dedopt/parser.hpp"
#include "dedopt/rewrite.hpp"
#include "dedopt/validate.hpp"

namespace dedopt {

using namespace rewrite_detail;

namespace {

void append_rule(Program& p, Component& c, Rule r) {
  flag_spacetime(p, r);
  c.rules.push_back(std::move(r));
}

std::vector<Term> payload_vars(const std::string& stem, int n) {
  std::vector<Term> out;
  for (int i = 0; i < n; ++i) out.push_back(V(stem + std::to_string(i + 1)));
  return out;
}

std::string fresh_var_in(const Rule& r, const std::string& stem) {
  std::vector<std::string> used;
  collect_rule_vars(r, used);
  std::string cand = stem;
  int i = 2;
  while (std::find(used.begin(), used.end(), cand) != used.end())
    cand = stem + std::to_string(i++);
  return cand;
}

// Declares the distribution policy as an EDB function (old address, key) ->
// partition address, backed by a stable hash over each home's group.
std::string add_policy_fn(Program& p, const PartitionGroups& groups,
                          std::vector<std::string>& generated) {
  Relation d;
  d.name = p.fresh_relation("dist__d");
  d.kind = RelationKind::EdbFunction;
  d.fn_inputs = 2;
  d.fn_outputs = 1;
  d.arity = 3;
  d.builtin = "policymap";
  for (const auto& [old, nodes] : groups) {
    std::string arg = old + "=";
    for (size_t i = 0; i < nodes.size(); ++i) arg += (i ? "|" : "") + nodes[i];
    d.builtin_args.push_back(arg);
  }
  p.relations.push_back(d);
  generated.push_back(d.name);
  return d.name;
}

// Routes producers of `rels` through the policy: the head location becomes
// D(old destination, key), with the key computed through the policy's chain.
void route_producers(Program& p, const DistributionPolicy& policy,
                     const std::vector<std::string>& rels, const std::string& dfn,
                     const std::vector<std::string>& exclude) {
  std::set<std::string> rset(rels.begin(), rels.end());
  std::set<std::string> excl(exclude.begin(), exclude.end());
  for (auto& c : p.components) {
    if (excl.count(c.name)) continue;
    for (auto& r : c.rules) {
      if (!rset.count(r.head.relation)) continue;
      if (r.kind != RuleKind::Asynchronous)
        throw RewriteError("producer of '" + r.head.relation + "' in '" + c.name +
                           "' is not an asynchronous rule");
      const PolicyEntry* e = policy.entry_for(r.head.relation);
      if (!e)
        throw RewriteError("policy does not cover routed relation '" +
                           r.head.relation + "'");
      Term key = r.head.terms[e->key_attr];
      // compute the canonical key through the chain
      for (const auto& f : e->via.fns) {
        std::string kv = fresh_var_in(r, "dk");
        r.lits.push_back(mklit(f, {key, V(kv)}));
        r.order.push_back({true, static_cast<int>(r.lits.size()) - 1});
        key = V(kv);
      }
      Term& loc = r.head.terms[r.head.terms.size() - 2];
      std::string oldv = loc.var;
      std::string newv = fresh_var_in(r, oldv + "_pt");
      loc = V(newv);
      Literal& d = r.lits[r.delay_index];
      for (int i = 0; i < d.delay_inputs; ++i)
        if (d.terms[i].kind == TermKind::Var && d.terms[i].var == oldv)
          d.terms[i] = V(newv);
      r.lits.push_back(mklit(dfn, {V(oldv), key, V(newv)}));
      r.order.push_back({true, static_cast<int>(r.lits.size()) - 1});
    }
  }
}

// EDB facts carrying an old home address and referenced by the component are
// replicated per partition (per-node tables like acceptor ids).
void replicate_edb_facts(Program& p, const Component& c,
                         const PartitionGroups& groups) {
  std::set<std::string> refs;
  for (const auto& r : c.rules)
    for (const auto& l : r.lits)
      if (!l.is_delay()) refs.insert(l.relation);
  std::vector<std::pair<std::string, Tuple>> extra;
  for (const auto& [rel, vals] : p.edb_facts) {
    if (!refs.count(rel)) continue;
    for (const auto& [old, nodes] : groups) {
      bool mentions = std::any_of(vals.begin(), vals.end(), [&](const Value& v) {
        return v.is_sym() && v.as_sym() == old;
      });
      if (!mentions) continue;
      for (const auto& n : nodes) {
        Tuple copy = vals;
        for (auto& v : copy)
          if (v.is_sym() && v.as_sym() == old) v = Value(n);
        extra.push_back({rel, std::move(copy)});
      }
    }
  }
  for (auto& e : extra) p.edb_facts.push_back(std::move(e));
}

std::vector<std::string> flatten(const Component& c, const PartitionGroups& groups) {
  std::vector<std::string> out;
  for (const auto& h : c.homes) {
    auto it = groups.find(h);
    if (it == groups.end())
      throw RewriteError("no partition group for home '" + h + "'");
    for (const auto& n : it->second) out.push_back(n);
  }
  return out;
}

RewriteResult partition_impl(Program p, const std::string& component,
                             const PartitionGroups& groups, PolicyMode mode,
                             const Protected& prot) {
  Component* c = p.find_component(component);
  if (!c) throw RewriteError("no component '" + component + "'");
  ComponentSignature sig = signature(*c, p);
  for (const auto& r : sig.referenced)
    if (std::find(prot.begin(), prot.end(), r) != prot.end())
      throw RewriteError("partitioning would reroute protected channel '" + r + "'");

  std::vector<std::string> nodes = flatten(*c, groups);
  DependencySet deps;
  if (mode == PolicyMode::CoHashCd) deps = infer_dependencies(p);
  PolicySearchResult found = find_distribution_policy(*c, p, deps, nodes, mode);
  if (!found.ok)
    throw RewriteError("no consistent distribution policy: blocked at [" +
                       found.blocking_rule + "] (" + found.blocking_pair + ")");

  RewriteResult res;
  res.evidence.push_back("policy mode " + found.policy.mode);
  for (const auto& e : found.policy.entries)
    res.evidence.push_back("partition " + e.relation + " by attribute " +
                           std::to_string(e.key_attr + 1) + " via " + e.via.str());

  std::string dfn = add_policy_fn(p, groups, res.generated_relations);
  route_producers(p, found.policy, sig.inputs, dfn, {component});
  replicate_edb_facts(p, *c, groups);
  c = p.find_component(component);
  c->homes = nodes;

  reanalyze(p);
  ValidationReport rep = check_well_formed(p);
  if (!rep.ok())
    throw RewriteError("partitioning produced an ill-formed program:\n" + rep.str());
  res.program = std::move(p);
  return res;
}

}  // namespace

RewriteResult partition_cohash(Program p, const std::string& component,
                               const PartitionGroups& groups, const Protected& prot) {
  return partition_impl(std::move(p), component, groups, PolicyMode::CoHash, prot);
}

RewriteResult partition_with_dependencies(Program p, const std::string& component,
                                          const PartitionGroups& groups,
                                          const Protected& prot) {
  return partition_impl(std::move(p), component, groups, PolicyMode::CoHashCd, prot);
}

// ---------------------------------------------------------------------------
// Partial partitioning: replicate C1's inputs through a coordinator proxy
// ---------------------------------------------------------------------------

RewriteResult partial_partition(Program p, const std::string& component,
                                const std::vector<int>& c1_rules,
                                const PartitionGroups& groups,
                                const std::map<std::string, std::string>& proxies,
                                const Protected& prot) {
  Component* c = p.find_component(component);
  if (!c) throw RewriteError("no component '" + component + "'");
  std::set<int> c1set(c1_rules.begin(), c1_rules.end());
  std::vector<int> c2_rules;
  for (int i = 0; i < static_cast<int>(c->rules.size()); ++i)
    if (!c1set.count(i)) c2_rules.push_back(i);
  if (c1_rules.empty() || c2_rules.empty())
    throw RewriteError("partial partitioning needs a proper rule split");

  Component c1v = make_split(*c, c1_rules, component + "__c1");
  Component c2v = make_split(*c, c2_rules, component + "__c2");

  Verdict ind = is_independent_for_forwarding(c1v, c2v, p);
  if (!ind.ok) throw RewriteError("C1 not independent of C2: " + ind.str());
  // State-machine checks scoped to the whole component: a head one half
  // derives for the co-located other half is not an output channel, and the
  // other half's state is exempt from this half's dependency tests.
  auto scoped_sm = [&](const Component& part) {
    ComponentSignature sp = signature(part, p);
    ComponentSignature sw = signature(*c, p);
    Verdict v;
    v.ok = true;
    std::vector<std::string> ins;
    for (const auto& r : sp.inputs)
      if (std::find(sw.inputs.begin(), sw.inputs.end(), r) != sw.inputs.end())
        ins.push_back(r);
    for (const auto& r : sp.referenced) {
      if (std::find(ins.begin(), ins.end(), r) != ins.end()) continue;
      bool headed_here =
          std::find(sp.heads.begin(), sp.heads.end(), r) != sp.heads.end();
      if (!headed_here) continue;  // maintained by the other half
      if (existence_dependency(r, ins, part, p)) continue;
      if (no_change_dependency(r, ins, part, p)) continue;
      v.ok = false;
      v.reasons.push_back("referenced '" + r +
                          "' has neither existence nor no-change dependency");
    }
    for (const auto& h : sp.heads) {
      bool consumed_in_c = std::find(sw.referenced.begin(), sw.referenced.end(),
                                     h) != sw.referenced.end();
      if (consumed_in_c) continue;  // internal state, not an output channel
      if (existence_dependency(h, ins, part, p)) continue;
      v.ok = false;
      v.reasons.push_back("output '" + h + "' lacks an existence dependency");
    }
    return v;
  };
  Verdict sm1 = scoped_sm(c1v);
  if (!sm1.ok) throw RewriteError("C1 is not a state machine: " + sm1.str());
  Verdict sm2 = scoped_sm(c2v);
  if (!sm2.ok) throw RewriteError("C2 is not a state machine: " + sm2.str());

  ComponentSignature s1 = signature(c1v, p);
  ComponentSignature sC = signature(*c, p);
  for (const auto& r : sC.referenced)
    if (std::find(prot.begin(), prot.end(), r) != prot.end())
      throw RewriteError("partial partitioning would reroute protected channel '" +
                         r + "'");

  std::vector<std::string> replicated = s1.inputs;
  if (replicated.size() != 1)
    throw RewriteError("partial partitioning supports exactly one replicated "
                       "input relation, got " + std::to_string(replicated.size()));
  const std::string rrel = replicated[0];
  if (p.find_relation(rrel)->payload_arity() != 1)
    throw RewriteError("replicated input '" + rrel +
                       "' must carry a single payload attribute for proxy ordering");

  // the partitioned side must have a consistent policy, with C1's relations
  // (available everywhere after replication) exempt
  std::vector<std::string> exempt = s1.referenced;
  for (const auto& h : s1.heads) exempt.push_back(h);
  std::vector<std::string> nodes = flatten(*c, groups);
  DependencySet deps = infer_dependencies(p);
  PolicySearchResult found =
      find_distribution_policy(c2v, p, deps, nodes, PolicyMode::CoHashCd, exempt);
  if (!found.ok)
    throw RewriteError("partitioned side has no consistent policy: blocked at [" +
                       found.blocking_rule + "] (" + found.blocking_pair + ")");

  RewriteResult res;
  res.evidence.push_back("C1 independent of C2: " + ind.str());
  res.evidence.push_back("state machines: C1 " + sm1.str() + ", C2 " + sm2.str());
  res.evidence.push_back("replicated input: " + rrel);
  res.evidence.push_back("policy mode " + found.policy.mode);

  // --- addresses ---
  std::vector<std::string> proxy_addrs;
  for (const auto& h : c->homes) {
    auto it = proxies.find(h);
    if (it == proxies.end())
      throw RewriteError("no proxy address for home '" + h + "'");
    proxy_addrs.push_back(it->second);
  }

  // --- name the generated relations ---
  auto fresh = [&](const std::string& stem) {
    std::string n = p.fresh_relation(stem);
    res.generated_relations.push_back(n);
    return n;
  };
  std::string seen = fresh(rrel + "__seen");
  std::string done = fresh(rrel + "__done");
  std::string act = fresh(rrel + "__act");
  std::string pend = fresh(rrel + "__pend");
  std::string pick = fresh(rrel + "__pick");
  std::string busy = fresh(rrel + "__busy");
  std::string ndone = fresh(rrel + "__ndone");
  std::string cur = fresh(rrel + "__cur");
  std::string vrec = fresh(rrel + "__vrec");
  std::string votes = fresh(rrel + "__votes");
  std::string fin = fresh(rrel + "__fin");
  std::string vreq = fresh(rrel + "__voteReq");
  std::string vote = fresh(rrel + "__vote");
  std::string cmt = fresh(rrel + "__commit");
  std::string reqs = fresh(rrel + "__reqs");
  std::string cmts = fresh(rrel + "__cmts");
  std::string recvd = fresh(rrel + "__recvd");
  std::string maxrecv = fresh(rrel + "__maxRecv");
  std::string procd = fresh(rrel + "__procd");
  std::string maxproc = fresh(rrel + "__maxProc");
  std::string sealedr = fresh(rrel + "__sealed");
  std::string outst = fresh(rrel + "__outstanding");
  std::string unfrz = fresh("unfreeze__g");

  // EDB tables: proxy -> partitions, partition -> proxy, partition count
  std::string ppart = fresh("proxyPart__e");
  std::string pproxy = fresh("partProxy__e");
  std::string npart = fresh("numPart__e");
  {
    Relation r1{ppart, 2, RelationKind::EdbStored, 0, 0, "", {}};
    Relation r2{pproxy, 2, RelationKind::EdbStored, 0, 0, "", {}};
    Relation r3{npart, 1, RelationKind::EdbStored, 0, 0, "", {}};
    p.relations.push_back(r1);
    p.relations.push_back(r2);
    p.relations.push_back(r3);
    size_t group_size = 0;
    for (size_t i = 0; i < c->homes.size(); ++i) {
      const auto& group = groups.at(c->homes[i]);
      group_size = group.size();
      for (const auto& n : group) {
        p.edb_facts.push_back({ppart, {Value(proxy_addrs[i]), Value(n)}});
        p.edb_facts.push_back({pproxy, {Value(n), Value(proxy_addrs[i])}});
      }
    }
    for (const auto& [oldaddr, group] : groups)
      if (group.size() != group_size)
        throw RewriteError("all homes must partition into equally many nodes");
    p.edb_facts.push_back({npart, {Value(static_cast<int64_t>(group_size))}});
  }

  // --- retarget producers ---
  // replicated input goes to the proxy; partitioned inputs route by policy
  std::string proxy_fwd = rewrite_detail::add_forward_fn(
      p, c->homes, proxy_addrs, res.generated_relations);
  retarget_producers(p, {rrel}, proxy_fwd, {component});
  std::vector<std::string> partitioned_inputs;
  for (const auto& r : sC.inputs)
    if (r != rrel) partitioned_inputs.push_back(r);
  std::string dfn = add_policy_fn(p, groups, res.generated_relations);
  route_producers(p, found.policy, partitioned_inputs, dfn, {component});
  replicate_edb_facts(p, *c, groups);
  c = p.find_component(component);

  // --- rewrite the component's own references ---
  // replicated input: ordered, indexed view
  for (auto& rule : c->rules)
    for (auto& l : rule.lits)
      if (!l.is_delay() && l.relation == rrel) {
        l.relation = sealedr;
        l.terms.insert(l.terms.begin(), V(fresh_var_in(rule, "seq")));
      }
  // other inputs: frozen while replicated updates are in flight
  std::vector<std::string> frozen_oks;
  for (const auto& rin : partitioned_inputs) {
    std::string ok = fresh(rin + "__ok");
    frozen_oks.push_back(ok);
    replace_refs(c->rules, rin, ok);
  }

  // --- proxy component ---
  Component proxy;
  proxy.name = p.fresh_component("proxy__" + component);
  proxy.homes = proxy_addrs;
  auto PV = [&](const char* v) { return V(v); };
  append_rule(p, proxy,
              mkrule(mklit(seen, {PV("v"), PV("l"), PV("t")}),
                     {mklit(rrel, {PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(seen, {PV("v"), PV("l"), PV("t2")}),
                     {mklit(seen, {PV("v"), PV("l"), PV("t")})}, {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(act, {PV("v"), PV("l"), PV("t")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(pend, {PV("v"), PV("l"), PV("t")}),
                     {mklit(seen, {PV("v"), PV("l"), PV("t")}),
                      mklit(done, {PV("v"), PV("l"), PV("t")}, true),
                      mklit(act, {PV("v"), PV("l"), PV("t")}, true)},
                     {}));
  append_rule(p, proxy,
              mkrule(mklit(pick, {Term::mkagg("min", {"v"}), PV("l"), PV("t")}),
                     {mklit(pend, {PV("v"), PV("l"), PV("t")}),
                      mklit(busy, {PV("l"), PV("t")}, true)},
                     {}));
  append_rule(p, proxy,
              mkrule(mklit(busy, {PV("l"), PV("t")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(ndone, {Term::mkagg("count0", {"v"}), PV("l"), PV("t")}),
                     {mklit(done, {PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t2")}),
                     {mklit(pick, {PV("v"), PV("l"), PV("t")}),
                      mklit(ndone, {PV("i"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t2")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(fin, {PV("i"), PV("l"), PV("t")}, true)},
                     {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(vreq, {PV("i"), PV("v"), PV("l2"), PV("t2")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(ppart, {PV("l"), PV("l2")}),
                      mkdelay({PV("i"), PV("v"), PV("l"), PV("t"), PV("l2")}, "t2")},
                     {}));
  append_rule(p, proxy,
              mkrule(mklit(vrec, {PV("l2"), PV("i"), PV("l"), PV("t")}),
                     {mklit(vote, {PV("l2"), PV("i"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(vrec, {PV("l2"), PV("i"), PV("l"), PV("t2")}),
                     {mklit(vrec, {PV("l2"), PV("i"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(votes, {Term::mkagg("count", {"l2"}), PV("i"), PV("l"),
                                   PV("t")}),
                     {mklit(vrec, {PV("l2"), PV("i"), PV("l"), PV("t")})}, {}));
  append_rule(p, proxy,
              mkrule(mklit(fin, {PV("i"), PV("l"), PV("t")}),
                     {mklit(votes, {PV("n"), PV("i"), PV("l"), PV("t")}),
                      mklit(npart, {PV("n")})},
                     {}));
  append_rule(p, proxy,
              mkrule(mklit(done, {PV("v"), PV("l"), PV("t2")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(fin, {PV("i"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(done, {PV("v"), PV("l"), PV("t2")}),
                     {mklit(done, {PV("v"), PV("l"), PV("t")})}, {succ("t2", "t")}));
  append_rule(p, proxy,
              mkrule(mklit(cmt, {PV("i"), PV("v"), PV("l2"), PV("t2")}),
                     {mklit(cur, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(fin, {PV("i"), PV("l"), PV("t")}),
                      mklit(ppart, {PV("l"), PV("l2")}),
                      mkdelay({PV("i"), PV("v"), PV("l"), PV("t"), PV("l2")}, "t2")},
                     {}));
  p.components.push_back(std::move(proxy));
  c = p.find_component(component);

  // --- node-side ordering and freezing rules ---
  append_rule(p, *c,
              mkrule(mklit(reqs, {PV("i"), PV("v"), PV("l"), PV("t")}),
                     {mklit(vreq, {PV("i"), PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, *c,
              mkrule(mklit(reqs, {PV("i"), PV("v"), PV("l"), PV("t2")}),
                     {mklit(reqs, {PV("i"), PV("v"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, *c,
              mkrule(mklit(vote, {PV("l"), PV("i"), PV("l2"), PV("t2")}),
                     {mklit(reqs, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t")}, true),
                      mklit(pproxy, {PV("l"), PV("l2")}),
                      mkdelay({PV("l"), PV("i"), PV("t"), PV("l2")}, "t2")},
                     {}));
  append_rule(p, *c,
              mkrule(mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t")}),
                     {mklit(cmt, {PV("i"), PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, *c,
              mkrule(mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t2")}),
                     {mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, *c,
              mkrule(mklit(recvd, {PV("i"), PV("l"), PV("t")}),
                     {mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t")})}, {}));
  append_rule(p, *c,
              mkrule(mklit(maxrecv, {Term::mkagg("max", {"i"}), PV("l"), PV("t")}),
                     {mklit(recvd, {PV("i"), PV("l"), PV("t")})}, {}));
  append_rule(p, *c,
              mkrule(mklit(procd, {PV("i"), PV("l"), PV("t2")}),
                     {mklit(procd, {PV("i"), PV("l"), PV("t")})}, {succ("t2", "t")}));
  append_rule(p, *c,
              mkrule(mklit(maxproc, {Term::mkagg("max", {"i"}), PV("l"), PV("t")}),
                     {mklit(procd, {PV("i"), PV("l"), PV("t")})}, {}));
  append_rule(p, *c,
              mkrule(mklit(sealedr, {PV("nx"), PV("v"), PV("l"), PV("t")}),
                     {mklit(maxproc, {PV("i"), PV("l"), PV("t")}),
                      mklit(cmts, {PV("nx"), PV("v"), PV("l"), PV("t")})},
                     {cmp("nx", "=", {av("i"), an(1)})}));
  append_rule(p, *c,
              mkrule(mklit(sealedr, {C(Value(int64_t(0))), PV("v"), PV("l"), PV("t")}),
                     {mklit(procd, {PV("i"), PV("l"), PV("t")}, true),
                      mklit(cmts, {C(Value(int64_t(0))), PV("v"), PV("l"), PV("t")})},
                     {}));
  append_rule(p, *c,
              mkrule(mklit(procd, {PV("i"), PV("l"), PV("t2")}),
                     {mklit(sealedr, {PV("i"), PV("v"), PV("l"), PV("t")})},
                     {succ("t2", "t")}));
  append_rule(p, *c,
              mkrule(mklit(outst, {PV("l"), PV("t")}),
                     {mklit(reqs, {PV("i"), PV("v"), PV("l"), PV("t")}),
                      mklit(cmts, {PV("i"), PV("v"), PV("l"), PV("t")}, true)},
                     {}));
  append_rule(p, *c,
              mkrule(mklit(unfrz, {PV("l"), PV("t")}),
                     {mklit(maxrecv, {PV("i"), PV("l"), PV("t")}),
                      mklit(maxproc, {PV("i"), PV("l"), PV("t")}),
                      mklit(outst, {PV("l"), PV("t")}, true)},
                     {}));
  append_rule(p, *c,
              mkrule(mklit(unfrz, {PV("l"), PV("t")}),
                     {mklit(recvd, {PV("i"), PV("l"), PV("t")}, true),
                      mklit(outst, {PV("l"), PV("t")}, true)},
                     {}));
  for (size_t i = 0; i < partitioned_inputs.size(); ++i) {
    const std::string& rin = partitioned_inputs[i];
    int pa = p.find_relation(rin)->payload_arity();
    auto vs = payload_vars("qv", pa);
    auto with = [&](const char* l, const char* t) {
      std::vector<Term> out = vs;
      out.push_back(V(l));
      out.push_back(V(t));
      return out;
    };
    append_rule(p, *c,
                mkrule(mklit(rin, with("ql", "qt2")),
                       {mklit(rin, with("ql", "qt")),
                        mklit(unfrz, {V("ql"), V("qt")}, true)},
                       {succ("qt2", "qt")}));
    append_rule(p, *c,
                mkrule(mklit(frozen_oks[i], with("ql", "qt")),
                       {mklit(rin, with("ql", "qt")),
                        mklit(unfrz, {V("ql"), V("qt")})},
                       {}));
  }

  c->homes = nodes;
  res.meta["sealed_input"] = sealedr;
  res.meta["num_partitions"] = npart;
  res.meta["proxy_component"] = "proxy__" + component;

  reanalyze(p);
  ValidationReport rep = check_well_formed(p);
  if (!rep.ok())
    throw RewriteError("partial partitioning produced an ill-formed program:\n" +
                       rep.str());
  res.program = std::move(p);
  return res;
}

}  // namespace dedopt
