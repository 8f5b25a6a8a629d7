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

struct SealSite {
  std::string comp;
  int rule = -1;
  int seal_term = -1;   // position of the seal<> term in the head
  std::string bundled;  // relation named inside seal<>
};

std::vector<SealSite> find_seal_sites(const Program& p) {
  std::vector<SealSite> out;
  for (const auto& c : p.components)
    for (size_t ri = 0; ri < c.rules.size(); ++ri) {
      const Rule& r = c.rules[ri];
      for (size_t ti = 0; ti < r.head.terms.size(); ++ti)
        if (r.head.terms[ti].kind == TermKind::Agg &&
            r.head.terms[ti].agg_fn == "seal")
          out.push_back({c.name, static_cast<int>(ri), static_cast<int>(ti),
                         r.head.terms[ti].agg_vars.at(0)});
    }
  return out;
}

}  // namespace

RewriteResult desugar_seal(Program p) {
  RewriteResult res;
  std::vector<SealSite> sites = find_seal_sites(p);
  if (sites.empty()) {
    res.evidence.push_back("no seal<> heads; program unchanged");
    res.program = std::move(p);
    return res;
  }

  for (const SealSite& site : sites) {
    Component* sender = p.find_component(site.comp);
    Rule phi = sender->rules[site.rule];
    const std::string out_rel = phi.head.relation;
    if (phi.kind != RuleKind::Asynchronous)
      throw RewriteError("seal<> used outside an asynchronous rule in '" +
                         site.comp + "'");

    // the bundled literal supplies the payload variables
    int bundled_idx = -1;
    for (size_t i = 0; i < phi.lits.size(); ++i)
      if (!phi.lits[i].negated && !phi.lits[i].is_delay() &&
          phi.lits[i].relation == site.bundled)
        bundled_idx = static_cast<int>(i);
    if (bundled_idx < 0)
      throw RewriteError("seal<" + site.bundled +
                         "> does not name a positive body relation");
    const Relation* brel = p.find_relation(site.bundled);
    int m = brel->payload_arity();
    std::vector<std::string> payload;
    for (int i = 0; i < m; ++i) {
      const Term& t = phi.lits[bundled_idx].terms[i];
      if (t.kind != TermKind::Var)
        throw RewriteError("sealed relation attributes must be bound to variables");
      payload.push_back(t.var);
    }

    // group attributes: ordinary head terms other than the seal slot
    const Relation* orel = p.find_relation(out_rel);
    std::vector<Term> group;
    for (int i = 0; i + 2 < orel->arity - m + 1; ++i) {
      // head layout: [seal slot at site.seal_term] group... loc time
    }
    for (size_t i = 0; i + 2 < phi.head.terms.size(); ++i)
      if (static_cast<int>(i) != site.seal_term) group.push_back(phi.head.terms[i]);
    std::string destv = phi.head.terms[phi.head.terms.size() - 2].var;
    std::string lv = phi.loc_var, tv = phi.time_var;
    std::string outtv = phi.head.terms.back().var;

    std::string cnt = p.fresh_relation(out_rel + "__n");
    std::string rc = p.fresh_relation(out_rel + "__rc");
    std::string sl = p.fresh_relation(out_rel + "__sl");
    std::string gate = p.fresh_relation(out_rel + "__u");
    for (const auto& n : {cnt, rc, sl, gate}) res.generated_relations.push_back(n);

    // body without the delay literal
    std::vector<Literal> base;
    for (size_t i = 0; i < phi.lits.size(); ++i)
      if (static_cast<int>(i) != phi.delay_index) base.push_back(phi.lits[i]);

    // expected-count message: count0 over the bundled relation per group
    {
      std::vector<Term> head = {Term::mkagg("count0", payload)};
      for (const auto& g : group) head.push_back(g);
      head.push_back(V(destv));
      head.push_back(V(outtv));
      std::vector<Term> din;
      for (const auto& g : group) din.push_back(g);
      din.push_back(V(lv));
      din.push_back(V(tv));
      din.push_back(V(destv));
      std::vector<Literal> lits = base;
      lits.push_back(mkdelay(din, outtv));
      Rule cnt_rule = mkrule(mklit(cnt, head), lits, phi.cons);
      append_rule(p, *sender, cnt_rule);
    }
    // expanded payload message replaces the sugared rule
    {
      std::vector<Term> head;
      for (const auto& v : payload) head.push_back(V(v));
      for (const auto& g : group) head.push_back(g);
      head.push_back(V(destv));
      head.push_back(V(outtv));
      std::vector<Term> din;
      for (const auto& v : payload) din.push_back(V(v));
      for (const auto& g : group) din.push_back(g);
      din.push_back(V(lv));
      din.push_back(V(tv));
      din.push_back(V(destv));
      std::vector<Literal> lits = base;
      lits.push_back(mkdelay(din, outtv));
      Rule out_rule = mkrule(mklit(out_rel, head), lits, phi.cons);
      flag_spacetime(p, out_rule);
      sender->rules[site.rule] = out_rule;
    }

    // receivers: every other component referencing the sealed output
    int k = static_cast<int>(group.size());
    auto gvars = payload_vars("gg", k);
    auto wvars = payload_vars("ww", m);
    std::vector<std::string> wnames;
    for (const auto& w : wvars) wnames.push_back(w.var);
    std::string receiver_name;
    for (auto& comp : p.components) {
      if (comp.name == site.comp) continue;
      bool refs = false;
      for (const auto& r : comp.rules)
        for (const auto& l : r.lits)
          if (!l.is_delay() && l.relation == out_rel) refs = true;
      if (!refs) continue;
      receiver_name = comp.name;
      replace_refs(comp.rules, out_rel, gate);
      auto with = [&](std::vector<Term> pre, const char* l, const char* t) {
        for (const auto& g : gvars) pre.push_back(g);
        pre.push_back(V(l));
        pre.push_back(V(t));
        return pre;
      };
      append_rule(p, comp,
                  mkrule(mklit(rc, with({Term::mkagg("count", wnames)}, "rl", "rt")),
                         {mklit(out_rel, with(wvars, "rl", "rt"))}, {}));
      append_rule(p, comp,
                  mkrule(mklit(sl, with({}, "rl", "rt")),
                         {mklit(cnt, with({V("rn")}, "rl", "rt")),
                          mklit(rc, with({V("rn")}, "rl", "rt"))},
                         {}));
      append_rule(p, comp,
                  mkrule(mklit(sl, with({}, "rl", "rt")),
                         {mklit(cnt, with({C(Value(int64_t(0)))}, "rl", "rt"))}, {}));
      append_rule(p, comp,
                  mkrule(mklit(gate, with(wvars, "rl", "rt")),
                         {mklit(out_rel, with(wvars, "rl", "rt")),
                          mklit(sl, with({}, "rl", "rt"))},
                         {}));
      append_rule(p, comp,
                  mkrule(mklit(out_rel, with(wvars, "rl", "rt2")),
                         {mklit(out_rel, with(wvars, "rl", "rt")),
                          mklit(sl, with({}, "rl", "rt"), true)},
                         {succ("rt2", "rt")}));
      append_rule(p, comp,
                  mkrule(mklit(cnt, with({V("rn")}, "rl", "rt2")),
                         {mklit(cnt, with({V("rn")}, "rl", "rt")),
                          mklit(sl, with({}, "rl", "rt"), true)},
                         {succ("rt2", "rt")}));
    }
    if (receiver_name.empty())
      throw RewriteError("sealed output '" + out_rel + "' has no receiver");

    SealInfo si;
    si.out = out_rel;
    si.count = cnt;
    si.recv = rc;
    si.sealed = sl;
    si.gate = gate;
    si.sender = site.comp;
    si.receiver = receiver_name;
    si.payload = m;
    si.group = k;
    p.seal_infos.push_back(si);
    res.evidence.push_back("desugared seal over '" + site.bundled + "' in '" +
                           out_rel + "'");
  }

  reanalyze(p);
  ValidationReport rep = check_well_formed(p);
  if (!rep.ok())
    throw RewriteError("seal desugar produced an ill-formed program:\n" + rep.str());
  res.program = std::move(p);
  return res;
}

// ---------------------------------------------------------------------------
// Partitioning sealing
// ---------------------------------------------------------------------------

RewriteResult partition_sealed(Program p, const std::string& component,
                               const std::string& out_relation,
                               const std::string& sealed_input) {
  SealInfo* si = nullptr;
  for (auto& s : p.seal_infos)
    if (s.out == out_relation) si = &s;
  if (!si)
    throw RewriteError("'" + out_relation + "' is not a desugared sealed output");
  if (si->sender != component)
    throw RewriteError("sealed output '" + out_relation + "' is sent by '" +
                       si->sender + "', not '" + component + "'");
  Component* sender = p.find_component(component);
  Component* receiver = p.find_component(si->receiver);
  if (!sender || !receiver) throw RewriteError("seal endpoints missing");
  if (!p.find_relation(sealed_input))
    throw RewriteError("no replicated-input alias '" + sealed_input + "'");

  RewriteResult res;
  int m = si->payload, k = si->group;

  // Every sender rule deriving the sealed output or its count must be gated
  // on the replicated input's ordered alias; its leading attribute is the
  // commit index the fractions are keyed by.
  auto index_var = [&](Rule& r) -> std::string {
    for (auto& l : r.lits)
      if (!l.is_delay() && !l.negated && l.relation == sealed_input)
        return l.terms[0].var;
    throw RewriteError("rule for '" + r.head.relation +
                       "' lacks an existence dependency on '" + sealed_input + "'");
  };

  for (auto& r : sender->rules) {
    if (r.head.relation == si->out) {
      std::string iv = index_var(r);
      r.head.terms.insert(r.head.terms.begin(), V(iv));
      Literal& d = r.lits[r.delay_index];
      d.terms.insert(d.terms.begin(), V(iv));
      d.delay_inputs += 1;
    } else if (r.head.relation == si->count) {
      std::string iv = index_var(r);
      r.head.terms.insert(r.head.terms.begin(), V(iv));
      r.head.terms.insert(r.head.terms.begin(), V(r.loc_var));  // partition id
      Literal& d = r.lits[r.delay_index];
      d.terms.insert(d.terms.begin(), V(iv));
      d.terms.insert(d.terms.begin(), V(r.loc_var));
      d.delay_inputs += 2;
    }
  }
  Relation* orel = p.find_relation(si->out);
  orel->arity += 1;
  Relation* crel = p.find_relation(si->count);
  crel->arity += 2;
  p.entangled.insert({si->count, 0});

  // number of partitions per home; the sender is already partitioned, so its
  // per-home group size is the home count divided by the original homes --
  // recorded by partial partitioning as an EDB relation
  std::string npart = p.fresh_relation(si->out + "__npart");
  res.generated_relations.push_back(npart);
  {
    Relation r{npart, 1, RelationKind::EdbStored, 0, 0, "", {}};
    p.relations.push_back(r);
  }
  // group size inferred from the number of partition homes sharing a proxy:
  // partial partitioning enforces uniform groups, so take any
  // numPart__e-style relation if present, else derive from sender homes
  int64_t group_size = -1;
  for (const auto& [rel, vals] : p.edb_facts)
    if (rel.rfind("numPart__", 0) == 0 && vals.size() == 1 && vals[0].is_int())
      group_size = vals[0].as_int();
  if (group_size < 0)
    throw RewriteError("apply partial_partition before partition_sealed");
  p.edb_facts.push_back({npart, {Value(group_size)}});

  // rebuild the receiver machinery for partitioned fractions
  std::set<std::string> drop = {si->recv, si->sealed, si->gate};
  std::vector<Rule> kept;
  for (auto& r : receiver->rules) {
    if (drop.count(r.head.relation)) continue;
    if (r.head.relation == si->out || r.head.relation == si->count) continue;
    kept.push_back(r);
  }
  receiver->rules = std::move(kept);

  std::string rc = p.fresh_relation(si->out + "__prc");
  std::string sum = p.fresh_relation(si->out + "__psum");
  std::string np = p.fresh_relation(si->out + "__pnp");
  for (const auto& n : {rc, sum, np}) res.generated_relations.push_back(n);

  auto gvars = payload_vars("gg", k);
  auto wvars = payload_vars("ww", m);
  std::vector<std::string> wnames;
  for (const auto& w : wvars) wnames.push_back(w.var);
  auto with = [&](std::vector<Term> pre, std::vector<Term> post, const char* l,
                  const char* t) {
    for (const auto& g : gvars) post.push_back(g);
    post.push_back(V(l));
    post.push_back(V(t));
    std::vector<Term> all = std::move(pre);
    for (auto& x : post) all.push_back(x);
    return all;
  };

  append_rule(p, *receiver,
              mkrule(mklit(rc, with({V("ri")}, {Term::mkagg("count", wnames)}, "rl",
                                    "rt")),
                     {mklit(si->out, with({V("ri")}, wvars, "rl", "rt"))}, {}));
  append_rule(
      p, *receiver,
      mkrule(mklit(sum, with({V("ri")}, {Term::mkagg("sum", {"rcnt"})}, "rl", "rt")),
             {mklit(si->count, with({V("rp"), V("ri")}, {V("rcnt")}, "rl", "rt"))},
             {}));
  append_rule(
      p, *receiver,
      mkrule(mklit(np, with({Term::mkagg("count", {"rp"}), V("ri")}, {}, "rl", "rt")),
             {mklit(si->count, with({V("rp"), V("ri")}, {V("rcnt")}, "rl", "rt"))},
             {}));
  append_rule(p, *receiver,
              mkrule(mklit(si->sealed, with({}, {}, "rl", "rt")),
                     {mklit(rc, with({V("ri")}, {V("rn")}, "rl", "rt")),
                      mklit(sum, with({V("ri")}, {V("rn")}, "rl", "rt")),
                      mklit(np, with({V("rk"), V("ri")}, {}, "rl", "rt")),
                      mklit(npart, {V("rk")})},
                     {}));
  append_rule(p, *receiver,
              mkrule(mklit(si->sealed, with({}, {}, "rl", "rt")),
                     {mklit(sum, with({V("ri")}, {C(Value(int64_t(0)))}, "rl", "rt")),
                      mklit(np, with({V("rk"), V("ri")}, {}, "rl", "rt")),
                      mklit(npart, {V("rk")})},
                     {}));
  append_rule(p, *receiver,
              mkrule(mklit(si->gate, with({}, wvars, "rl", "rt")),
                     {mklit(si->out, with({V("ri")}, wvars, "rl", "rt")),
                      mklit(si->sealed, with({}, {}, "rl", "rt"))},
                     {}));
  append_rule(p, *receiver,
              mkrule(mklit(si->out, with({V("ri")}, wvars, "rl", "rt2")),
                     {mklit(si->out, with({V("ri")}, wvars, "rl", "rt")),
                      mklit(si->sealed, with({}, {}, "rl", "rt"), true)},
                     {succ("rt2", "rt")}));
  append_rule(
      p, *receiver,
      mkrule(mklit(si->count, with({V("rp"), V("ri")}, {V("rn")}, "rl", "rt2")),
             {mklit(si->count, with({V("rp"), V("ri")}, {V("rn")}, "rl", "rt")),
              mklit(si->sealed, with({}, {}, "rl", "rt"), true)},
             {succ("rt2", "rt")}));

  si->recv = rc;
  res.evidence.push_back("sealed output '" + si->out +
                         "' recombines fractions from " + std::to_string(group_size) +
                         " partitions");

  reanalyze(p);
  ValidationReport rep = check_well_formed(p);
  if (!rep.ok())
    throw RewriteError("partition sealing produced an ill-formed program:\n" +
                       rep.str());
  res.program = std::move(p);
  return res;
}

}  // namespace dedopt
