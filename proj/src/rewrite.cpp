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

#include "dedopt/rewrite.hpp"

#include <algorithm>
#include <set>

#include "dedopt/parser.hpp"
#include "dedopt/printer.hpp"
#include "dedopt/validate.hpp"

namespace dedopt {

namespace rewrite_detail {

Term V(const std::string& v) { return Term::mkvar(v); }
Term C(Value v) { return Term::mkconst(std::move(v)); }

Literal mklit(const std::string& rel, std::vector<Term> terms, bool neg) {
  Literal l;
  l.relation = rel;
  l.terms = std::move(terms);
  l.negated = neg;
  return l;
}

Literal mkdelay(std::vector<Term> inputs, const std::string& out_var) {
  Literal l;
  l.relation = "delay";
  l.delay_inputs = static_cast<int>(inputs.size());
  l.terms = std::move(inputs);
  l.terms.push_back(V(out_var));
  return l;
}

Rule mkrule(Literal head, std::vector<Literal> lits, std::vector<Constraint> cons) {
  Rule r;
  r.head = std::move(head);
  r.lits = std::move(lits);
  r.cons = std::move(cons);
  for (size_t i = 0; i < r.lits.size(); ++i)
    r.order.push_back({true, static_cast<int>(i)});
  for (size_t i = 0; i < r.cons.size(); ++i)
    r.order.push_back({false, static_cast<int>(i)});
  return r;
}

Constraint succ(const std::string& next, const std::string& cur) {
  return Constraint{next, "=", {ExprAtom{true, cur, 0}, ExprAtom{false, "", 1}}};
}

Constraint cmp(const std::string& lhs, const std::string& op,
               std::vector<ExprAtom> rhs) {
  return Constraint{lhs, op, std::move(rhs)};
}

ExprAtom av(const std::string& v) { return ExprAtom{true, v, 0}; }
ExprAtom an(int64_t n) { return ExprAtom{false, "", n}; }

std::string add_forward_fn(Program& p, const std::vector<std::string>& from,
                           const std::vector<std::string>& to,
                           std::vector<std::string>& generated) {
  Relation f;
  f.name = p.fresh_relation("forward__fw");
  f.kind = RelationKind::EdbFunction;
  f.fn_inputs = 1;
  f.fn_outputs = 1;
  f.arity = 2;
  f.builtin = "forwardmap";
  for (size_t i = 0; i < from.size(); ++i)
    f.builtin_args.push_back(from[i] + "=" + to[i]);
  p.relations.push_back(f);
  generated.push_back(f.name);
  return f.name;
}

namespace {

std::string fresh_var(const Rule& r, const std::string& stem) {
  std::vector<std::string> used;
  collect_rule_vars(r, used);
  std::string cand = stem;
  int i = 2;
  while (std::find(used.begin(), used.end(), cand) != used.end())
    cand = stem + std::to_string(i++);
  return cand;
}

}  // namespace

void retarget_producers(Program& p, const std::vector<std::string>& rels,
                        const std::string& fwd_fn,
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
      Term& loc = r.head.terms[r.head.terms.size() - 2];
      std::string oldv = loc.var;
      std::string newv = fresh_var(r, oldv + "_fw");
      loc = V(newv);
      Literal& d = r.lits[r.delay_index];
      for (int i = 0; i < d.delay_inputs; ++i)
        if (d.terms[i].kind == TermKind::Var && d.terms[i].var == oldv)
          d.terms[i] = V(newv);
      r.lits.push_back(mklit(fwd_fn, {V(oldv), V(newv)}));
      r.order.push_back({true, static_cast<int>(r.lits.size()) - 1});
    }
  }
}

void replace_refs(std::vector<Rule>& rules, const std::string& from,
                  const std::string& to) {
  for (auto& r : rules)
    for (auto& l : r.lits)
      if (!l.is_delay() && l.relation == from) l.relation = to;
}

void flag_spacetime(Program& p, const Rule& r) {
  // structural spacetime variables: shared (l, t), successor heads, delay out
  std::set<std::string> st;
  for (const auto& l : r.lits) {
    if (l.is_delay()) {
      if (l.terms.back().kind == TermKind::Var) st.insert(l.terms.back().var);
      continue;
    }
    if (l.negated) continue;
    const Relation* rel = p.find_relation(l.relation);
    bool idb_shape = rel ? rel->is_idb_schema() : true;
    if (!idb_shape) continue;
    int n = static_cast<int>(l.terms.size());
    if (n >= 2) {
      if (l.terms[n - 2].kind == TermKind::Var) st.insert(l.terms[n - 2].var);
      if (l.terms[n - 1].kind == TermKind::Var) st.insert(l.terms[n - 1].var);
    }
  }
  for (const auto& con : r.cons)
    if (con.is_successor() && con.rhs[0].is_var && st.count(con.rhs[0].var))
      st.insert(con.lhs);

  auto flag_lit = [&](const Literal& l) {
    if (l.is_delay()) return;
    const Relation* rel = p.find_relation(l.relation);
    if (rel && !rel->is_idb_schema()) return;
    int pa = rel ? rel->payload_arity() : static_cast<int>(l.terms.size()) - 2;
    for (int i = 0; i < pa && i < static_cast<int>(l.terms.size()); ++i)
      if (l.terms[i].kind == TermKind::Var && st.count(l.terms[i].var))
        p.entangled.insert({l.relation, i});
  };
  flag_lit(r.head);
  for (const auto& l : r.lits) flag_lit(l);
}

}  // namespace rewrite_detail

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

int payload_arity_of(const Program& p, const std::string& rel) {
  const Relation* r = p.find_relation(rel);
  if (!r) throw RewriteError("unknown relation '" + rel + "'");
  return r->payload_arity();
}

// async forwarding rule: to_rel(v.., l2, t2) :- from_rel(v.., l, t),
// fwd(l, l2), delay((v.., l, t, l2), t2); with_batch appends the send time.
Rule forwarding_rule(const Program& p, const std::string& from_rel,
                     const std::string& to_rel, const std::string& fwd_fn,
                     bool with_batch) {
  int pa = payload_arity_of(p, from_rel);
  auto vs = payload_vars("fv", pa);
  std::vector<Term> head = vs;
  if (with_batch) head.push_back(V("ft"));
  head.push_back(V("fl2"));
  head.push_back(V("ft2"));
  std::vector<Term> din = vs;
  din.push_back(V("fl"));
  din.push_back(V("ft"));
  din.push_back(V("fl2"));
  std::vector<Term> body = vs;
  body.push_back(V("fl"));
  body.push_back(V("ft"));
  return mkrule(mklit(to_rel, head),
                {mklit(from_rel, body), mklit(fwd_fn, {V("fl"), V("fl2")}),
                 mkdelay(din, "ft2")},
                {});
}

struct SplitView {
  Component c1;  // stays
  Component c2;  // moves
  std::vector<int> keep, move;
};

SplitView split_view(Program& p, const SplitPlan& plan) {
  Component* src = p.find_component(plan.component);
  if (!src) throw RewriteError("no component '" + plan.component + "'");
  std::set<int> mv(plan.move_rules.begin(), plan.move_rules.end());
  for (int i : mv)
    if (i < 0 || i >= static_cast<int>(src->rules.size()))
      throw RewriteError("rule index out of range in split plan");
  if (mv.empty() || mv.size() == src->rules.size())
    throw RewriteError("split must move a proper non-empty rule subset");
  if (plan.new_addrs.size() != src->homes.size())
    throw RewriteError("need one new address per home of '" + src->name + "'");
  if (p.find_component(plan.new_component))
    throw RewriteError("component '" + plan.new_component + "' already exists");
  SplitView v;
  for (int i = 0; i < static_cast<int>(src->rules.size()); ++i)
    (mv.count(i) ? v.move : v.keep).push_back(i);
  v.c1 = make_split(*src, v.keep, src->name);
  v.c2 = make_split(*src, v.move, plan.new_component);
  v.c2.homes = plan.new_addrs;
  return v;
}

void check_protected(const ComponentSignature& sig, const Protected& prot,
                     const char* what) {
  for (const auto& r : sig.referenced)
    if (std::find(prot.begin(), prot.end(), r) != prot.end())
      throw RewriteError(std::string(what) + " would retarget protected channel '" +
                         r + "'");
}

// Commits a split: shrinks the source component and installs the new one.
std::pair<Component*, Component*> commit_split(Program& p, const SplitView& v,
                                               const SplitPlan& plan) {
  Component* src = p.find_component(plan.component);
  src->rules = v.c1.rules;
  p.components.push_back(v.c2);
  return {p.find_component(plan.component), p.find_component(plan.new_component)};
}

void finish(Program& p, RewriteResult& res) {
  reanalyze(p);
  ValidationReport rep = check_well_formed(p);
  if (!rep.ok())
    throw RewriteError("rewrite produced an ill-formed program:\n" + rep.str());
  res.program = std::move(p);
}

// Channels referenced by a rule set that nothing in the program produces:
// their facts arrive at the source component's home and must be relayed.
std::vector<std::string> producerless_channels(const Program& p,
                                               const ComponentSignature& sig) {
  std::vector<std::string> out;
  for (const auto& r : sig.inputs) {
    const Relation* rel = p.find_relation(r);
    if (rel && rel->kind == RelationKind::Channel && !p.has_defining_rule(r))
      out.push_back(r);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Redirection
// ---------------------------------------------------------------------------

RewriteResult redirection(Program p, const std::string& component,
                          const std::vector<std::string>& new_addrs,
                          const Protected& prot) {
  Component* c = p.find_component(component);
  if (!c) throw RewriteError("no component '" + component + "'");
  if (new_addrs.size() != c->homes.size())
    throw RewriteError("need one new address per home");
  RewriteResult res;
  ComponentSignature sig = signature(*c, p);
  check_protected(sig, prot, "redirection");
  std::string fwd = add_forward_fn(p, c->homes, new_addrs, res.generated_relations);
  retarget_producers(p, sig.referenced, fwd, {component});
  c->homes = new_addrs;
  res.evidence.push_back("redirected inputs of '" + component + "'");
  finish(p, res);
  return res;
}

// ---------------------------------------------------------------------------
// Mutually independent decoupling
// ---------------------------------------------------------------------------

RewriteResult decouple_mutually_independent(Program p, const SplitPlan& plan,
                                            const Protected& prot) {
  SplitView v = split_view(p, plan);
  Verdict ver = is_mutually_independent(v.c1, v.c2, p);
  if (!ver.ok) throw RewriteError("not mutually independent: " + ver.str());
  RewriteResult res;
  res.evidence.push_back("mutual independence: " + ver.str());

  ComponentSignature s2 = signature(v.c2, p);
  check_protected(s2, prot, "mutually independent decoupling");
  auto orphans = producerless_channels(p, s2);
  if (!orphans.empty())
    throw RewriteError("channel '" + orphans[0] +
                       "' has no producer to redirect; this split would require "
                       "retargeting its sender");

  Component* src = p.find_component(plan.component);
  std::vector<std::string> old_homes = src->homes;
  commit_split(p, v, plan);
  std::string fwd = add_forward_fn(p, old_homes, plan.new_addrs,
                                   res.generated_relations);
  retarget_producers(p, s2.referenced, fwd, {plan.component, plan.new_component});
  finish(p, res);
  return res;
}

// ---------------------------------------------------------------------------
// Forwarding-based decouplings
// ---------------------------------------------------------------------------

namespace {

struct ForwardingCtx {
  std::vector<std::string> crossing;  // heads of C1 or relayed channels
  std::vector<std::string> external;  // produced by other components
};

ForwardingCtx classify_inputs(const Program& p, const Component& c1,
                              const ComponentSignature& s2) {
  ForwardingCtx ctx;
  ComponentSignature s1 = signature(c1, p);
  for (const auto& r : s2.inputs) {
    bool in_c1 = std::find(s1.heads.begin(), s1.heads.end(), r) != s1.heads.end();
    const Relation* rel = p.find_relation(r);
    bool orphan_channel =
        rel && rel->kind == RelationKind::Channel && !p.has_defining_rule(r);
    if (in_c1 || orphan_channel)
      ctx.crossing.push_back(r);
    else
      ctx.external.push_back(r);
  }
  return ctx;
}

}  // namespace

RewriteResult decouple_functional(Program p, const SplitPlan& plan,
                                  const Protected& prot) {
  (void)prot;  // inputs of the moved side are relayed, never retargeted
  SplitView v = split_view(p, plan);
  Verdict ind = is_independent_for_forwarding(v.c1, v.c2, p);
  if (!ind.ok) throw RewriteError("split not independent: " + ind.str());
  Verdict fn = is_functional(v.c2, p);
  if (!fn.ok) throw RewriteError("component not functional: " + fn.str());

  RewriteResult res;
  res.evidence.push_back("independent: " + ind.str());
  res.evidence.push_back("functional: " + fn.str());

  ComponentSignature s2 = signature(v.c2, p);
  ForwardingCtx ctx = classify_inputs(p, v.c1, s2);

  auto [c1, c2] = commit_split(p, v, plan);
  std::string fwd =
      add_forward_fn(p, c1->homes, plan.new_addrs, res.generated_relations);
  for (const auto& r : ctx.crossing) {
    std::string fwd_rel = p.fresh_relation(r + "__fw");
    res.generated_relations.push_back(fwd_rel);
    replace_refs(c2->rules, r, fwd_rel);
    append_rule(p, *c1, forwarding_rule(p, r, fwd_rel, fwd, false));
  }
  if (!ctx.external.empty())
    retarget_producers(p, ctx.external, fwd, {plan.component, plan.new_component});
  finish(p, res);
  return res;
}

RewriteResult decouple_monotonic(Program p, const SplitPlan& plan,
                                 MonotonicityMode mode, const Protected& prot) {
  (void)prot;
  SplitView v = split_view(p, plan);
  Verdict ind = is_independent_for_forwarding(v.c1, v.c2, p);
  if (!ind.ok) throw RewriteError("split not independent: " + ind.str());
  Verdict mono = is_monotonic(v.c2, p, mode);
  if (!mono.ok) throw RewriteError("component not monotonic: " + mono.str());

  RewriteResult res;
  res.evidence.push_back("independent: " + ind.str());
  res.evidence.push_back("monotonic: " + mono.str());

  ComponentSignature s2 = signature(v.c2, p);
  ForwardingCtx ctx = classify_inputs(p, v.c1, s2);

  auto [c1, c2] = commit_split(p, v, plan);
  std::string fwd =
      add_forward_fn(p, c1->homes, plan.new_addrs, res.generated_relations);
  for (const auto& r : ctx.crossing) {
    std::string fwd_rel = p.fresh_relation(r + "__fw");
    std::string alias = p.fresh_relation(r + "__p");
    res.generated_relations.push_back(fwd_rel);
    res.generated_relations.push_back(alias);
    replace_refs(c2->rules, r, alias);
    append_rule(p, *c1, forwarding_rule(p, r, fwd_rel, fwd, false));

    int pa = payload_arity_of(p, r);
    auto vs = payload_vars("av", pa);
    auto with = [&](const char* l, const char* t) {
      std::vector<Term> out = vs;
      out.push_back(V(l));
      out.push_back(V(t));
      return out;
    };
    append_rule(p, *c2,
                mkrule(mklit(alias, with("al", "at")),
                       {mklit(fwd_rel, with("al", "at"))}, {}));
    append_rule(p, *c2,
                mkrule(mklit(alias, with("al", "at2")),
                       {mklit(alias, with("al", "at"))}, {succ("at2", "at")}));
  }
  if (!ctx.external.empty())
    retarget_producers(p, ctx.external, fwd, {plan.component, plan.new_component});
  finish(p, res);
  return res;
}

// ---------------------------------------------------------------------------
// Batching (state-machine) and asymmetric decoupling
// ---------------------------------------------------------------------------

namespace {

struct BatchNames {
  std::string can_seal;
  std::string batch_size;
};

// Sends `rels` (arriving at `producer`) to `receiver` in sequenced batches
// tagged with the producer-side timestep.
BatchNames apply_batching(Program& p, Component& producer, Component& receiver,
                          const std::vector<std::string>& rels,
                          const std::string& fwd_fn,
                          std::vector<std::string>& generated) {
  BatchNames names;
  std::vector<std::string> fwd_rels, pcnt_rels, rcnt_rels, has_rels, s_rels;
  for (const auto& r : rels) {
    fwd_rels.push_back(p.fresh_relation(r + "__b"));
    pcnt_rels.push_back(p.fresh_relation(r + "__n"));
    rcnt_rels.push_back(p.fresh_relation(r + "__rn"));
    has_rels.push_back(p.fresh_relation(r + "__has"));
    s_rels.push_back(p.fresh_relation(r + "__s"));
    generated.push_back(fwd_rels.back());
    generated.push_back(pcnt_rels.back());
    generated.push_back(rcnt_rels.back());
    generated.push_back(has_rels.back());
    generated.push_back(s_rels.back());
  }
  std::string bsz = p.fresh_relation("batchSize__g");
  std::string blast = p.fresh_relation("batchLast__g");
  std::string binp = p.fresh_relation("batchInfo__g");
  std::string rcv = p.fresh_relation("recvSize__g");
  std::string cansl = p.fresh_relation("canSeal__g");
  std::string sealed = p.fresh_relation("sealed__g");
  for (const auto& n : {bsz, blast, binp, rcv, cansl, sealed}) generated.push_back(n);
  names.can_seal = cansl;
  names.batch_size = bsz;

  // --- producer side ---
  for (size_t i = 0; i < rels.size(); ++i) {
    append_rule(p, producer, forwarding_rule(p, rels[i], fwd_rels[i], fwd_fn, true));
    int pa = payload_arity_of(p, rels[i]);
    auto vs = payload_vars("cv", pa);
    std::vector<std::string> agg_vars;
    for (const auto& t : vs) agg_vars.push_back(t.var);
    std::vector<Term> body = vs;
    body.push_back(V("cl"));
    body.push_back(V("ct"));
    append_rule(p, producer,
                mkrule(mklit(pcnt_rels[i],
                             {Term::mkagg("count0", agg_vars), V("cl"), V("ct")}),
                       {mklit(rels[i], body)}, {}));
  }
  {
    std::vector<Literal> lits;
    std::vector<ExprAtom> sum;
    for (size_t i = 0; i < rels.size(); ++i) {
      lits.push_back(
          mklit(pcnt_rels[i], {V("n" + std::to_string(i + 1)), V("bl"), V("bt")}));
      sum.push_back(av("n" + std::to_string(i + 1)));
    }
    std::vector<Constraint> cons;
    Term total = V("n1");
    if (rels.size() > 1) {
      cons.push_back(cmp("nall", "=", sum));
      total = V("nall");
    }
    append_rule(p, producer,
                mkrule(mklit(bsz, {total, V("bl"), V("bt")}), std::move(lits),
                       std::move(cons)));
  }
  append_rule(p, producer,
              mkrule(mklit(blast, {V("bt"), V("bl"), V("bt2")}),
                     {mklit(bsz, {V("bn"), V("bl"), V("bt")})},
                     {cmp("bn", "!=", {an(0)}), succ("bt2", "bt")}));
  append_rule(p, producer,
              mkrule(mklit(blast, {V("bp"), V("bl"), V("bt2")}),
                     {mklit(blast, {V("bp"), V("bl"), V("bt")}),
                      mklit(bsz, {V("bn"), V("bl"), V("bt")})},
                     {cmp("bn", "=", {an(0)}), succ("bt2", "bt")}));
  append_rule(
      p, producer,
      mkrule(mklit(binp, {V("bn"), V("bt"), V("bp"), V("bl2"), V("bt2")}),
             {mklit(bsz, {V("bn"), V("bl"), V("bt")}),
              mklit(blast, {V("bp"), V("bl"), V("bt")}),
              mklit(fwd_fn, {V("bl"), V("bl2")}),
              mkdelay({V("bn"), V("bt"), V("bp"), V("bl"), V("bl2")}, "bt2")},
             {cmp("bn", "!=", {an(0)})}));
  append_rule(
      p, producer,
      mkrule(mklit(binp, {V("bn"), V("bt"), C(Value(int64_t(-1))), V("bl2"), V("bt2")}),
             {mklit(bsz, {V("bn"), V("bl"), V("bt")}),
              mklit(blast, {V("bp"), V("bl"), V("bt")}, true),
              mklit(fwd_fn, {V("bl"), V("bl2")}),
              mkdelay({V("bn"), V("bt"), V("bl"), V("bl2")}, "bt2")},
             {cmp("bn", "!=", {an(0)})}));

  // --- receiver side ---
  for (size_t i = 0; i < rels.size(); ++i) {
    const std::string& r = rels[i];
    std::string ok = p.fresh_relation(r + "__ok");
    generated.push_back(ok);
    replace_refs(receiver.rules, r, ok);
    int pa = payload_arity_of(p, r);
    auto vs = payload_vars("sv", pa);
    auto with = [&](std::initializer_list<Term> tail) {
      std::vector<Term> out = vs;
      for (const auto& t : tail) out.push_back(t);
      return out;
    };
    append_rule(p, receiver,
                mkrule(mklit(s_rels[i], with({V("st1"), V("sl"), V("st")})),
                       {mklit(fwd_rels[i], with({V("st1"), V("sl"), V("st")}))}, {}));
    append_rule(p, receiver,
                mkrule(mklit(s_rels[i], with({V("st1"), V("sl"), V("st2")})),
                       {mklit(s_rels[i], with({V("st1"), V("sl"), V("st")})),
                        mklit(sealed, {V("st1"), V("sl"), V("st")}, true)},
                       {succ("st2", "st")}));
    std::vector<std::string> agg_vars;
    for (const auto& t : vs) agg_vars.push_back(t.var);
    append_rule(p, receiver,
                mkrule(mklit(rcnt_rels[i], {Term::mkagg("count", agg_vars), V("st1"),
                                            V("sl"), V("st")}),
                       {mklit(s_rels[i], with({V("st1"), V("sl"), V("st")}))}, {}));
    append_rule(p, receiver,
                mkrule(mklit(has_rels[i], {V("hc"), V("ht1"), V("hl"), V("ht")}),
                       {mklit(rcnt_rels[i], {V("hc"), V("ht1"), V("hl"), V("ht")})},
                       {}));
    append_rule(
        p, receiver,
        mkrule(mklit(has_rels[i],
                     {C(Value(int64_t(0))), V("ht1"), V("hl"), V("ht")}),
               {mklit(binp, {V("hn"), V("ht1"), V("hp"), V("hl"), V("ht")}),
                mklit(rcnt_rels[i], {V("hc"), V("ht1"), V("hl"), V("ht")}, true)},
               {}));
    append_rule(p, receiver,
                mkrule(mklit(ok, with({V("sl"), V("st")})),
                       {mklit(s_rels[i], with({V("st1"), V("sl"), V("st")})),
                        mklit(cansl, {V("st1"), V("sl"), V("st")})},
                       {}));
  }
  {
    std::vector<Literal> lits;
    std::vector<ExprAtom> sum;
    for (size_t i = 0; i < rels.size(); ++i) {
      lits.push_back(mklit(has_rels[i], {V("m" + std::to_string(i + 1)), V("rt1"),
                                         V("rl"), V("rt")}));
      sum.push_back(av("m" + std::to_string(i + 1)));
    }
    std::vector<Constraint> cons;
    Term total = V("m1");
    if (rels.size() > 1) {
      cons.push_back(cmp("mall", "=", sum));
      total = V("mall");
    }
    append_rule(p, receiver,
                mkrule(mklit(rcv, {total, V("rt1"), V("rl"), V("rt")}),
                       std::move(lits), std::move(cons)));
  }
  append_rule(p, receiver,
              mkrule(mklit(binp, {V("iv1"), V("iv2"), V("iv3"), V("il"), V("it2")}),
                     {mklit(binp, {V("iv1"), V("iv2"), V("iv3"), V("il"), V("it")}),
                      mklit(sealed, {V("iv2"), V("il"), V("it")}, true)},
                     {succ("it2", "it")}));
  append_rule(p, receiver,
              mkrule(mklit(cansl, {V("ct1"), V("cl"), V("ct")}),
                     {mklit(rcv, {V("cn"), V("ct1"), V("cl"), V("ct")}),
                      mklit(binp, {V("cn"), V("ct1"), V("cp"), V("cl"), V("ct")}),
                      mklit(sealed, {V("cp"), V("cl"), V("ct")}),
                      mklit(sealed, {V("ct1"), V("cl"), V("ct")}, true)},
                     {}));
  append_rule(p, receiver,
              mkrule(mklit(cansl, {V("ct1"), V("cl"), V("ct")}),
                     {mklit(rcv, {V("cn"), V("ct1"), V("cl"), V("ct")}),
                      mklit(binp, {V("cn"), V("ct1"), C(Value(int64_t(-1))), V("cl"),
                                   V("ct")}),
                      mklit(sealed, {V("ct1"), V("cl"), V("ct")}, true)},
                     {}));
  append_rule(p, receiver,
              mkrule(mklit(sealed, {V("ct1"), V("cl"), V("ct2")}),
                     {mklit(cansl, {V("ct1"), V("cl"), V("ct")})},
                     {succ("ct2", "ct")}));
  append_rule(p, receiver,
              mkrule(mklit(sealed, {V("ct1"), V("cl"), V("ct2")}),
                     {mklit(sealed, {V("ct1"), V("cl"), V("ct")})},
                     {succ("ct2", "ct")}));
  return names;
}

}  // namespace

RewriteResult decouple_state_machine(Program p, const SplitPlan& plan,
                                     const Protected& prot) {
  (void)prot;  // inputs keep arriving at the stay-home side
  SplitView v = split_view(p, plan);
  Verdict ind = is_independent_for_forwarding(v.c1, v.c2, p);
  if (!ind.ok) throw RewriteError("split not independent: " + ind.str());
  Verdict sm = is_state_machine(v.c2, p);
  if (!sm.ok) throw RewriteError("component is not a state machine: " + sm.str());

  RewriteResult res;
  res.evidence.push_back("independent: " + ind.str());
  res.evidence.push_back("state machine: " + sm.str());

  ComponentSignature s2 = signature(v.c2, p);
  auto [c1, c2] = commit_split(p, v, plan);
  std::string fwd =
      add_forward_fn(p, c1->homes, plan.new_addrs, res.generated_relations);
  BatchNames names =
      apply_batching(p, *c1, *c2, s2.inputs, fwd, res.generated_relations);
  res.meta["can_seal"] = names.can_seal;
  finish(p, res);
  return res;
}

RewriteResult decouple_asymmetric(Program p, const SplitPlan& plan,
                                  MonotonicityMode mode, const Protected& prot) {
  (void)prot;
  SplitView v = split_view(p, plan);
  // the moved side feeds the stay-home side
  Verdict ind = is_independent_for_forwarding(v.c2, v.c1, p);
  if (!ind.ok) throw RewriteError("moved side not independent: " + ind.str());
  Verdict sm = is_state_machine(v.c2, p);
  if (!sm.ok) throw RewriteError("moved side is not a state machine: " + sm.str());
  Verdict mono = is_monotonic(v.c2, p, mode);
  Verdict fn = is_functional(v.c2, p);
  if (!mono.ok && !fn.ok)
    throw RewriteError("moved side neither monotonic (" + mono.str() +
                       ") nor functional (" + fn.str() + ")");

  RewriteResult res;
  res.evidence.push_back("independent: " + ind.str());
  res.evidence.push_back("state machine: " + sm.str());
  res.evidence.push_back(mono.ok ? "monotonic: " + mono.str()
                                 : "functional: " + fn.str());

  ComponentSignature s1 = signature(v.c1, p);
  ComponentSignature s2 = signature(v.c2, p);
  std::vector<std::string> batched;
  for (const auto& r : s1.inputs)
    if (std::find(s2.heads.begin(), s2.heads.end(), r) != s2.heads.end())
      batched.push_back(r);
  std::vector<std::string> external = s2.inputs;

  // the moved side's original outputs, before any generation
  std::vector<int> moved_async;
  for (size_t i = 0; i < v.c2.rules.size(); ++i)
    if (v.c2.rules[i].kind == RuleKind::Asynchronous &&
        std::find(batched.begin(), batched.end(), v.c2.rules[i].head.relation) ==
            batched.end())
      moved_async.push_back(static_cast<int>(i));

  auto [c1, c2] = commit_split(p, v, plan);
  std::vector<std::string> from = c1->homes, to = plan.new_addrs;
  for (size_t i = 0; i < plan.new_addrs.size(); ++i) {
    from.push_back(plan.new_addrs[i]);
    to.push_back(c1->homes[i]);
  }
  std::string fwd = add_forward_fn(p, from, to, res.generated_relations);

  BatchNames names =
      apply_batching(p, *c2, *c1, batched, fwd, res.generated_relations);
  if (!external.empty())
    retarget_producers(p, external, fwd, {plan.component, plan.new_component});

  // batch acknowledgement: the receiver acks each sealed batch back
  std::string ack = p.fresh_relation("batchAck__g");
  std::string bhist = p.fresh_relation("batchHist__g");
  res.generated_relations.push_back(ack);
  res.generated_relations.push_back(bhist);
  append_rule(p, *c1,
              mkrule(mklit(ack, {V("kt1"), V("kl2"), V("kt2")}),
                     {mklit(names.can_seal, {V("kt1"), V("kl"), V("kt")}),
                      mklit(fwd, {V("kl"), V("kl2")}),
                      mkdelay({V("kt1"), V("kl"), V("kt"), V("kl2")}, "kt2")},
                     {}));
  append_rule(p, *c2,
              mkrule(mklit(ack, {V("kt1"), V("kl"), V("kt2")}),
                     {mklit(ack, {V("kt1"), V("kl"), V("kt")})},
                     {succ("kt2", "kt")}));
  append_rule(p, *c2,
              mkrule(mklit(bhist, {V("bt"), V("bl"), V("bt2")}),
                     {mklit(names.batch_size, {V("bn"), V("bl"), V("bt")})},
                     {cmp("bn", "!=", {an(0)}), succ("bt2", "bt")}));
  append_rule(p, *c2,
              mkrule(mklit(bhist, {V("bp"), V("bl"), V("bt2")}),
                     {mklit(bhist, {V("bp"), V("bl"), V("bt")})},
                     {succ("bt2", "bt")}));

  // buffer every original output of the moved side until its batch is acked
  for (int idx : moved_async) {
    Rule& orig = c2->rules[idx];
    const Relation* hrel = p.find_relation(orig.head.relation);
    int pa = hrel ? hrel->payload_arity()
                  : static_cast<int>(orig.head.terms.size()) - 2;
    std::string buf = p.fresh_relation(orig.head.relation + "__buf");
    std::string hasbt = p.fresh_relation(orig.head.relation + "__hasbt");
    std::string bt = p.fresh_relation(orig.head.relation + "__bt");
    std::string cs = p.fresh_relation(orig.head.relation + "__cansend");
    for (const auto& n : {buf, hasbt, bt, cs}) res.generated_relations.push_back(n);

    std::string lv = orig.loc_var, tv = orig.time_var;
    std::string destv = orig.head.terms[pa].var;
    Rule capture;
    capture.cons = orig.cons;
    for (size_t i = 0; i < orig.lits.size(); ++i)
      if (static_cast<int>(i) != orig.delay_index)
        capture.lits.push_back(orig.lits[i]);
    std::vector<Term> chead = {V(tv), V(destv)};
    for (int i = 0; i < pa; ++i) chead.push_back(orig.head.terms[i]);
    chead.push_back(V(lv));
    chead.push_back(V(tv));
    capture.head = mklit(buf, chead);
    for (size_t i = 0; i < capture.lits.size(); ++i)
      capture.order.push_back({true, static_cast<int>(i)});
    for (size_t i = 0; i < capture.cons.size(); ++i)
      capture.order.push_back({false, static_cast<int>(i)});

    auto vs = payload_vars("ov", pa);
    auto buf_pat = [&](const std::string& timevar) {
      std::vector<Term> terms = {V("ot2"), V("od")};
      for (const auto& t : vs) terms.push_back(t);
      terms.push_back(V("ol"));
      terms.push_back(V(timevar));
      return terms;
    };
    Rule has = mkrule(mklit(hasbt, {V("ot2"), V("ol"), V("ot")}),
                      {mklit(buf, buf_pat("ot")),
                       mklit(bhist, {V("op"), V("ol"), V("ot")})},
                      {cmp("op", "<=", {av("ot2")})});
    Rule btr =
        mkrule(mklit(bt, {Term::mkagg("max", {"op"}), V("ot2"), V("ol"), V("ot")}),
               {mklit(buf, buf_pat("ot")), mklit(bhist, {V("op"), V("ol"), V("ot")})},
               {cmp("op", "<=", {av("ot2")})});
    Rule cs1 = mkrule(mklit(cs, {V("ot2"), V("ol"), V("ot")}),
                      {mklit(bt, {V("ob"), V("ot2"), V("ol"), V("ot")}),
                       mklit(ack, {V("ob"), V("ol"), V("ot")})},
                      {});
    Rule cs2 = mkrule(mklit(cs, {V("ot2"), V("ol"), V("ot")}),
                      {mklit(buf, buf_pat("ot")),
                       mklit(hasbt, {V("ot2"), V("ol"), V("ot")}, true)},
                      {});
    Rule carry = mkrule(mklit(buf, buf_pat("ot3")),
                        {mklit(buf, buf_pat("ot")),
                         mklit(cs, {V("ot2"), V("ol"), V("ot")}, true)},
                        {succ("ot3", "ot")});
    std::vector<Term> shead = vs;
    shead.push_back(V("od"));
    shead.push_back(V("ot4"));
    std::vector<Term> din = {V("ot2"), V("od")};
    for (const auto& t : vs) din.push_back(t);
    din.push_back(V("ol"));
    din.push_back(V("ot"));
    Rule send = mkrule(mklit(orig.head.relation, shead),
                       {mklit(buf, buf_pat("ot")),
                        mklit(cs, {V("ot2"), V("ol"), V("ot")}), mkdelay(din, "ot4")},
                       {});
    orig = capture;
    flag_spacetime(p, orig);
    append_rule(p, *c2, has);
    append_rule(p, *c2, btr);
    append_rule(p, *c2, cs1);
    append_rule(p, *c2, cs2);
    append_rule(p, *c2, carry);
    append_rule(p, *c2, send);
  }
  res.meta["can_seal"] = names.can_seal;
  finish(p, res);
  return res;
}

}  // namespace dedopt
