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

#include "dedopt/validate.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace dedopt {

// --- ast.hpp helpers --------------------------------------------------------

const Relation* Program::find_relation(const std::string& name) const {
  for (const auto& r : relations)
    if (r.name == name) return &r;
  return nullptr;
}
Relation* Program::find_relation(const std::string& name) {
  for (auto& r : relations)
    if (r.name == name) return &r;
  return nullptr;
}
const Component* Program::find_component(const std::string& name) const {
  for (const auto& c : components)
    if (c.name == name) return &c;
  return nullptr;
}
Component* Program::find_component(const std::string& name) {
  for (auto& c : components)
    if (c.name == name) return &c;
  return nullptr;
}

bool Program::has_defining_rule(const std::string& rel) const {
  for (const auto& c : components)
    for (const auto& r : c.rules)
      if (r.head.relation == rel) return true;
  return false;
}

bool Program::is_persisted(const std::string& rel) const {
  for (const auto& c : components)
    for (const auto& r : c.rules)
      if (r.is_persistence && r.gc_guards.empty() && r.head.relation == rel)
        return true;
  return false;
}

std::string Program::fresh_relation(const std::string& stem) const {
  if (!find_relation(stem)) return stem;
  for (int i = 2;; ++i) {
    std::string cand = stem + std::to_string(i);
    if (!find_relation(cand)) return cand;
  }
}

std::string Program::fresh_component(const std::string& stem) const {
  if (!find_component(stem)) return stem;
  for (int i = 2;; ++i) {
    std::string cand = stem + std::to_string(i);
    if (!find_component(cand)) return cand;
  }
}

std::vector<std::string> Program::all_homes() const {
  std::vector<std::string> out;
  for (const auto& c : components)
    for (const auto& h : c.homes)
      if (std::find(out.begin(), out.end(), h) == out.end()) out.push_back(h);
  return out;
}

std::vector<std::string> literal_vars(const Literal& lit) {
  std::vector<std::string> out;
  for (const auto& t : lit.terms) {
    if (t.kind == TermKind::Var) {
      if (std::find(out.begin(), out.end(), t.var) == out.end()) out.push_back(t.var);
    } else if (t.kind == TermKind::Agg && t.agg_fn != "seal") {
      // seal<> names a relation, not variables
      for (const auto& v : t.agg_vars)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  return out;
}

void collect_rule_vars(const Rule& r, std::vector<std::string>& out) {
  auto add = [&out](const std::string& v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  for (const auto& v : literal_vars(r.head)) add(v);
  for (const auto& l : r.lits)
    for (const auto& v : literal_vars(l)) add(v);
  for (const auto& c : r.cons) {
    add(c.lhs);
    for (const auto& a : c.rhs)
      if (a.is_var) add(a.var);
  }
}

// --- classification ---------------------------------------------------------

namespace {

bool term_is_var(const Term& t, const std::string* out = nullptr) {
  (void)out;
  return t.kind == TermKind::Var;
}

}  // namespace

void classify_rule(Rule& r, const Program& p) {
  r.delay_index = -1;
  r.is_persistence = false;
  r.gc_guards.clear();

  // Shared body (l, t) across all IDB-schema body literals.
  std::string lvar, tvar;
  bool found_idb = false;
  for (size_t i = 0; i < r.lits.size(); ++i) {
    const Literal& lit = r.lits[i];
    if (lit.is_delay()) {
      if (r.delay_index >= 0) throw std::runtime_error("multiple delay literals");
      r.delay_index = static_cast<int>(i);
      continue;
    }
    const Relation* rel = p.find_relation(lit.relation);
    if (!rel) throw std::runtime_error("unknown relation '" + lit.relation + "'");
    if (!rel->is_idb_schema()) continue;
    int n = rel->arity;
    const Term& lt = lit.terms[n - 2];
    const Term& tt = lit.terms[n - 1];
    if (!term_is_var(lt) || !term_is_var(tt))
      throw std::runtime_error("location/time attributes of '" + lit.relation +
                               "' must be variables");
    if (!found_idb) {
      lvar = lt.var;
      tvar = tt.var;
      found_idb = true;
    } else if (lt.var != lvar || tt.var != tvar) {
      throw std::runtime_error(
          "body literals bind different location/time variables ('" + lvar + "," +
          tvar + "' vs '" + lt.var + "," + tt.var + "')");
    }
  }
  if (!found_idb)
    throw std::runtime_error("rule body references no location/time-bearing relation");
  r.loc_var = lvar;
  r.time_var = tvar;

  const Relation* hrel = p.find_relation(r.head.relation);
  if (!hrel) throw std::runtime_error("unknown head relation");
  if (!hrel->is_idb_schema())
    throw std::runtime_error("EDB relation '" + r.head.relation +
                             "' cannot appear in a rule head");
  if (hrel->arity < 2 || r.head.terms.size() < 2)
    throw std::runtime_error("IDB relation '" + r.head.relation +
                             "' needs location and time attributes");
  // the head's location/time are its last two terms (seal<> heads are
  // narrower than the expanded relation they declare)
  const Term& hl = r.head.terms[r.head.terms.size() - 2];
  const Term& ht = r.head.terms[r.head.terms.size() - 1];
  if (!term_is_var(hl) || !term_is_var(ht))
    throw std::runtime_error("head location/time must be variables");

  if (r.delay_index >= 0) {
    const Literal& d = r.lits[r.delay_index];
    const Term& dout = d.terms.back();
    if (!term_is_var(dout)) throw std::runtime_error("delay output must be a variable");
    if (ht.var != dout.var)
      throw std::runtime_error("asynchronous head time must be the delay output");
    if (hl.var == lvar)
      throw std::runtime_error(
          "delay present in a rule whose head location equals the body location");
    if (dout.var == tvar)
      throw std::runtime_error("delay output must differ from the body time");
    r.kind = RuleKind::Asynchronous;
    return;
  }

  if (ht.var == tvar) {
    if (hl.var != lvar)
      throw std::runtime_error("synchronous head must stay at the body location");
    r.kind = RuleKind::Synchronous;
    return;
  }

  // Sequential: head time is bound by a successor constraint on the body time.
  for (const auto& c : r.cons) {
    if (c.is_successor() && c.lhs == ht.var && c.rhs[0].var == tvar) {
      if (hl.var != lvar)
        throw std::runtime_error("sequential head must stay at the body location");
      r.kind = RuleKind::Sequential;
      return;
    }
  }
  throw std::runtime_error("head time '" + ht.var +
                           "' is unrelated to the body time '" + tvar + "'");
}

namespace {

// A persistence rule copies one relation to the next timestep: a single
// positive body literal over the head relation with identical ordinary
// bindings, the successor constraint, and (optionally) negated gc guards.
void detect_persistence(Rule& r, const Program& p) {
  if (r.kind != RuleKind::Sequential) return;
  const Relation* hrel = p.find_relation(r.head.relation);
  int pos_count = 0, pos_index = -1;
  for (size_t i = 0; i < r.lits.size(); ++i) {
    if (r.lits[i].is_delay()) return;
    if (!r.lits[i].negated) {
      ++pos_count;
      pos_index = static_cast<int>(i);
    }
  }
  if (pos_count != 1) return;
  const Literal& b = r.lits[pos_index];
  if (b.relation != r.head.relation) return;
  for (int i = 0; i < hrel->payload_arity(); ++i)
    if (!(r.head.terms[i] == b.terms[i])) return;
  if (r.cons.size() != 1) return;  // just the successor constraint
  r.is_persistence = true;
  for (size_t i = 0; i < r.lits.size(); ++i)
    if (r.lits[i].negated) r.gc_guards.push_back(static_cast<int>(i));
}

}  // namespace

void classify_rules(Program& p) {
  for (auto& c : p.components) {
    for (auto& r : c.rules) {
      r.eval_ready = false;
      r.eval_cache.reset();
      try {
        classify_rule(r, p);
        r.classify_ok = true;
        r.classify_err.clear();
        detect_persistence(r, p);
      } catch (const std::exception& e) {
        r.classify_ok = false;
        r.classify_err = e.what();
      }
    }
  }
}

// --- well-formedness --------------------------------------------------------

std::string ValidationReport::str() const {
  if (violations.empty()) return "ok\n";
  std::string out;
  for (const auto& v : violations) {
    out += v.component;
    if (v.rule_index >= 0) out += "[" + std::to_string(v.rule_index + 1) + "]";
    out += ": " + v.what + "\n";
  }
  return out;
}

namespace {

struct Checker {
  const Program& p;
  ValidationReport& rep;

  void violation(const std::string& comp, int idx, const std::string& what) {
    rep.violations.push_back({comp, idx, what});
  }

  void check_rule(const Component& c, int idx, const Rule& r) {
    if (!r.classify_ok) {
      violation(c.name, idx, r.classify_err);
      return;
    }
    // Aggregates only in heads; negated literals carry no aggregates.
    bool head_has_agg = false;
    for (const auto& t : r.head.terms)
      if (t.kind == TermKind::Agg) head_has_agg = true;
    for (const auto& l : r.lits) {
      for (const auto& t : l.terms) {
        if (t.kind == TermKind::Agg)
          violation(c.name, idx, "aggregate term in rule body ('" + l.relation + "')");
      }
      if (l.negated) {
        const Relation* rel = p.find_relation(l.relation);
        if (rel && rel->kind == RelationKind::EdbFunction)
          violation(c.name, idx, "negated EDB-function literal '" + l.relation + "'");
      }
    }
    // seal<> only over a positive body relation.
    for (const auto& t : r.head.terms) {
      if (t.kind == TermKind::Agg && t.agg_fn == "seal") {
        if (t.agg_vars.size() != 1 ||
            std::none_of(r.lits.begin(), r.lits.end(), [&](const Literal& l) {
              return !l.negated && l.relation == t.agg_vars[0];
            }))
          violation(c.name, idx, "seal<> must name a positive body relation");
      }
    }
    if (head_has_agg && r.kind == RuleKind::Asynchronous) {
      // allowed: aggregates are computed at the sender before the hop
    }
    check_range_restriction(c, idx, r);
    check_entanglement(c, idx, r);
  }

  void check_range_restriction(const Component& c, int idx, const Rule& r) {
    // the evaluation context grounds the shared location and time
    std::set<std::string> bound = {r.loc_var, r.time_var};
    // positive stored/IDB literals bind their variables
    for (const auto& l : r.lits) {
      if (l.negated || l.is_delay()) continue;
      const Relation* rel = p.find_relation(l.relation);
      if (rel && rel->kind == RelationKind::EdbFunction) continue;
      for (const auto& v : literal_vars(l)) bound.insert(v);
    }
    // closure over functions, constraints, delay
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& l : r.lits) {
        if (l.negated) continue;
        if (l.is_delay()) {
          bool ins = true;
          for (int i = 0; i < l.delay_inputs; ++i)
            if (l.terms[i].kind == TermKind::Var && !bound.count(l.terms[i].var))
              ins = false;
          if (ins && l.terms.back().kind == TermKind::Var &&
              bound.insert(l.terms.back().var).second)
            changed = true;
          continue;
        }
        const Relation* rel = p.find_relation(l.relation);
        if (!rel || rel->kind != RelationKind::EdbFunction) continue;
        bool ins = true;
        for (int i = 0; i < rel->fn_inputs; ++i)
          if (l.terms[i].kind == TermKind::Var && !bound.count(l.terms[i].var))
            ins = false;
        if (!ins) continue;
        for (int i = rel->fn_inputs; i < rel->arity; ++i)
          if (l.terms[i].kind == TermKind::Var && bound.insert(l.terms[i].var).second)
            changed = true;
      }
      for (const auto& con : r.cons) {
        if (con.op != "=") continue;
        bool rhs_bound = true;
        for (const auto& a : con.rhs)
          if (a.is_var && !bound.count(a.var)) rhs_bound = false;
        if (rhs_bound && bound.insert(con.lhs).second) changed = true;
      }
    }
    // every function input, constraint atom, and head variable must be bound
    for (const auto& l : r.lits) {
      if (l.is_delay()) {
        for (int i = 0; i < l.delay_inputs; ++i)
          if (l.terms[i].kind == TermKind::Var && !bound.count(l.terms[i].var))
            violation(c.name, idx, "unbound delay input variable '" + l.terms[i].var + "'");
        continue;
      }
      const Relation* rel = p.find_relation(l.relation);
      if (rel && rel->kind == RelationKind::EdbFunction && !l.negated) {
        for (int i = 0; i < rel->fn_inputs; ++i)
          if (l.terms[i].kind == TermKind::Var && !bound.count(l.terms[i].var))
            violation(c.name, idx,
                      "unbound input to function '" + l.relation + "': '" +
                          l.terms[i].var + "'");
      }
    }
    for (const auto& con : r.cons) {
      if (!bound.count(con.lhs) )
        violation(c.name, idx, "unbound constraint variable '" + con.lhs + "'");
      for (const auto& a : con.rhs)
        if (a.is_var && !bound.count(a.var))
          violation(c.name, idx, "unbound constraint variable '" + a.var + "'");
    }
    for (const auto& v : literal_vars(r.head))
      if (!bound.count(v))
        violation(c.name, idx, "unbound head variable '" + v + "'");
  }

  void check_entanglement(const Component& c, int idx, const Rule& r) {
    std::set<std::string> spacetime = {r.loc_var, r.time_var};
    if (r.delay_index >= 0) spacetime.insert(r.lits[r.delay_index].terms.back().var);
    for (const auto& con : r.cons)
      if (con.is_successor() && con.rhs[0].var == r.time_var) spacetime.insert(con.lhs);

    auto check_lit = [&](const Literal& l) {
      if (l.is_delay()) return;  // delay inputs intentionally carry (l, t)
      const Relation* rel = p.find_relation(l.relation);
      if (!rel || !rel->is_idb_schema()) return;  // EDBs model address books
      int pa = static_cast<int>(l.terms.size()) - 2;
      for (int i = 0; i < pa; ++i) {
        const Term& t = l.terms[i];
        if (t.kind == TermKind::Var && spacetime.count(t.var) &&
            !p.is_entangled(l.relation, i))
          violation(c.name, idx,
                    "location/time variable '" + t.var + "' entangled in '" +
                        l.relation + "' attribute " + std::to_string(i + 1));
      }
    };
    check_lit(r.head);
    for (const auto& l : r.lits) check_lit(l);
  }
};

}  // namespace

ValidationReport check_well_formed(const Program& p) {
  ValidationReport rep;
  Checker ck{p, rep};
  for (const auto& rel : p.relations) {
    if (rel.is_idb_schema() && rel.arity < 2)
      ck.violation("<program>", -1,
                   "IDB relation '" + rel.name + "' must carry location and time");
  }
  for (const auto& c : p.components) {
    if (c.rules.empty()) ck.violation(c.name, -1, "component has an empty rule set");
    if (c.homes.empty()) ck.violation(c.name, -1, "component has no home address");
    for (size_t i = 0; i < c.rules.size(); ++i) {
      const Rule& r = c.rules[i];
      const Relation* hrel = p.find_relation(r.head.relation);
      if (hrel && !hrel->is_idb_schema()) {
        ck.violation(c.name, static_cast<int>(i),
                     "EDB relation '" + r.head.relation + "' appears as a rule head");
        continue;
      }
      // channels may be carried across ticks (freeze buffering), but not
      // derived outright
      if (hrel && hrel->kind == RelationKind::Channel) {
        bool carry = r.kind == RuleKind::Sequential && r.lits.size() >= 1;
        if (carry)
          for (const auto& l : r.lits)
            if (!l.negated && l.relation != r.head.relation) carry = false;
        if (!carry)
          ck.violation(c.name, static_cast<int>(i),
                       "input channel '" + r.head.relation + "' has defining rules");
      }
      ck.check_rule(c, static_cast<int>(i), r);
    }
  }
  return rep;
}

}  // namespace dedopt
