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

#include "dedopt/analysis.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace dedopt {

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (!contains(v, s)) v.push_back(s);
}

bool rule_has_aggregate(const Rule& r) {
  return std::any_of(r.head.terms.begin(), r.head.terms.end(),
                     [](const Term& t) { return t.kind == TermKind::Agg; });
}

// negation outside gc guards of a persistence rule
bool rule_has_negation(const Rule& r) {
  for (size_t i = 0; i < r.lits.size(); ++i) {
    if (!r.lits[i].negated) continue;
    if (r.is_persistence &&
        std::find(r.gc_guards.begin(), r.gc_guards.end(), static_cast<int>(i)) !=
            r.gc_guards.end())
      continue;
    return true;
  }
  return false;
}

bool is_idb(const Program& p, const std::string& rel) {
  const Relation* r = p.find_relation(rel);
  return r && r->is_idb_schema();
}

// persistence rule present anywhere, gc-guarded or not
bool persisted_allowing_gc(const Program& p, const std::string& rel) {
  for (const auto& c : p.components)
    for (const auto& r : c.rules)
      if (r.is_persistence && r.head.relation == rel) return true;
  return false;
}

}  // namespace

std::string Verdict::str() const {
  std::string out = ok ? "yes" : "no";
  for (const auto& r : reasons) out += "; " + r;
  return out;
}

ComponentSignature signature(const Component& c, const Program& p) {
  ComponentSignature sig;
  for (const auto& r : c.rules) {
    add_unique(sig.heads, r.head.relation);
    for (const auto& l : r.lits) {
      if (l.is_delay()) continue;
      if (is_idb(p, l.relation)) add_unique(sig.referenced, l.relation);
    }
  }
  for (const auto& r : sig.referenced)
    if (!contains(sig.heads, r)) sig.inputs.push_back(r);
  for (const auto& h : sig.heads)
    if (!contains(sig.referenced, h)) sig.outputs.push_back(h);
  return sig;
}

Verdict is_independent(const Component& c1, const Component& c2, const Program& p) {
  ComponentSignature s1 = signature(c1, p), s2 = signature(c2, p);
  Verdict v;
  v.ok = true;
  for (const auto& r : s1.referenced)
    if (contains(s2.referenced, r)) {
      v.ok = false;
      v.reasons.push_back("shared reference to '" + r + "'");
    }
  for (const auto& r : s2.outputs)
    if (contains(s1.referenced, r)) {
      v.ok = false;
      v.reasons.push_back("'" + c1.name + "' references output '" + r + "' of '" +
                          c2.name + "'");
    }
  return v;
}

Verdict is_mutually_independent(const Component& c1, const Component& c2,
                                const Program& p) {
  Verdict a = is_independent(c1, c2, p);
  Verdict b = is_independent(c2, c1, p);
  Verdict v;
  v.ok = a.ok && b.ok;
  v.reasons = a.reasons;
  for (const auto& r : b.reasons) add_unique(v.reasons, r);
  return v;
}

Verdict is_independent_for_forwarding(const Component& c1, const Component& c2,
                                      const Program& p) {
  ComponentSignature s1 = signature(c1, p), s2 = signature(c2, p);
  Verdict v;
  v.ok = true;
  for (const auto& h : s2.heads)
    if (contains(s1.referenced, h)) {
      v.ok = false;
      v.reasons.push_back("'" + c1.name + "' references '" + h + "' derived in '" +
                          c2.name + "'");
    }
  for (const auto& h : s2.heads)
    if (contains(s1.heads, h)) {
      v.ok = false;
      v.reasons.push_back("both sides derive '" + h + "'");
    }
  return v;
}

// ---------------------------------------------------------------------------
// Monotonicity
// ---------------------------------------------------------------------------

namespace {

// Logical persistence: every fact still exists, unchanged except for time, at
// the next timestep. Persisted relations qualify; so do relations derived
// only by synchronous/sequential aggregate-free rules from logically
// persisted relations.
std::set<std::string> logically_persisted(const Program& p) {
  std::set<std::string> lp;
  for (const auto& rel : p.relations) {
    if (!rel.is_idb_schema()) continue;
    if (p.is_persisted(rel.name)) lp.insert(rel.name);
  }
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& rel : p.relations) {
      if (!rel.is_idb_schema() || lp.count(rel.name)) continue;
      bool has_rule = false, all_ok = true;
      for (const auto& c : p.components) {
        for (const auto& r : c.rules) {
          if (r.head.relation != rel.name) continue;
          has_rule = true;
          if (r.kind == RuleKind::Asynchronous || rule_has_aggregate(r) ||
              rule_has_negation(r)) {
            all_ok = false;
            break;
          }
          for (const auto& l : r.lits) {
            if (l.is_delay() || !is_idb(p, l.relation)) continue;
            if (!lp.count(l.relation)) all_ok = false;
          }
          if (!all_ok) break;
        }
        if (!all_ok) break;
      }
      if (has_rule && all_ok) {
        lp.insert(rel.name);
        grew = true;
      }
    }
  }
  return lp;
}

// Aggregate attribute positions of a relation, from its defining rules.
std::set<int> aggregate_positions(const Program& p, const std::string& rel) {
  std::set<int> out;
  for (const auto& c : p.components)
    for (const auto& r : c.rules) {
      if (r.head.relation != rel) continue;
      for (size_t i = 0; i < r.head.terms.size(); ++i)
        if (r.head.terms[i].kind == TermKind::Agg) out.insert(static_cast<int>(i));
    }
  return out;
}

// Relaxed-mode whitelist: a count/max over logically persisted bodies whose
// result is consumed only as a threshold test (joined against a stored EDB
// attribute or compared with >=, =, > against EDB-bound values) and never
// forwarded into a head.
bool aggregate_is_threshold(const Component& c, const Program& p, const Rule& agg_rule,
                            const std::set<std::string>& lp, std::string& why) {
  std::string fn;
  for (const auto& t : agg_rule.head.terms)
    if (t.kind == TermKind::Agg) fn = t.agg_fn;
  if (fn != "count" && fn != "count0" && fn != "max") {
    why = "aggregate '" + fn + "' is not a lattice threshold";
    return false;
  }
  for (const auto& l : agg_rule.lits) {
    if (l.is_delay() || !is_idb(p, l.relation)) continue;
    if (!lp.count(l.relation)) {
      why = "aggregate over non-persisted '" + l.relation + "'";
      return false;
    }
  }
  const std::string& rel = agg_rule.head.relation;
  std::set<int> agg_pos = aggregate_positions(p, rel);
  for (const auto& r : c.rules) {
    for (const auto& l : r.lits) {
      if (l.is_delay() || l.relation != rel) continue;
      for (int pos : agg_pos) {
        const Term& t = l.terms[pos];
        if (t.kind != TermKind::Var) continue;
        const std::string& v = t.var;
        // consumed as a threshold?
        bool threshold = false;
        for (const auto& l2 : r.lits) {
          if (l2.negated || l2.is_delay()) continue;
          const Relation* rel2 = p.find_relation(l2.relation);
          if (rel2 && rel2->kind == RelationKind::EdbStored)
            for (const auto& t2 : l2.terms)
              if (t2.kind == TermKind::Var && t2.var == v) threshold = true;
        }
        for (const auto& con : r.cons) {
          bool mentions = con.lhs == v ||
                          std::any_of(con.rhs.begin(), con.rhs.end(),
                                      [&](const ExprAtom& a) {
                                        return a.is_var && a.var == v;
                                      });
          if (mentions && (con.op == ">=" || con.op == "=" || con.op == ">" ||
                           con.op == "<=" || con.op == "<"))
            threshold = true;
        }
        bool forwarded = false;
        for (const auto& ht : r.head.terms)
          if (ht.kind == TermKind::Var && ht.var == v) forwarded = true;
        if (forwarded) {
          why = "aggregate value of '" + rel + "' is forwarded by a consumer";
          return false;
        }
        if (!threshold) {
          why = "aggregate value of '" + rel + "' is not used as a threshold";
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

Verdict is_monotonic(const Component& c, const Program& p, MonotonicityMode mode) {
  ComponentSignature sig = signature(c, p);
  Verdict v;
  v.ok = true;
  std::set<std::string> lp;
  if (mode == MonotonicityMode::Relaxed) lp = logically_persisted(p);

  for (const auto& in : sig.inputs) {
    bool ok = p.is_persisted(in);
    if (!ok && mode == MonotonicityMode::Relaxed)
      ok = persisted_allowing_gc(p, in) || lp.count(in) > 0;
    if (!ok && mode == MonotonicityMode::Relaxed) {
      // ingest pattern: the input is aliased into a persisted relation and
      // otherwise only triggers rules alongside persisted state
      bool aliased = false;
      for (const auto& r : c.rules) {
        bool refs_in = std::any_of(r.lits.begin(), r.lits.end(), [&](const Literal& l) {
          return !l.is_delay() && l.relation == in && !l.negated;
        });
        if (refs_in && r.kind == RuleKind::Synchronous && r.lits.size() == 1 &&
            !rule_has_aggregate(r) &&
            (p.is_persisted(r.head.relation) || persisted_allowing_gc(p, r.head.relation)))
          aliased = true;
      }
      ok = aliased;
    }
    if (!ok) {
      v.ok = false;
      v.reasons.push_back("unpersisted-input '" + in + "'");
    }
  }

  for (size_t ri = 0; ri < c.rules.size(); ++ri) {
    const Rule& r = c.rules[ri];
    bool negated = mode == MonotonicityMode::Strict
                       ? std::any_of(r.lits.begin(), r.lits.end(),
                                     [](const Literal& l) { return l.negated; })
                       : rule_has_negation(r);  // gc guards tolerated
    if (negated) {
      v.ok = false;
      v.reasons.push_back("negation in rule " + std::to_string(ri + 1));
    }
    if (rule_has_aggregate(r)) {
      if (mode == MonotonicityMode::Strict) {
        v.ok = false;
        v.reasons.push_back("aggregation in rule " + std::to_string(ri + 1));
      } else {
        std::string why;
        if (!aggregate_is_threshold(c, p, r, lp, why)) {
          v.ok = false;
          v.reasons.push_back(why);
        }
      }
    }
  }
  return v;
}

Verdict is_functional(const Component& c, const Program& p) {
  Verdict v;
  v.ok = true;
  for (size_t ri = 0; ri < c.rules.size(); ++ri) {
    const Rule& r = c.rules[ri];
    if (rule_has_aggregate(r)) {
      v.ok = false;
      v.reasons.push_back("aggregation in rule " + std::to_string(ri + 1));
    }
    if (rule_has_negation(r) || !r.gc_guards.empty()) {
      v.ok = false;
      v.reasons.push_back("negation in rule " + std::to_string(ri + 1));
    }
    int idb_count = 0;
    for (const auto& l : r.lits)
      if (!l.is_delay() && is_idb(p, l.relation)) ++idb_count;
    if (idb_count > 1) {
      v.ok = false;
      v.reasons.push_back("rule " + std::to_string(ri + 1) + " joins " +
                          std::to_string(idb_count) + " IDB relations");
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Existence / no-change dependencies, state machines
// ---------------------------------------------------------------------------

bool existence_dependency(const std::string& rel,
                          const std::vector<std::string>& inputs,
                          const Component& c, const Program& p) {
  std::set<std::string> ex(inputs.begin(), inputs.end());
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& candidate : p.relations) {
      const std::string& name = candidate.name;
      if (ex.count(name) || !candidate.is_idb_schema()) continue;
      bool has_rule = false, all_ok = true;
      for (const auto& r : c.rules) {
        if (r.head.relation != name) continue;
        has_rule = true;
        if (r.kind == RuleKind::Sequential) {  // contains t'=t+1
          all_ok = false;
          break;
        }
        bool gated = false;
        for (const auto& l : r.lits)
          if (!l.negated && !l.is_delay() && ex.count(l.relation)) gated = true;
        if (!gated) {
          all_ok = false;
          break;
        }
      }
      if (has_rule && all_ok) {
        ex.insert(name);
        grew = true;
      }
    }
  }
  return ex.count(rel) > 0;
}

bool no_change_dependency(const std::string& rel,
                          const std::vector<std::string>& inputs,
                          const Component& c, const Program& p) {
  // existence set for gating writes
  std::set<std::string> ex(inputs.begin(), inputs.end());
  {
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& candidate : p.relations) {
        if (ex.count(candidate.name) || !candidate.is_idb_schema()) continue;
        if (existence_dependency(candidate.name, inputs, c, p) &&
            ex.insert(candidate.name).second)
          grew = true;
      }
    }
  }

  std::set<std::string> nc;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& candidate : p.relations) {
      const std::string& name = candidate.name;
      if (nc.count(name) || !candidate.is_idb_schema()) continue;
      std::vector<const Rule*> defs;
      for (const auto& r : c.rules)
        if (r.head.relation == name) defs.push_back(&r);
      if (defs.empty()) continue;

      bool any_inductive = std::any_of(defs.begin(), defs.end(), [](const Rule* r) {
        return r->kind == RuleKind::Sequential;
      });
      bool any_async = std::any_of(defs.begin(), defs.end(), [](const Rule* r) {
        return r->kind == RuleKind::Asynchronous;
      });
      if (any_async) continue;  // locally unpredictable arrivals

      bool ok;
      if (!any_inductive) {
        // implicit persist: bodies only over EDBs and no-change relations
        ok = true;
        for (const Rule* r : defs)
          for (const auto& l : r->lits) {
            if (l.is_delay()) continue;
            if (is_idb(p, l.relation) && !nc.count(l.relation)) ok = false;
          }
      } else {
        // explicit persist: a clean persistence rule, all other rules gated
        // on an input or existence-dependent relation
        bool has_clean_persist = std::any_of(defs.begin(), defs.end(), [](const Rule* r) {
          return r->is_persistence && r->gc_guards.empty();
        });
        ok = has_clean_persist;
        for (const Rule* r : defs) {
          if (r->is_persistence && r->gc_guards.empty()) continue;
          bool gated = false;
          for (const auto& l : r->lits)
            if (!l.negated && !l.is_delay() && ex.count(l.relation)) gated = true;
          if (!gated) ok = false;
        }
      }
      if (ok) {
        nc.insert(name);
        grew = true;
      }
    }
  }
  return nc.count(rel) > 0;
}

Verdict is_state_machine(const Component& c, const Program& p) {
  ComponentSignature sig = signature(c, p);
  Verdict v;
  v.ok = true;
  for (const auto& r : sig.referenced) {
    if (contains(sig.inputs, r)) continue;  // inputs are existence-dependent
    if (existence_dependency(r, sig.inputs, c, p)) continue;
    if (no_change_dependency(r, sig.inputs, c, p)) continue;
    v.ok = false;
    v.reasons.push_back("referenced '" + r +
                        "' has neither existence nor no-change dependency");
  }
  for (const auto& o : sig.outputs) {
    if (existence_dependency(o, sig.inputs, c, p)) continue;
    v.ok = false;
    v.reasons.push_back("output '" + o + "' lacks an existence dependency");
  }
  return v;
}

Component make_split(const Component& src, const std::vector<int>& rule_indices,
                     const std::string& name) {
  Component c;
  c.name = name;
  c.homes = src.homes;
  for (int i : rule_indices) c.rules.push_back(src.rules.at(i));
  return c;
}

}  // namespace dedopt
