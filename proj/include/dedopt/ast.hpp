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

#ifndef DEDOPT_AST_HPP_
#define DEDOPT_AST_HPP_

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dedopt/value.hpp"

namespace dedopt {

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

enum class RelationKind {
  EdbStored,    // finite stored facts, replicated at all locations and times
  EdbFunction,  // infinite function relation with a builtin evaluator
  Idb,          // derived; last two attributes are location and time
  Channel,      // IDB-schema input channel with no defining rules
};

struct Relation {
  std::string name;
  int arity = 0;  // total attribute count (incl. location/time for IDB)
  RelationKind kind = RelationKind::Idb;

  // EDB-function only: attribute layout is [inputs..., outputs...].
  int fn_inputs = 0;
  int fn_outputs = 0;
  std::string builtin;                     // evaluator name ("" = opaque table)
  std::vector<std::string> builtin_args;   // evaluator parameters

  bool is_idb_schema() const {
    return kind == RelationKind::Idb || kind == RelationKind::Channel;
  }
  // Ordinary (non space-time) attribute count.
  int payload_arity() const { return is_idb_schema() ? arity - 2 : arity; }
};

// ---------------------------------------------------------------------------
// Terms, literals, constraints
// ---------------------------------------------------------------------------

enum class TermKind { Var, Const, Agg };

struct Term {
  TermKind kind = TermKind::Var;
  std::string var;                    // Var
  Value constant;                     // Const
  std::string agg_fn;                 // Agg: count, count0, sum, max, min, cert, seal
  std::vector<std::string> agg_vars;  // Agg: variables inside <> (relation name for seal)

  static Term mkvar(std::string v) {
    Term t;
    t.kind = TermKind::Var;
    t.var = std::move(v);
    return t;
  }
  static Term mkconst(Value v) {
    Term t;
    t.kind = TermKind::Const;
    t.constant = std::move(v);
    return t;
  }
  static Term mkagg(std::string fn, std::vector<std::string> vars) {
    Term t;
    t.kind = TermKind::Agg;
    t.agg_fn = std::move(fn);
    t.agg_vars = std::move(vars);
    return t;
  }
  bool operator==(const Term& o) const {
    return kind == o.kind && var == o.var && constant == o.constant &&
           agg_fn == o.agg_fn && agg_vars == o.agg_vars;
  }
};

struct Literal {
  bool negated = false;
  std::string relation;
  std::vector<Term> terms;
  // delay literals: number of terms forming the input tuple (-1 otherwise).
  int delay_inputs = -1;

  bool is_delay() const { return delay_inputs >= 0; }
  bool operator==(const Literal& o) const {
    return negated == o.negated && relation == o.relation && terms == o.terms &&
           delay_inputs == o.delay_inputs;
  }
};

// Integer constraint `lhs op a1 + a2 + ...` (ops: = != < <= > >=).
struct ExprAtom {
  bool is_var = true;
  std::string var;
  int64_t num = 0;
  bool operator==(const ExprAtom& o) const {
    return is_var == o.is_var && var == o.var && num == o.num;
  }
};

struct Constraint {
  std::string lhs;
  std::string op;
  std::vector<ExprAtom> rhs;
  bool operator==(const Constraint& o) const {
    return lhs == o.lhs && op == o.op && rhs == o.rhs;
  }
  // Matches the successor pattern `lhs = v + 1`.
  bool is_successor() const {
    return op == "=" && rhs.size() == 2 && rhs[0].is_var && !rhs[1].is_var &&
           rhs[1].num == 1;
  }
};

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

enum class RuleKind { Synchronous, Sequential, Asynchronous };

struct Rule {
  Literal head;
  std::vector<Literal> lits;       // body relation literals, in source order
  std::vector<Constraint> cons;    // body constraints, in source order
  // Interleaving of lits/cons as written: (true, i) = lits[i], (false, i) = cons[i].
  std::vector<std::pair<bool, int>> order;

  // Filled by classify_rules(); meaningless before.
  RuleKind kind = RuleKind::Synchronous;
  std::string loc_var;        // shared body location variable
  std::string time_var;       // shared body time variable
  int delay_index = -1;       // index into lits
  bool is_persistence = false;
  std::vector<int> gc_guards;  // negated-literal indices guarding a persistence rule
  bool classify_ok = true;
  std::string classify_err;

  // evaluator cache, invalidated whenever rules are re-classified
  mutable std::shared_ptr<void> eval_cache;
  mutable bool eval_ready = false;

  bool operator==(const Rule& o) const {
    return head == o.head && lits == o.lits && cons == o.cons && order == o.order;
  }
};

struct Component {
  std::string name;
  std::vector<std::string> homes;  // one node per home address
  std::vector<Rule> rules;
};

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

struct FdAnnotation {
  std::string relation;
  std::vector<int> domain;  // 0-based attribute indices
  std::vector<int> range;
  std::string fn;  // "" = opaque
};

// Bookkeeping emitted by the sealing desugar so later rewrites can locate the
// generated machinery. Serialized as an @sealed directive.
struct SealInfo {
  std::string out;        // sealed output relation (carries the payload)
  std::string count;      // per-batch expected-count relation
  std::string recv;       // receiver-side received-count relation
  std::string sealed;     // receiver-side completion marker
  std::string gate;       // receiver-side gated alias consumed in place of out
  std::string sender;     // component that sends
  std::string receiver;   // component that receives
  int payload = 0;        // payload attribute count of the bundled relation
  int group = 0;          // group attribute count
};

struct Program {
  std::vector<Relation> relations;
  std::vector<Component> components;
  // Stored EDB contents, in declaration order.
  std::vector<std::pair<std::string, Tuple>> edb_facts;
  std::vector<FdAnnotation> fd_annotations;
  // (relation, 0-based attribute) pairs where location/time-valued variables
  // are permitted to appear.
  std::set<std::pair<std::string, int>> entangled;
  std::vector<SealInfo> seal_infos;

  const Relation* find_relation(const std::string& name) const;
  Relation* find_relation(const std::string& name);
  const Component* find_component(const std::string& name) const;
  Component* find_component(const std::string& name);

  bool is_entangled(const std::string& rel, int attr) const {
    return entangled.count({rel, attr}) > 0;
  }

  // True if some rule anywhere heads this relation.
  bool has_defining_rule(const std::string& rel) const;
  // A relation is persisted if any component carries a persistence rule for it.
  bool is_persisted(const std::string& rel) const;

  // Fresh relation name built from a stem; never collides with declared names.
  std::string fresh_relation(const std::string& stem) const;
  std::string fresh_component(const std::string& stem) const;

  // All node addresses known to the program (component homes + address-valued
  // EDB facts are not distinguished; homes are authoritative).
  std::vector<std::string> all_homes() const;
};

// Variables mentioned by a term / literal / rule body, in first-use order.
std::vector<std::string> literal_vars(const Literal& lit);
void collect_rule_vars(const Rule& r, std::vector<std::string>& out);

}  // namespace dedopt

#endif  // DEDOPT_AST_HPP_
