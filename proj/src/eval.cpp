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

#include "dedopt/eval.hpp"

#include <algorithm>
#include <cassert>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dedopt {

// ---------------------------------------------------------------------------
// MessageKey / DelaySchedule
// ---------------------------------------------------------------------------

std::string MessageKey::str() const {
  return std::to_string(comp) + "." + std::to_string(rule) + "|" +
         tuple_str(delay_input) + "|" + dest + "|" + std::to_string(send_time);
}

DelaySchedule DelaySchedule::seeded(uint64_t seed, int max_delay) {
  DelaySchedule s;
  s.mode = Mode::SeededRandom;
  s.seed = seed;
  s.max_delay = max_delay;
  return s;
}

DelaySchedule DelaySchedule::table(std::map<std::string, int64_t> arrivals) {
  DelaySchedule s;
  s.mode = Mode::ExplicitTable;
  s.explicit_arrivals = std::move(arrivals);
  return s;
}

DelaySchedule DelaySchedule::enumerated(int max_delay) {
  DelaySchedule s;
  s.mode = Mode::Enumerated;
  s.max_delay = max_delay;
  return s;
}

void DelaySchedule::begin_run() {
  cursor = 0;
  used.clear();
}

int64_t DelaySchedule::arrival(const MessageKey& k) {
  std::string key = k.str();
  int64_t at = 0;
  switch (mode) {
    case Mode::SeededRandom: {
      uint64_t h = hash_combine(mix64(seed), str_hash(key));
      at = k.send_time + 1 + static_cast<int64_t>(h % static_cast<uint64_t>(max_delay));
      break;
    }
    case Mode::ExplicitTable: {
      auto it = explicit_arrivals.find(key);
      if (it == explicit_arrivals.end())
        throw std::runtime_error("delay schedule has no entry for " + key);
      at = it->second;
      if (at <= k.send_time)
        throw std::runtime_error("schedule violates happens-before for " + key);
      break;
    }
    case Mode::Enumerated: {
      if (cursor < choices.size()) {
        if (choices[cursor].first != key)
          throw std::runtime_error("enumeration diverged: expected " +
                                   choices[cursor].first + ", got " + key);
        at = k.send_time + choices[cursor].second;
      } else {
        choices.push_back({key, 1});
        at = k.send_time + 1;
      }
      ++cursor;
      break;
    }
  }
  used[key] = at;
  return at;
}

bool DelaySchedule::next_assignment() {
  while (!choices.empty()) {
    if (choices.back().second < max_delay) {
      ++choices.back().second;
      return true;
    }
    choices.pop_back();
  }
  return false;
}

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

Instance::Instance(const Program& p, std::shared_ptr<const RelIds> shared_ids)
    : prog_(&p) {
  if (shared_ids) {
    rel_ids_ = std::move(shared_ids);
  } else {
    auto ids = std::make_shared<RelIds>();
    for (size_t i = 0; i < p.relations.size(); ++i)
      (*ids)[p.relations[i].name] = static_cast<int>(i);
    rel_ids_ = std::move(ids);
  }
}

int Instance::rel_id(const std::string& name) const {
  auto it = rel_ids_->find(name);
  if (it == rel_ids_->end()) throw std::runtime_error("no relation '" + name + "'");
  return it->second;
}

int Instance::loc_id(const std::string& loc) const {
  auto it = loc_ids_.find(loc);
  return it == loc_ids_.end() ? -1 : it->second;
}

const std::string& Instance::rel_name(int id) const { return prog_->relations[id].name; }

namespace {
uint64_t fact_hash(int rel, const Tuple& payload, const std::string& loc, int64_t time) {
  uint64_t h = mix64(static_cast<uint64_t>(rel));
  h = hash_combine(h, tuple_hash(payload));
  h = hash_combine(h, str_hash(loc));
  h = hash_combine(h, mix64(static_cast<uint64_t>(time)));
  return h;
}
}  // namespace

int Instance::add_idb(int rel, Tuple payload, const std::string& loc, int64_t time,
                      bool* inserted) {
  uint64_t h = fact_hash(rel, payload, loc, time);
  auto& bucket = index_[h];
  for (int id : bucket) {
    const FactRec& f = facts_[id];
    if (f.rel == rel && f.time == time && f.loc == loc && f.payload == payload) {
      if (inserted) *inserted = false;
      return id;
    }
  }
  int id = static_cast<int>(facts_.size());
  FactRec rec{rel, std::move(payload), loc, time, Value(loc), Value(time)};
  facts_.push_back(std::move(rec));
  prov_.emplace_back();
  bucket.push_back(id);
  auto [lit, fresh] = loc_ids_.try_emplace(loc, static_cast<int>(loc_ids_.size()));
  (void)fresh;
  idb_[{rel, lit->second, time}].push_back(id);
  if (inserted) *inserted = true;
  return id;
}

int Instance::add_edb(int rel, Tuple vals) {
  uint64_t h = fact_hash(rel, vals, "", 0);
  for (int id : index_[h]) {
    const FactRec& f = facts_[id];
    if (f.rel == rel && f.loc.empty() && f.payload == vals) return id;
  }
  int id = static_cast<int>(facts_.size());
  facts_.push_back({rel, std::move(vals), "", 0, Value(std::string()), Value(int64_t(0))});
  prov_.emplace_back();
  index_[h].push_back(id);
  edb_[rel].push_back(id);
  return id;
}

void Instance::add_derivation(int fact, Derivation d) {
  prov_[fact].push_back(std::move(d));
}

bool Instance::has_idb(int rel, const Tuple& payload, const std::string& loc,
                       int64_t time) const {
  uint64_t h = fact_hash(rel, payload, loc, time);
  auto it = index_.find(h);
  if (it == index_.end()) return false;
  for (int id : it->second) {
    const FactRec& f = facts_[id];
    if (f.rel == rel && f.loc == loc && f.time == time && f.payload == payload)
      return true;
  }
  return false;
}

static const std::vector<int> kNoFacts;

const std::vector<int>& Instance::idb_at(int rel, const std::string& loc,
                                         int64_t time) const {
  int lid = loc_id(loc);
  if (lid < 0) return kNoFacts;
  return idb_at(rel, lid, time);
}

const std::vector<int>& Instance::idb_at(int rel, int lid, int64_t time) const {
  auto it = idb_.find({rel, lid, time});
  if (it == idb_.end()) return kNoFacts;
  return it->second;
}

const std::vector<int>& Instance::edb_of(int rel) const {
  auto it = edb_.find(rel);
  if (it == edb_.end()) return kNoFacts;
  return it->second;
}

std::vector<std::pair<std::string, int64_t>> Instance::cells(int rel) const {
  std::vector<std::pair<std::string, int64_t>> out;
  for (const auto& [key, ids] : idb_) {
    if (std::get<0>(key) != rel || ids.empty()) continue;
    out.push_back({facts_[ids[0]].loc, std::get<2>(key)});
  }
  return out;
}

std::string Instance::canonical() const {
  std::vector<std::string> lines;
  for (const auto& f : facts_) {
    if (f.loc.empty())
      lines.push_back(rel_name(f.rel) + tuple_str(f.payload));
    else
      lines.push_back(rel_name(f.rel) + tuple_str(f.payload) + "@" + f.loc + ":" +
                      std::to_string(f.time));
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Builtin function evaluation
// ---------------------------------------------------------------------------

namespace {

int64_t value_as_int(const Value& v, const char* what) {
  if (!v.is_int()) throw std::runtime_error(std::string("expected integer in ") + what);
  return v.as_int();
}

std::string sign_of(const Tuple& in) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "sig_%06llx",
                static_cast<unsigned long long>(tuple_hash(in) & 0xffffffULL));
  return buf;
}

// Returns true (with outputs) when the tuple is in the function relation.
bool eval_builtin(const Relation& rel, const Tuple& inputs, Tuple& outputs) {
  const std::string& b = rel.builtin;
  if (b.empty())
    throw std::runtime_error("function '" + rel.name + "' has no evaluator");
  if (b == "hash") {
    uint64_t mod = rel.builtin_args.empty()
                       ? 0x7fffffffULL
                       : static_cast<uint64_t>(std::stoll(rel.builtin_args[0]));
    outputs = {Value(static_cast<int64_t>(tuple_hash(inputs) % mod))};
    return true;
  }
  if (b == "sign") {
    outputs = {Value(sign_of(inputs))};
    return true;
  }
  if (b == "verify") {
    // verify(v..., sig): holds iff sig matches sign(v...)
    Tuple payload(inputs.begin(), inputs.end() - 1);
    return inputs.back().is_sym() && inputs.back().as_sym() == sign_of(payload);
  }
  if (b == "forwardmap") {
    // args "a=b": maps a to b, anything else to itself
    const std::string& key = inputs[0].is_sym() ? inputs[0].as_sym() : inputs[0].str();
    std::string out = key;
    for (const auto& arg : rel.builtin_args) {
      auto eq = arg.find('=');
      if (eq != std::string::npos && arg.substr(0, eq) == key) {
        out = arg.substr(eq + 1);
        break;
      }
    }
    outputs = {Value(out)};
    return true;
  }
  if (b == "policyhash") {
    // args: node addresses; output = args[stable_hash(key) % n]
    if (rel.builtin_args.empty())
      throw std::runtime_error("policyhash needs node addresses");
    uint64_t h = tuple_hash(inputs);
    outputs = {Value(rel.builtin_args[h % rel.builtin_args.size()])};
    return true;
  }
  if (b == "policymap") {
    // args "old=n1|n2|...": input (old, key...) → one node of old's group
    const std::string& key = inputs[0].is_sym() ? inputs[0].as_sym() : inputs[0].str();
    for (const auto& arg : rel.builtin_args) {
      auto eq = arg.find('=');
      if (eq == std::string::npos || arg.substr(0, eq) != key) continue;
      std::vector<std::string> group;
      std::string rest = arg.substr(eq + 1), cur;
      for (char c : rest) {
        if (c == '|') {
          group.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) group.push_back(cur);
      Tuple keyvals(inputs.begin() + 1, inputs.end());
      outputs = {Value(group[tuple_hash(keyvals) % group.size()])};
      return true;
    }
    outputs = {Value(key)};  // addresses outside the map route to themselves
    return true;
  }
  throw std::runtime_error("unknown builtin '" + b + "'");
}

}  // namespace

bool eval_builtin_function(const Relation& rel, const Tuple& inputs, Tuple& outputs) {
  return eval_builtin(rel, inputs, outputs);
}

namespace {

// ---------------------------------------------------------------------------
// Rule evaluation
// ---------------------------------------------------------------------------
//
// Rules are compiled once into a slot-indexed form: every variable gets an
// integer slot, literals carry per-term slot vectors, and the evaluation plan
// orders body elements so function inputs are bound before use and negations
// run last. Bindings are flat vectors with a trail for backtracking.

struct CLit {
  int rel = -1;  // index into program.relations; -1 for delay
  bool negated = false;
  bool is_fn = false;
  bool is_idb = false;
  int fn_inputs = 0, fn_outputs = 0;
  std::vector<int> slots;        // per term: variable slot, or -1 for constant
  std::vector<const Value*> consts;  // per term: constant, or null
};

struct CCon {
  int lhs = -1;
  int op = 0;  // 0:= 1:!= 2:< 3:<= 4:> 5:>=
  std::vector<std::pair<int, int64_t>> rhs;  // (slot, 0) or (-1, literal)
};

struct CompiledRule {
  int nslots = 0;
  std::vector<std::pair<bool, int>> plan;  // (is_literal, index); delay excluded
  std::vector<CLit> lits;
  std::vector<CCon> cons;
  int loc_slot = -1, time_slot = -1;
  // head
  int head_rel = -1;
  int head_payload = 0;
  std::vector<int> head_slots;             // per payload term: slot / -1 const / -2 agg
  std::vector<const Value*> head_consts;
  int head_loc_slot = -1;
  // aggregate
  int agg_kind = -1;  // 0 count 1 count0 2 sum 3 max 4 min 5 cert
  std::vector<int> agg_slots;
  std::vector<std::pair<bool, int>> rest_plan, counted_plan;  // count0 split
  // async
  std::vector<int> delay_slots;
  std::vector<const Value*> delay_consts;
  std::map<std::string, int> var_slot;
};

int agg_kind_of(const std::string& fn) {
  if (fn == "count") return 0;
  if (fn == "count0") return 1;
  if (fn == "sum") return 2;
  if (fn == "max") return 3;
  if (fn == "min") return 4;
  if (fn == "cert") return 5;
  return -1;
}

const CompiledRule& compile_rule(const Program& p, const Rule& rule) {
  if (rule.eval_ready && rule.eval_cache)
    return *static_cast<const CompiledRule*>(rule.eval_cache.get());
  auto cr = std::make_shared<CompiledRule>();
  CompiledRule& c = *cr;

  auto slot_of = [&](const std::string& v) {
    auto it = c.var_slot.find(v);
    if (it != c.var_slot.end()) return it->second;
    int s = c.nslots++;
    c.var_slot[v] = s;
    return s;
  };
  c.loc_slot = slot_of(rule.loc_var);
  c.time_slot = slot_of(rule.time_var);

  // plan: greedy safe ordering, IDB literals preferred among the ready
  std::set<std::string> bound = {rule.loc_var, rule.time_var};
  std::vector<bool> lit_done(rule.lits.size(), false);
  std::vector<bool> con_done(rule.cons.size(), false);
  size_t placed = 0, total = rule.cons.size();
  for (const auto& l : rule.lits)
    if (!l.is_delay()) ++total;

  auto lit_ready = [&](const Literal& l) {
    if (l.negated) return false;
    const Relation* rel = p.find_relation(l.relation);
    if (rel->kind != RelationKind::EdbFunction) return true;
    for (int i = 0; i < rel->fn_inputs; ++i)
      if (l.terms[i].kind == TermKind::Var && !bound.count(l.terms[i].var))
        return false;
    return true;
  };
  auto con_ready = [&](const Constraint& con) {
    for (const auto& a : con.rhs)
      if (a.is_var && !bound.count(a.var)) return false;
    return true;
  };
  auto place_lit = [&](size_t i) {
    c.plan.push_back({true, static_cast<int>(i)});
    lit_done[i] = true;
    for (const auto& v : literal_vars(rule.lits[i])) bound.insert(v);
    ++placed;
  };

  bool progress = true;
  while (placed < total && progress) {
    progress = false;
    // prefer relations with facts indexed at (l, t); cheap early exit
    for (size_t i = 0; i < rule.lits.size(); ++i) {
      const Literal& l = rule.lits[i];
      if (lit_done[i] || l.is_delay() || l.negated) continue;
      const Relation* rel = p.find_relation(l.relation);
      if (rel->kind == RelationKind::EdbFunction) continue;
      if (lit_ready(l)) {
        place_lit(i);
        progress = true;
      }
    }
    for (size_t i = 0; i < rule.lits.size(); ++i) {
      const Literal& l = rule.lits[i];
      if (lit_done[i] || l.is_delay() || l.negated) continue;
      if (lit_ready(l)) {
        place_lit(i);
        progress = true;
      }
    }
    for (size_t i = 0; i < rule.cons.size(); ++i) {
      if (con_done[i]) continue;
      if (con_ready(rule.cons[i])) {
        c.plan.push_back({false, static_cast<int>(i)});
        con_done[i] = true;
        bound.insert(rule.cons[i].lhs);
        ++placed;
      }
    }
  }
  for (size_t i = 0; i < rule.lits.size(); ++i) {
    if (!lit_done[i] && !rule.lits[i].is_delay() && rule.lits[i].negated) {
      c.plan.push_back({true, static_cast<int>(i)});
      lit_done[i] = true;
      ++placed;
    }
  }
  if (placed < total)
    throw std::runtime_error("cannot order body of rule for '" +
                             rule.head.relation + "' (unbound function input?)");

  // compile literals
  for (const auto& l : rule.lits) {
    CLit cl;
    if (l.is_delay()) {
      c.lits.push_back(cl);
      continue;
    }
    const Relation* rel = p.find_relation(l.relation);
    for (size_t i = 0; i < p.relations.size(); ++i)
      if (&p.relations[i] == rel) cl.rel = static_cast<int>(i);
    cl.negated = l.negated;
    cl.is_fn = rel->kind == RelationKind::EdbFunction;
    cl.is_idb = rel->is_idb_schema();
    cl.fn_inputs = rel->fn_inputs;
    cl.fn_outputs = rel->fn_outputs;
    for (const auto& t : l.terms) {
      if (t.kind == TermKind::Var) {
        cl.slots.push_back(slot_of(t.var));
        cl.consts.push_back(nullptr);
      } else {
        cl.slots.push_back(-1);
        cl.consts.push_back(&t.constant);
      }
    }
    c.lits.push_back(std::move(cl));
  }
  for (const auto& con : rule.cons) {
    CCon cc;
    cc.lhs = slot_of(con.lhs);
    static const char* ops[] = {"=", "!=", "<", "<=", ">", ">="};
    for (int i = 0; i < 6; ++i)
      if (con.op == ops[i]) cc.op = i;
    for (const auto& a : con.rhs) {
      if (a.is_var)
        cc.rhs.push_back({slot_of(a.var), 0});
      else
        cc.rhs.push_back({-1, a.num});
    }
    c.cons.push_back(std::move(cc));
  }

  // head
  const Relation* hrel = p.find_relation(rule.head.relation);
  for (size_t i = 0; i < p.relations.size(); ++i)
    if (&p.relations[i] == hrel) c.head_rel = static_cast<int>(i);
  c.head_payload = static_cast<int>(rule.head.terms.size()) - 2;
  for (int i = 0; i < c.head_payload; ++i) {
    const Term& t = rule.head.terms[i];
    if (t.kind == TermKind::Var) {
      c.head_slots.push_back(slot_of(t.var));
      c.head_consts.push_back(nullptr);
    } else if (t.kind == TermKind::Const) {
      c.head_slots.push_back(-1);
      c.head_consts.push_back(&t.constant);
    } else {
      c.head_slots.push_back(-2);
      c.head_consts.push_back(nullptr);
      c.agg_kind = agg_kind_of(t.agg_fn);
      if (t.agg_fn == "seal")
        throw std::runtime_error("seal<> must be desugared before evaluation");
      if (c.agg_kind < 0)
        throw std::runtime_error("unknown aggregate '" + t.agg_fn + "'");
      for (const auto& v : t.agg_vars) c.agg_slots.push_back(slot_of(v));
    }
  }
  c.head_loc_slot = slot_of(rule.head.terms[rule.head.terms.size() - 2].var);
  if (rule.kind == RuleKind::Asynchronous) {
    const Literal& d = rule.lits[rule.delay_index];
    for (int i = 0; i < d.delay_inputs; ++i) {
      const Term& t = d.terms[i];
      if (t.kind == TermKind::Var) {
        c.delay_slots.push_back(slot_of(t.var));
        c.delay_consts.push_back(nullptr);
      } else {
        c.delay_slots.push_back(-1);
        c.delay_consts.push_back(&t.constant);
      }
    }
  }

  // count0: split the plan into elements touching aggregate variables and
  // the remainder that defines the (possibly empty) groups
  if (c.agg_kind == 1) {
    std::set<int> avs(c.agg_slots.begin(), c.agg_slots.end());
    for (auto [is_lit, idx] : c.plan) {
      bool counted = false;
      if (is_lit) {
        for (int sl : c.lits[idx].slots)
          if (sl >= 0 && avs.count(sl)) counted = true;
      } else {
        if (avs.count(c.cons[idx].lhs)) counted = true;
        for (const auto& [sl, n] : c.cons[idx].rhs)
          if (sl >= 0 && avs.count(sl)) counted = true;
      }
      (counted ? c.counted_plan : c.rest_plan).push_back({is_lit, idx});
    }
  }

  rule.eval_cache = cr;
  rule.eval_ready = true;
  return *cr;
}

struct Binding {
  std::vector<const Value*> vals;  // bound values live in the instance, the
                                   // rule constants, or the eval arena
  std::vector<int> trail;

  explicit Binding(int n) : vals(n, nullptr) {}
  bool bind(int slot, const Value* v) {
    if (vals[slot]) return *vals[slot] == *v;
    vals[slot] = v;
    trail.push_back(slot);
    return true;
  }
  bool set(int slot) const { return vals[slot] != nullptr; }
  const Value& at(int slot) const { return *vals[slot]; }
  size_t mark() const { return trail.size(); }
  void undo(size_t m) {
    while (trail.size() > m) {
      vals[trail.back()] = nullptr;
      trail.pop_back();
    }
  }
};

struct RuleEval {
  const Program& p;
  const Instance& inst;
  int comp_idx;
  int rule_idx;
  const Rule& rule;
  const CompiledRule& c;
  std::string loc;
  int loc_id;
  int64_t t;
  DelaySchedule* sched;
  Value loc_val;
  Value time_val;
  std::vector<std::unique_ptr<Value>> arena;  // computed values

  std::vector<DerivedFact> out;

  RuleEval(const Program& p_, const Instance& inst_, int ci, int ri,
           const Rule& r_, const std::string& loc_, int64_t t_, DelaySchedule* s_)
      : p(p_),
        inst(inst_),
        comp_idx(ci),
        rule_idx(ri),
        rule(r_),
        c(compile_rule(p_, r_)),
        loc(loc_),
        loc_id(inst_.loc_id(loc_)),
        t(t_),
        sched(s_),
        loc_val(loc_),
        time_val(t_) {}

  const Value* keep(Value v) {
    // timestep arithmetic produces small integers at very high rates
    if (v.is_int() && v.as_int() >= 0 && v.as_int() < 512) {
      static const std::vector<Value>* small = [] {
        auto* out = new std::vector<Value>;
        for (int64_t i = 0; i < 512; ++i) out->push_back(Value(i));
        return out;
      }();
      return &(*small)[v.as_int()];
    }
    arena.push_back(std::make_unique<Value>(std::move(v)));
    return arena.back().get();
  }

  bool unify_lit(const CLit& cl, const Instance::FactRec& f, Binding& b) {
    size_t n = cl.slots.size();
    if (cl.is_idb) {
      size_t pa = n - 2;
      for (size_t i = 0; i < pa; ++i) {
        if (cl.slots[i] >= 0) {
          if (!b.bind(cl.slots[i], &f.payload[i])) return false;
        } else if (!(*cl.consts[i] == f.payload[i])) {
          return false;
        }
      }
      if (!b.bind(cl.slots[pa], &f.loc_v)) return false;
      return b.bind(cl.slots[pa + 1], &f.time_v);
    }
    for (size_t i = 0; i < n; ++i) {
      if (cl.slots[i] >= 0) {
        if (!b.bind(cl.slots[i], &f.payload[i])) return false;
      } else if (!(*cl.consts[i] == f.payload[i])) {
        return false;
      }
    }
    return true;
  }

  bool negated_match_exists(const CLit& cl, Binding& b) {
    const std::vector<int>& cands =
        cl.is_idb ? (loc_id < 0 ? inst.idb_at(cl.rel, loc, t)
                                : inst.idb_at(cl.rel, loc_id, t))
                  : inst.edb_of(cl.rel);
    size_t m = b.mark();
    for (int id : cands) {
      bool hit = unify_lit(cl, inst.facts()[id], b);
      b.undo(m);
      if (hit) return true;
    }
    return false;
  }

  int64_t slot_int(const Binding& b, int slot, const char* what) const {
    const Value& v = b.at(slot);
    if (!v.is_int()) throw std::runtime_error(std::string("expected integer in ") + what);
    return v.as_int();
  }

  bool check_con(const CCon& cc, Binding& b) {
    const Value* rhs;
    if (cc.rhs.size() == 1 && cc.rhs[0].first >= 0) {
      rhs = &b.at(cc.rhs[0].first);
    } else if (cc.rhs.size() == 1) {
      rhs = keep(Value(cc.rhs[0].second));
    } else {
      int64_t acc = 0;
      for (const auto& [sl, n] : cc.rhs)
        acc += sl >= 0 ? slot_int(b, sl, "arithmetic") : n;
      rhs = keep(Value(acc));
    }
    if (!b.set(cc.lhs)) {
      if (cc.op != 0)
        throw std::runtime_error("unbound variable in comparison");
      b.bind(cc.lhs, rhs);
      return true;
    }
    const Value& lhs = b.at(cc.lhs);
    switch (cc.op) {
      case 0:
        return lhs == *rhs;
      case 1:
        return lhs != *rhs;
      default: {
        if (!lhs.is_int() || !rhs->is_int())
          throw std::runtime_error("ordered comparison over non-integers");
        int64_t a = lhs.as_int();
        int64_t z = rhs->as_int();
        switch (cc.op) {
          case 2:
            return a < z;
          case 3:
            return a <= z;
          case 4:
            return a > z;
          default:
            return cc.op == 5 ? a >= z : a > z;
        }
      }
    }
  }

  template <typename F>
  void dfs(const std::vector<std::pair<bool, int>>& plan, size_t step, Binding& b,
           std::vector<int>& body, const F& cb) {
    if (step == plan.size()) {
      cb(b, body);
      return;
    }
    auto [is_lit, idx] = plan[step];
    if (!is_lit) {
      size_t m = b.mark();
      if (check_con(c.cons[idx], b)) dfs(plan, step + 1, b, body, cb);
      b.undo(m);
      return;
    }
    const CLit& cl = c.lits[idx];
    if (cl.negated) {
      if (!negated_match_exists(cl, b)) dfs(plan, step + 1, b, body, cb);
      return;
    }
    if (cl.is_fn) {
      Tuple inputs;
      inputs.reserve(cl.fn_inputs);
      for (int i = 0; i < cl.fn_inputs; ++i)
        inputs.push_back(cl.slots[i] >= 0 ? b.at(cl.slots[i]) : *cl.consts[i]);
      Tuple outputs;
      if (!eval_builtin(p.relations[cl.rel], inputs, outputs)) return;
      size_t m = b.mark();
      bool ok = true;
      for (int i = 0; i < cl.fn_outputs && ok; ++i) {
        int sl = cl.slots[cl.fn_inputs + i];
        if (sl >= 0)
          ok = b.bind(sl, keep(std::move(outputs[i])));
        else
          ok = *cl.consts[cl.fn_inputs + i] == outputs[i];
      }
      if (ok) dfs(plan, step + 1, b, body, cb);
      b.undo(m);
      return;
    }
    const std::vector<int>& cands =
        cl.is_idb ? (loc_id < 0 ? inst.idb_at(cl.rel, loc, t)
                                : inst.idb_at(cl.rel, loc_id, t))
                  : inst.edb_of(cl.rel);
    for (int id : cands) {
      size_t m = b.mark();
      if (unify_lit(cl, inst.facts()[id], b)) {
        body.push_back(id);
        dfs(plan, step + 1, b, body, cb);
        body.pop_back();
      }
      b.undo(m);
    }
  }

  template <typename F>
  void assignments(const std::vector<std::pair<bool, int>>& plan, const F& cb) {
    Binding b(c.nslots);
    b.bind(c.loc_slot, &loc_val);
    b.bind(c.time_slot, &time_val);
    std::vector<int> body;
    dfs(plan, 0, b, body, cb);
  }

  void emit(Tuple payload, const Binding& b, std::vector<int> body) {
    DerivedFact d;
    d.payload = std::move(payload);
    d.body = std::move(body);
    switch (rule.kind) {
      case RuleKind::Synchronous:
        d.loc = loc;
        d.time = t;
        break;
      case RuleKind::Sequential:
        d.loc = loc;
        d.time = t + 1;
        break;
      case RuleKind::Asynchronous: {
        const Value& dest = b.at(c.head_loc_slot);
        if (!dest.is_sym())
          throw std::runtime_error("destination of '" + rule.head.relation +
                                   "' is not an address");
        d.loc = dest.as_sym();
        Tuple din;
        din.reserve(c.delay_slots.size());
        for (size_t i = 0; i < c.delay_slots.size(); ++i)
          din.push_back(c.delay_slots[i] >= 0 ? b.at(c.delay_slots[i])
                                              : *c.delay_consts[i]);
        if (!sched)
          throw std::runtime_error("asynchronous rule evaluated without a schedule");
        MessageKey key{comp_idx, rule_idx, std::move(din), d.loc, t};
        d.time = sched->arrival(key);
        break;
      }
    }
    out.push_back(std::move(d));
  }

  std::string assignment_sig(const Binding& b) const {
    std::string sig;
    for (int i = 0; i < c.nslots; ++i) {
      if (b.set(i)) sig += b.at(i).str();
      sig += '\x1f';
    }
    return sig;
  }

  void run_plain() {
    const bool async = rule.kind == RuleKind::Asynchronous;
    std::set<std::string> seen;
    assignments(c.plan, [&](const Binding& b, const std::vector<int>& body) {
      Tuple payload;
      payload.reserve(c.head_payload);
      for (int i = 0; i < c.head_payload; ++i)
        payload.push_back(c.head_slots[i] >= 0 ? b.at(c.head_slots[i])
                                               : *c.head_consts[i]);
      if (async) {
        // one send per distinct (delay input, destination)
        std::string sig = tuple_str(payload);
        for (size_t i = 0; i < c.delay_slots.size(); ++i)
          sig += "|" + (c.delay_slots[i] >= 0 ? b.at(c.delay_slots[i])
                                              : *c.delay_consts[i])
                           .str();
        sig += "|" + b.at(c.head_loc_slot).str();
        if (!seen.insert(sig).second) return;
      }
      emit(std::move(payload), b, body);
    });
  }

  void run_aggregate() {
    struct Group {
      std::vector<Tuple> rows;
      std::set<std::string> row_sigs;
      std::vector<int> body;
      Binding sample{0};
      bool has_sample = false;
    };
    std::map<std::string, Group> groups;

    auto group_key = [&](const Binding& b) {
      std::string key;
      for (int i = 0; i < c.head_payload; ++i) {
        if (c.head_slots[i] == -2) continue;
        key += (c.head_slots[i] >= 0 ? b.at(c.head_slots[i]) : *c.head_consts[i])
                   .str() +
               '\x1f';
      }
      return key;
    };
    auto merge_body = [](Group& g, const std::vector<int>& body) {
      for (int id : body)
        if (std::find(g.body.begin(), g.body.end(), id) == g.body.end())
          g.body.push_back(id);
    };
    auto add_row = [&](Group& g, const Binding& b, const std::vector<int>& body) {
      Tuple row;
      row.reserve(c.agg_slots.size());
      for (int sl : c.agg_slots) row.push_back(b.at(sl));
      std::string sig = assignment_sig(b);
      if (!g.row_sigs.insert(sig).second) return;
      g.rows.push_back(std::move(row));
      merge_body(g, body);
    };

    if (c.agg_kind == 1) {
      // enumerate groups from the rest of the body, then count matches
      std::set<std::string> rest_sigs;
      std::vector<std::pair<Binding, std::vector<int>>> rests;
      assignments(c.rest_plan, [&](const Binding& b, const std::vector<int>& body) {
        if (!rest_sigs.insert(assignment_sig(b)).second) return;
        rests.push_back({b, body});
      });
      for (auto& [restb, restbody] : rests) {
        Group& g = groups[group_key(restb)];
        if (!g.has_sample) {
          g.sample = restb;
          g.has_sample = true;
        }
        merge_body(g, restbody);
        Binding b2 = restb;
        std::vector<int> body2;
        dfs(c.counted_plan, 0, b2, body2,
            [&](const Binding& cb, const std::vector<int>& cbody) {
              add_row(g, cb, cbody);
            });
      }
    } else {
      assignments(c.plan, [&](const Binding& b, const std::vector<int>& body) {
        Group& g = groups[group_key(b)];
        if (!g.has_sample) {
          g.sample = b;
          g.has_sample = true;
        }
        add_row(g, b, body);
      });
    }

    for (auto& [key, g] : groups) {
      (void)key;
      if (g.rows.empty() && c.agg_kind != 1) continue;
      Value agg_value = fold(g.rows);
      Tuple payload;
      payload.reserve(c.head_payload);
      for (int i = 0; i < c.head_payload; ++i) {
        if (c.head_slots[i] == -2)
          payload.push_back(agg_value);
        else if (c.head_slots[i] >= 0)
          payload.push_back(g.sample.at(c.head_slots[i]));
        else
          payload.push_back(*c.head_consts[i]);
      }
      emit(std::move(payload), g.sample, g.body);
    }
  }

  Value fold(const std::vector<Tuple>& rows) const {
    switch (c.agg_kind) {
      case 0:
      case 1:
        return Value(static_cast<int64_t>(rows.size()));
      case 2: {
        int64_t acc = 0;
        for (const auto& r : rows) {
          if (!r[0].is_int()) throw std::runtime_error("sum over non-integer");
          acc += r[0].as_int();
        }
        return Value(acc);
      }
      case 3:
      case 4: {
        Value best = rows[0][0];
        for (const auto& r : rows)
          if (c.agg_kind == 3 ? best < r[0] : r[0] < best) best = r[0];
        return best;
      }
      default: {
        std::vector<Value> coll;
        for (const auto& r : rows) coll.push_back(r[0]);
        std::sort(coll.begin(), coll.end());
        coll.erase(std::unique(coll.begin(), coll.end(),
                               [](const Value& a, const Value& b) { return a == b; }),
                   coll.end());
        return Value(std::move(coll));
      }
    }
  }
};

}  // namespace

std::vector<DerivedFact> immediate_consequence(const Program& p, int comp, int rule,
                                               const Instance& inst,
                                               const std::string& loc, int64_t t,
                                               DelaySchedule* sched) {
  const Rule& r = p.components[comp].rules[rule];
  if (!r.classify_ok)
    throw std::runtime_error("rule is not classifiable: " + r.classify_err);
  const CompiledRule& c = compile_rule(p, r);
  // fast path: a rule whose first planned literal is a positive IDB literal
  // with no facts at (loc, t) cannot fire (count0 groups may still be empty)
  if (c.agg_kind != 1 && !c.plan.empty() && c.plan[0].first) {
    const CLit& cl = c.lits[c.plan[0].second];
    if (cl.is_idb && !cl.negated && inst.idb_at(cl.rel, loc, t).empty()) return {};
  }
  RuleEval ev(p, inst, comp, rule, r, loc, t, sched);
  if (ev.c.agg_kind >= 0)
    ev.run_aggregate();
  else
    ev.run_plain();
  // deterministic emission order
  std::sort(ev.out.begin(), ev.out.end(),
            [](const DerivedFact& a, const DerivedFact& b) {
              if (a.loc != b.loc) return a.loc < b.loc;
              if (a.time != b.time) return a.time < b.time;
              return std::lexicographical_compare(a.payload.begin(), a.payload.end(),
                                                  b.payload.begin(), b.payload.end());
            });
  return ev.out;
}

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

std::string History::canonical() const {
  std::vector<std::string> lines;
  for (const auto& r : records) {
    std::string line = r.is_input ? "in  " : "out ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%06lld ", static_cast<long long>(r.arrival));
    line += buf;
    line += r.relation + tuple_str(r.payload) + " -> " + r.dest +
            " send=" + std::to_string(r.send);
    lines.push_back(line);
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  if (truncated) out += "truncated\n";
  return out;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

Runner::Runner(const Program& p) : p_(p) {
  strata_ = stratify(p);
  auto ids = std::make_shared<Instance::RelIds>();
  for (size_t i = 0; i < p.relations.size(); ++i)
    (*ids)[p.relations[i].name] = static_cast<int>(i);
  rel_ids_ = std::move(ids);
  for (size_t ci = 0; ci < p.components.size(); ++ci)
    for (const auto& h : p.components[ci].homes) {
      if (node_comp_.count(h))
        throw std::runtime_error("address '" + h + "' hosts two components");
      node_comp_[h] = static_cast<int>(ci);
    }
  sync_rules_.resize(p.components.size());
  for (size_t ci = 0; ci < p.components.size(); ++ci) {
    sync_rules_[ci].resize(strata_.count);
    for (size_t ri = 0; ri < p.components[ci].rules.size(); ++ri) {
      const Rule& r = p.components[ci].rules[ri];
      if (r.kind == RuleKind::Synchronous)
        sync_rules_[ci][strata_.stratum.at(r.head.relation)].push_back(
            static_cast<int>(ri));
    }
  }
}

RunResult Runner::run(const std::vector<RunInput>& inputs, DelaySchedule& sched,
                      int64_t horizon, const RunSpec& spec) const {
  const Program& p = p_;
  const Strata& strata = strata_;
  const auto& node_comp = node_comp_;
  const auto& sync_rules = sync_rules_;
  Instance inst(p, rel_ids_);
  for (const auto& [rel, vals] : p.edb_facts) inst.add_edb(inst.rel_id(rel), vals);

  struct Pending {
    int rel;
    Tuple payload;
    std::string dest;
    int64_t send;
    int comp, rule;
    std::vector<int> body;
  };
  std::map<int64_t, std::vector<Pending>> pending;
  std::map<int64_t, std::vector<const RunInput*>> inject;
  for (const auto& in : inputs) inject[in.time].push_back(&in);

  std::set<std::string> output_rels(spec.output_relations.begin(),
                                    spec.output_relations.end());

  RunResult res{Instance(p, rel_ids_), History{}, false, -1};
  History& hist = res.history;
  int64_t truncated_msgs = 0;
  std::vector<bool> tick_active(static_cast<size_t>(horizon) + 2, false);

  sched.begin_run();

  for (int64_t t = 0; t <= horizon; ++t) {
    // deliver messages
    auto pit = pending.find(t);
    if (pit != pending.end()) {
      for (auto& m : pit->second) {
        bool inserted = false;
        int id = inst.add_idb(m.rel, std::move(m.payload), m.dest, t, &inserted);
        inst.add_derivation(id, {m.comp, m.rule, m.body, m.send});
        tick_active[t] = true;
      }
      pending.erase(pit);
    }
    // inject external inputs
    auto iit = inject.find(t);
    if (iit != inject.end()) {
      for (const RunInput* in : iit->second) {
        int rid = inst.rel_id(in->relation);
        inst.add_idb(rid, in->payload, in->dest, t);
        hist.records.push_back({true, in->relation, in->payload, in->dest, t, t});
        tick_active[t] = true;
      }
    }
    // synchronous fixpoint per node, stratum by stratum
    for (const auto& [addr, ci] : node_comp) {
      for (int s = 0; s < strata.count; ++s) {
        bool grew = true;
        while (grew) {
          grew = false;
          for (int ri : sync_rules[ci][s]) {
            auto derived = immediate_consequence(p, ci, ri, inst, addr, t, &sched);
            for (auto& d : derived) {
              int rid = inst.rel_id(p.components[ci].rules[ri].head.relation);
              bool inserted = false;
              int id = inst.add_idb(rid, std::move(d.payload), d.loc, d.time, &inserted);
              inst.add_derivation(id, {ci, ri, d.body, t});
              if (inserted) grew = true;
            }
          }
        }
      }
    }
    // sequential and asynchronous rules over the finalized tick
    for (const auto& [addr, ci] : node_comp) {
      const Component& c = p.components[ci];
      for (size_t ri = 0; ri < c.rules.size(); ++ri) {
        const Rule& r = c.rules[ri];
        if (r.kind == RuleKind::Synchronous) continue;
        auto derived =
            immediate_consequence(p, ci, static_cast<int>(ri), inst, addr, t, &sched);
        for (auto& d : derived) {
          int rid = inst.rel_id(r.head.relation);
          if (r.kind == RuleKind::Sequential) {
            if (d.time > horizon) continue;
            int id = inst.add_idb(rid, std::move(d.payload), d.loc, d.time);
            inst.add_derivation(id, {ci, static_cast<int>(ri), d.body, t});
          } else {
            if (d.time > horizon) {
              ++truncated_msgs;
              continue;
            }
            pending[d.time].push_back({rid, d.payload, d.loc, t, ci,
                                       static_cast<int>(ri), d.body});
            tick_active[t] = true;  // message in flight
            if (output_rels.count(r.head.relation))
              hist.records.push_back(
                  {false, r.head.relation, d.payload, d.loc, t, d.time});
          }
        }
      }
    }
  }

  res.truncated = truncated_msgs > 0 || !pending.empty();
  hist.truncated = res.truncated;

  // new-fact detection for quiescence: a fact is new at t if its time-shifted
  // predecessor does not exist
  for (const auto& f : inst.facts()) {
    if (f.loc.empty() || f.time == 0) continue;
    if (!inst.has_idb(f.rel, f.payload, f.loc, f.time - 1))
      tick_active[f.time] = true;
  }
  if (!res.truncated) {
    int64_t q = -1;
    for (int64_t t = horizon; t >= 0; --t) {
      if (tick_active[t]) break;
      q = t;
    }
    if (q >= 0 && q + 1 <= horizon) res.quiesced_at = q;
  }

  res.instance = std::move(inst);
  return res;
}

RunResult run(const Program& p, const std::vector<RunInput>& inputs,
              DelaySchedule& sched, int64_t horizon, const RunSpec& spec) {
  return Runner(p).run(inputs, sched, horizon, spec);
}

}  // namespace dedopt
