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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "dedopt/eval.hpp"
#include "dedopt/parser.hpp"
#include "dedopt/validate.hpp"
#include "test_util.hpp"

using namespace dedopt;

namespace {

Value S(const char* s) { return Value(std::string(s)); }
Value I(int64_t i) { return Value(i); }

RunSpec kvs_spec() {
  return RunSpec{{"in"}, {"outCert", "outInconsistent"}};
}

}  // namespace

TEST_CASE("aggregate rule counts satisfying assignments") {
  Program p = parse_program(read_corpus("listing2.dl"));
  Instance inst(p);
  int coll = inst.rel_id("collisions");
  inst.add_idb(coll, {S("a"), I(7)}, "s1", 5);
  inst.add_idb(coll, {S("b"), I(7)}, "s1", 5);
  inst.add_idb(coll, {S("x"), I(9)}, "s1", 5);

  // brute-force oracle: group collision facts by hash, count distinct values
  std::map<int64_t, int> expect;
  for (const auto& f : inst.facts())
    if (f.rel == coll) expect[f.payload[1].as_int()]++;

  auto derived = immediate_consequence(p, 0, 3, inst, "s1", 5, nullptr);
  REQUIRE(derived.size() == expect.size());
  for (const auto& d : derived) {
    CHECK(d.time == 5);
    CHECK(d.loc == "s1");
    CHECK(d.payload[0].as_int() == expect.at(d.payload[1].as_int()));
  }
}

TEST_CASE("persistence rule carries facts to the next tick") {
  Program p = parse_program(read_corpus("listing2.dl"));
  Instance inst(p);
  int hs = inst.rel_id("hashset");
  inst.add_idb(hs, {I(7), S("a")}, "s1", 3);
  auto derived = immediate_consequence(p, 0, 1, inst, "s1", 3, nullptr);
  REQUIRE(derived.size() == 1);
  CHECK(derived[0].payload == Tuple{I(7), S("a")});
  CHECK(derived[0].time == 4);
  CHECK(derived[0].loc == "s1");
}

TEST_CASE("asynchronous head takes arrival from the schedule") {
  Program p = parse_program(read_corpus("listing2.dl"));
  Instance inst(p);
  inst.add_edb(inst.rel_id("leader"), {S("lead")});
  int ts = inst.rel_id("toStorage");
  // value whose signature verifies
  Tuple sigin = {S("v")};
  // compute the expected signature through a run of the sign function: the
  // verify builtin only accepts matching signatures, so reuse rule 0 instead.
  // Simpler: drive the async rule (rule 4) directly; it re-signs the value.
  inst.add_idb(ts, {S("v"), S("anysig")}, "s1", 2);
  int nc = inst.rel_id("numCollisions");
  // hash of ("v") under default modulus
  int64_t h = static_cast<int64_t>(tuple_hash({S("v")}) % 0x7fffffffULL);
  inst.add_idb(nc, {I(0), I(h)}, "s1", 2);

  // explicit-table schedule: find the key by probing with an enumerated
  // schedule first, then pin arrival = send + 3
  DelaySchedule probe = DelaySchedule::enumerated(1);
  probe.begin_run();
  auto first = immediate_consequence(p, 0, 4, inst, "s1", 2, &probe);
  REQUIRE(first.size() == 1);
  REQUIRE(probe.used.size() == 1);
  std::map<std::string, int64_t> table;
  table[probe.used.begin()->first] = 5;  // send=2, arrival=5
  DelaySchedule sched = DelaySchedule::table(table);
  sched.begin_run();
  auto derived = immediate_consequence(p, 0, 4, inst, "s1", 2, &sched);
  REQUIRE(derived.size() == 1);
  CHECK(derived[0].loc == "lead");
  CHECK(derived[0].time == 5);
  CHECK(derived[0].payload[0] == S("s1"));  // source address rides along

  // missing table entry is an error
  DelaySchedule empty = DelaySchedule::table({});
  empty.begin_run();
  CHECK_THROWS(immediate_consequence(p, 0, 4, inst, "s1", 2, &empty));
}

TEST_CASE("kvs end-to-end: one client value certifies with zero collisions") {
  Program p = parse_program(read_corpus("kvs.dl"));
  REQUIRE(check_well_formed(p).ok());
  DelaySchedule sched = DelaySchedule::seeded(1, 1);
  RunResult res = run(p, {{"in", {S("hello")}, "lead", 1}}, sched, 8, kvs_spec());

  // persisted acks re-derive the certificate each tick, so late resends are
  // still in flight at the horizon
  CHECK(res.truncated);
  bool saw_cert = false, saw_inconsistent = false;
  for (const auto& r : res.history.records) {
    if (r.is_input) continue;
    if (r.relation == "outCert") {
      saw_cert = true;
      CHECK(r.dest == "cli");
      CHECK(r.payload[1] == S("hello"));
      CHECK(r.payload[2] == I(0));  // no collisions
      REQUIRE(r.payload[0].is_coll());
      CHECK(r.payload[0].as_coll().size() == 1);  // one distinct signature
    }
    if (r.relation == "outInconsistent") saw_inconsistent = true;
  }
  CHECK(saw_cert);
  CHECK_FALSE(saw_inconsistent);

  // acks from all three storage nodes
  Instance& inst = res.instance;
  int acks = inst.rel_id("numACKs");
  bool saw_quorum = false;
  for (const auto& f : inst.facts())
    if (f.rel == acks && f.payload[0] == I(3)) saw_quorum = true;
  CHECK(saw_quorum);
}

TEST_CASE("kvs sequenced colliding values report one collision") {
  Program p = parse_program(read_corpus("kvs.dl"));
  // shrink the hash range so collisions are constructible
  p.find_relation("hash")->builtin_args = {"4"};

  // find two distinct strings with colliding hashes
  std::string v1 = "v0", v2;
  for (int i = 1; i < 64 && v2.empty(); ++i) {
    std::string cand = "v" + std::to_string(i);
    if (tuple_hash({S(cand.c_str())}) % 4 == tuple_hash({S(v1.c_str())}) % 4)
      v2 = cand;
  }
  REQUIRE_FALSE(v2.empty());

  DelaySchedule sched = DelaySchedule::seeded(1, 1);
  RunResult res = run(p,
                      {{"in", {Value(v1)}, "lead", 1}, {"in", {Value(v2)}, "lead", 8}},
                      sched, 16, kvs_spec());
  std::map<std::string, int64_t> coll_count;
  for (const auto& r : res.history.records)
    if (!r.is_input && r.relation == "outCert")
      coll_count[r.payload[1].as_sym()] = r.payload[2].as_int();
  REQUIRE(coll_count.size() == 2);
  CHECK(coll_count[v1] == 0);
  CHECK(coll_count[v2] == 1);  // second write sees the first value stored
}

TEST_CASE("no inputs produce an empty history and early quiescence") {
  Program p = parse_program(read_corpus("kvs.dl"));
  DelaySchedule sched = DelaySchedule::seeded(7, 2);
  RunResult res = run(p, {}, sched, 6, kvs_spec());
  CHECK(res.history.records.empty());
  CHECK_FALSE(res.truncated);
  CHECK(res.quiesced_at == 0);
}

TEST_CASE("node with only persisted state carries it unchanged") {
  Program p = parse_program(
      ".input seedle/3\n"
      "component keeper @ n {\n"
      "st(v,l,t) :- seedle(v,l,t)\n"
      "st(v,l,t') :- st(v,l,t), t'=t+1\n"
      "}\n");
  DelaySchedule sched = DelaySchedule::seeded(1, 1);
  RunResult res = run(p, {{"seedle", {I(42)}, "n", 1}}, sched, 5,
                      RunSpec{{"seedle"}, {}});
  Instance& inst = res.instance;
  int st = inst.rel_id("st");
  for (int64_t t = 1; t <= 5; ++t) CHECK(inst.has_idb(st, {I(42)}, "n", t));
  CHECK(res.quiesced_at > 0);  // the carry is not activity
}

TEST_CASE("determinism: identical runs serialize byte-identically") {
  Program p = parse_program(read_corpus("kvs.dl"));
  auto once = [&](uint64_t seed) {
    DelaySchedule sched = DelaySchedule::seeded(seed, 3);
    RunResult res = run(p,
                        {{"in", {S("a")}, "lead", 1}, {"in", {S("b")}, "lead", 2}},
                        sched, 12, kvs_spec());
    return res.history.canonical() + "\x1e" + res.instance.canonical();
  };
  CHECK(once(11) == once(11));
  CHECK(once(12) == once(12));
  CHECK(once(11) != once(12));  // different schedules move arrivals
}

TEST_CASE("happens-before holds across all asynchronous derivations") {
  Program p = parse_program(read_corpus("kvs.dl"));
  DelaySchedule sched = DelaySchedule::seeded(3, 3);
  RunResult res = run(p, {{"in", {S("a")}, "lead", 1}, {"in", {S("b")}, "lead", 3}},
                      sched, 12, kvs_spec());
  const Instance& inst = res.instance;
  for (size_t i = 0; i < inst.facts().size(); ++i) {
    for (const auto& d : inst.provenance()[i]) {
      if (d.comp < 0) continue;
      const Rule& r = p.components[d.comp].rules[d.rule];
      if (r.kind == RuleKind::Asynchronous)
        CHECK(inst.facts()[i].time > d.derived_at);
    }
  }
}

TEST_CASE("set semantics: no duplicate facts in an instance") {
  Program p = parse_program(read_corpus("kvs.dl"));
  DelaySchedule sched = DelaySchedule::seeded(5, 2);
  RunResult res = run(p, {{"in", {S("a")}, "lead", 1}}, sched, 10, kvs_spec());
  std::set<std::string> seen;
  for (const auto& f : res.instance.facts()) {
    std::string sig = std::to_string(f.rel) + tuple_str(f.payload) + f.loc + ":" +
                      std::to_string(f.time);
    CHECK(seen.insert(sig).second);
  }
}

TEST_CASE("stratification orders the aggregate edge and rejects odd cycles") {
  Program p = parse_program(read_corpus("listing2.dl"));
  Strata s = stratify(p);
  CHECK(s.stratum.at("collisions") < s.stratum.at("numCollisions"));
  CHECK(s.stratum.at("hashset") == 0);
  CHECK(s.stratum.at("toStorage") == 0);

  // positive same-timestep recursion is fine
  Program pos = parse_program(
      ".input e/4\n"
      "component g @ n {\n"
      "path(a,b,l,t) :- e(a,b,l,t)\n"
      "path(a,c,l,t) :- path(a,b,l,t), e(b,c,l,t)\n"
      "}\n");
  CHECK_NOTHROW(stratify(pos));

  // a :- !a within one timestep is rejected
  Program neg = parse_program(
      ".input z/3\n"
      "component g @ n {\n"
      "a(v,l,t) :- z(v,l,t), !a(v,l,t)\n"
      "}\n");
  CHECK_THROWS(stratify(neg));
}

TEST_CASE("positive transitive closure computes within one tick") {
  Program p = parse_program(
      ".input e/4\n"
      "component g @ n {\n"
      "path(a,b,l,t) :- e(a,b,l,t)\n"
      "path(a,c,l,t) :- path(a,b,l,t), e(b,c,l,t)\n"
      "}\n");
  DelaySchedule sched = DelaySchedule::seeded(1, 1);
  RunResult res = run(p,
                      {{"e", {I(1), I(2)}, "n", 1},
                       {"e", {I(2), I(3)}, "n", 1},
                       {"e", {I(3), I(4)}, "n", 1}},
                      sched, 2, RunSpec{{"e"}, {}});
  int path = res.instance.rel_id("path");
  CHECK(res.instance.has_idb(path, {I(1), I(4)}, "n", 1));
  CHECK(res.instance.idb_at(path, "n", 1).size() == 6);
}

TEST_CASE("truncated runs are flagged") {
  Program p = parse_program(read_corpus("kvs.dl"));
  DelaySchedule sched = DelaySchedule::seeded(1, 3);
  RunResult res = run(p, {{"in", {S("a")}, "lead", 1}}, sched, 2, kvs_spec());
  CHECK(res.truncated);
  CHECK(res.history.truncated);
  CHECK(res.quiesced_at == -1);
}
