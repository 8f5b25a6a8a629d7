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

#include "dedopt/equivalence.hpp"
#include "dedopt/parser.hpp"
#include "dedopt/rewrite.hpp"
#include "test_util.hpp"

using namespace dedopt;

namespace {

Value S(const char* s) { return Value(std::string(s)); }

RunSpec kvs_spec() { return RunSpec{{"in"}, {"outCert", "outInconsistent"}}; }

std::vector<RunInput> kvs_inputs(int n) {
  std::vector<RunInput> out;
  const char* vals[] = {"a", "b", "c", "d"};
  for (int i = 0; i < n; ++i)
    out.push_back({"in", {S(vals[i])}, "lead", i + 1});
  return out;
}

}  // namespace

TEST_CASE("observable projection keeps channels, drops internals") {
  Program p = parse_program(read_corpus("kvs1.dl"));
  DelaySchedule sched = DelaySchedule::seeded(1, 1);
  RunResult res = run(p, kvs_inputs(1), sched, 8, kvs_spec());
  ObservableHistory obs = observable(res.history, kvs_spec());
  CHECK(obs.inputs.size() == 1);
  CHECK_FALSE(obs.outputs.empty());
  for (const auto& line : obs.outputs) {
    CAPTURE(line);
    CHECK(line.find("fromStorage") == std::string::npos);
    CHECK(line.find("outCert") == 0);
  }
  // empty history
  History empty;
  ObservableHistory eobs = observable(empty, kvs_spec());
  CHECK(eobs.canonical().empty());
}

TEST_CASE("identity rewrite is exactly equivalent") {
  Program p = parse_program(read_corpus("kvs1.dl"));
  EquivalenceConfig cfg;
  cfg.orig_max_delay = 2;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 8;
  EquivalenceVerdict v = check_exact(p, p, kvs_inputs(1), kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
  CHECK(v.original_runs > 1);
}

TEST_CASE("exact oracle: mutually independent decoupling of the leader") {
  Program orig = parse_program(read_corpus("kvs1.dl"));
  SplitPlan plan{"leader", {2, 3, 4, 5, 6, 7}, "proxy", {"pr"}};
  Program rewr = decouple_mutually_independent(orig, plan, {"in"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 3;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 9;
  EquivalenceVerdict v = check_exact(orig, rewr, kvs_inputs(1), kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: functional decoupling of the broadcaster") {
  Program orig = parse_program(read_corpus("kvs1.dl"));
  SplitPlan plan{"leader", {1}, "bcast", {"bc"}};
  Program rewr = decouple_functional(orig, plan, {"in"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 3;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 9;
  EquivalenceVerdict v = check_exact(orig, rewr, kvs_inputs(1), kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: monotonic decoupling of the inconsistency checker") {
  // two storage nodes and two colliding values make inconsistency reachable
  Program orig = parse_program(read_corpus("kvs.dl"));
  orig.find_relation("hash")->builtin_args = {"4"};
  // shrink to two storage nodes for enumerability
  {
    Component* storage = orig.find_component("storage");
    storage->homes = {"s1", "s2"};
    std::vector<std::pair<std::string, Tuple>> facts;
    for (auto& [rel, vals] : orig.edb_facts) {
      if (rel == "storageNodes" && vals[0] == S("s3")) continue;
      if (rel == "numNodes")
        facts.push_back({rel, {Value(int64_t(2))}});
      else
        facts.push_back({rel, vals});
    }
    orig.edb_facts = facts;
  }
  // find two colliding values
  std::string v1 = "v0", v2;
  for (int i = 1; i < 64 && v2.empty(); ++i) {
    std::string cand = "v" + std::to_string(i);
    if (tuple_hash({S(cand.c_str())}) % 4 == tuple_hash({S(v1.c_str())}) % 4)
      v2 = cand;
  }
  REQUIRE_FALSE(v2.empty());

  SplitPlan plan{"leader", {7}, "checker", {"ck"}};
  Program rewr = decouple_monotonic(orig, plan, MonotonicityMode::Strict, {"in"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 2;
  cfg.rewr_max_delay = 1;
  cfg.horizon = 7;
  std::vector<RunInput> inputs = {{"in", {Value(v1)}, "lead", 1},
                                  {"in", {Value(v2)}, "lead", 1}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
  CHECK(v.original_runs > 100);  // schedule interleavings genuinely explored
}

TEST_CASE("negative control: a dropped forward literal is caught") {
  Program orig = parse_program(read_corpus("kvs1.dl"));
  SplitPlan plan{"leader", {2, 3, 4, 5, 6, 7}, "proxy", {"pr"}};
  Program rewr = decouple_mutually_independent(orig, plan, {"in"}).program;

  // sabotage: remove the forward literal from the storage acknowledgement,
  // so fromStorage still flows to the old leader address
  Component* storage = rewr.find_component("storage");
  Rule& ack = storage->rules.back();
  for (size_t i = 0; i < ack.lits.size(); ++i) {
    if (ack.lits[i].relation.rfind("forward__", 0) == 0) {
      // rebind the head location back to the stale variable
      std::string stale = ack.lits[i].terms[0].var;
      std::string fresh = ack.lits[i].terms[1].var;
      ack.head.terms[ack.head.terms.size() - 2] = Term::mkvar(stale);
      Literal& d = ack.lits[ack.delay_index];
      for (int k = 0; k < d.delay_inputs; ++k)
        if (d.terms[k].kind == TermKind::Var && d.terms[k].var == fresh)
          d.terms[k] = Term::mkvar(stale);
      ack.lits.erase(ack.lits.begin() + i);
      ack.order.clear();
      for (size_t k = 0; k < ack.lits.size(); ++k)
        ack.order.push_back({true, static_cast<int>(k)});
      for (size_t k = 0; k < ack.cons.size(); ++k)
        ack.order.push_back({false, static_cast<int>(k)});
      break;
    }
  }
  reanalyze(rewr);

  // with per-hop delay <= 2 every original run certifies by tick 7, so the
  // sabotaged run (which never certifies) cannot hide behind the horizon
  EquivalenceConfig cfg;
  cfg.orig_max_delay = 2;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 9;
  EquivalenceVerdict v = check_exact(orig, rewr, kvs_inputs(1), kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK_FALSE(v.equivalent);
  CHECK_FALSE(v.cex.rewritten_schedule.empty());

  // the counterexample replays deterministically
  auto [h1, h2] = replay(v.cex, orig, rewr, kvs_inputs(1), kvs_spec(), cfg.horizon);
  ObservableHistory o1 = observable(h1, kvs_spec());
  ObservableHistory o2 = observable(h2, kvs_spec());
  CHECK(o1.canonical() != o2.canonical());

  // replay refuses a mismatched program
  Counterexample broken = v.cex;
  broken.orig_hash ^= 1;
  CHECK_THROWS(replay(broken, orig, rewr, kvs_inputs(1), kvs_spec(), cfg.horizon));
}

TEST_CASE("eventual-content equivalence and confluence checking") {
  const char* src =
      ".input upd/4\n.edb client/1\nclient(cli)\n"
      "component mono @ n {\n"
      "seen(k,v,l,t) :- upd(k,v,l,t)\n"
      "seen(k,v,l,t') :- seen(k,v,l,t), t'=t+1\n"
      "outSeen(k,v,l',t') :- seen(k,v,l,t), !sent(k,v,l,t), client(l'), delay((k,v,l,t,l'),t')\n"
      "sent(k,v,l,t') :- seen(k,v,l,t), t'=t+1\n"
      "sent(k,v,l,t') :- sent(k,v,l,t), t'=t+1\n"
      "}\n";
  Program p = parse_program(src);
  RunSpec spec{{"upd"}, {"outSeen"}};
  std::vector<RunInput> inputs = {{"upd", {Value(int64_t(1)), S("x")}, "n", 1},
                                  {"upd", {Value(int64_t(2)), S("y")}, "n", 2}};
  EquivalenceVerdict v = check_eventual(p, p, inputs, spec, 25, 2, 14);
  CAPTURE(v.str());
  CHECK(v.equivalent);

  // zero inputs: trivially equivalent
  EquivalenceVerdict z = check_eventual(p, p, {}, spec, 5, 2, 8);
  CHECK(z.equivalent);

  // a program whose output content depends on arrival order is not confluent
  const char* racy =
      ".input a/3\n.edb client/1\nclient(cli)\n"
      "component r @ n {\n"
      "first(v,l,t') :- a(v,l,t), !prevAny(l,t), t'=t+1\n"
      "prevAny(l,t') :- a(v,l,t), t'=t+1\n"
      "prevAny(l,t') :- prevAny(l,t), t'=t+1\n"
      "outFirst(v,l',t') :- first(v,l,t), !fsent(v,l,t), client(l'), delay((v,l,t,l'),t')\n"
      "fsent(v,l,t') :- first(v,l,t), t'=t+1\n"
      "fsent(v,l,t') :- fsent(v,l,t), t'=t+1\n"
      "}\n"
      "component src @ m {\n"
      "a(v,l',t') :- inx(v,l,t), sink(l'), delay((v,l,t,l'),t')\n"
      "}\n"
      ".input inx/3\n.edb sink/1\nsink(n)\n";
  Program q = parse_program(racy);
  RunSpec rspec{{"inx"}, {"outFirst"}};
  std::vector<RunInput> rinputs = {{"inx", {Value(int64_t(1))}, "m", 1},
                                   {"inx", {Value(int64_t(2))}, "m", 1}};
  EquivalenceVerdict nv = check_eventual(q, q, rinputs, rspec, 25, 3, 14);
  CAPTURE(nv.str());
  CHECK_FALSE(nv.equivalent);
  CHECK(nv.error.find("confluent") != std::string::npos);
}

TEST_CASE("exact oracle: state-machine decoupling of the cache backend") {
  const char* toy =
      ".input put/4\n"
      ".edb client/1\n"
      "client(cli)\n"
      "component cache @ n {\n"
      "relay(k,v,l,t) :- put(k,v,l,t)\n"
      "store(k,v,l,t') :- put(k,v,l,t), t'=t+1\n"
      "store(k,v,l,t') :- store(k,v,l,t), t'=t+1\n"
      "hit(k,v2,l,t) :- put(k,v,l,t), store(k,v2,l,t)\n"
      "outHit(k,v2,l',t') :- hit(k,v2,l,t), client(l'), delay((k,v2,l,t,l'),t')\n"
      "}\n";
  Program orig = parse_program(toy);
  SplitPlan plan{"cache", {1, 2, 3, 4}, "backend", {"bk"}};
  Program rewr = decouple_state_machine(orig, plan, {"put"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 6;
  cfg.rewr_max_delay = 1;
  cfg.horizon = 12;
  RunSpec spec{{"put"}, {"outHit"}};
  std::vector<RunInput> inputs = {{"put", {S("k"), S("x")}, "n", 1},
                                  {"put", {S("k"), S("y")}, "n", 3}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, spec, cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: asymmetric decoupling of the vote collector") {
  const char* toy =
      ".input in/4\n"
      ".edb tallyAddr/1\n.edb client/1\n.edb client2/1\n.edb quorum/1\n"
      "tallyAddr(n)\nclient(cli)\nclient2(cli2)\nquorum(2)\n"
      "component front @ f {\n"
      "vote(s,cmd,l',t') :- in(s,cmd,l,t), tallyAddr(l'), delay((s,cmd,l,t,l'),t')\n"
      "}\n"
      "component tally @ n {\n"
      "votes(s,cmd,l,t) :- vote(s,cmd,l,t)\n"
      "votes(s,cmd,l,t') :- votes(s,cmd,l,t), t'=t+1\n"
      "nv(count<s>,cmd,l,t) :- votes(s,cmd,l,t)\n"
      "won(cmd,l,t) :- vote(s,cmd,l,t), nv(n2,cmd,l,t), quorum(q), n2 >= q\n"
      "outWin(cmd,l',t') :- won(cmd,l,t), client(l'), delay((cmd,l,t,l'),t')\n"
      "decided(cmd,l,t') :- won(cmd,l,t), t'=t+1\n"
      "decided(cmd,l,t') :- decided(cmd,l,t), t'=t+1\n"
      "outLog(cmd,l',t') :- decided(cmd,l,t), !logSent(cmd,l,t), client2(l'), delay((cmd,l,t,l'),t')\n"
      "logSent(cmd,l,t') :- decided(cmd,l,t), t'=t+1\n"
      "logSent(cmd,l,t') :- logSent(cmd,l,t), t'=t+1\n"
      "}\n";
  Program orig = parse_program(toy);
  SplitPlan plan{"tally", {0, 1, 2, 3, 4}, "collector", {"co"}};
  Program rewr = decouple_asymmetric(orig, plan, MonotonicityMode::Relaxed, {}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 6;
  cfg.rewr_max_delay = 1;
  cfg.horizon = 14;
  RunSpec spec{{"in"}, {"outWin", "outLog"}};
  std::vector<RunInput> inputs = {{"in", {S("p1"), S("c")}, "f", 1},
                                  {"in", {S("p2"), S("c")}, "f", 2}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, spec, cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: co-hash partitioning of the checker") {
  const char* toy =
      ".input acksIn/6\n.edb checkerAddr/1\n.edb client/1\n"
      "checkerAddr(pr)\nclient(cli)\n"
      "component feeder @ fd {\n"
      "acks(src,sig,val,cnt,l',t') :- acksIn(src,sig,val,cnt,l,t), checkerAddr(l'), delay((src,sig,val,cnt,l,t,l'),t')\n"
      "}\n"
      "component checker @ pr {\n"
      "acksS(src,sig,val,cnt,l,t) :- acks(src,sig,val,cnt,l,t)\n"
      "acksS(src,sig,val,cnt,l,t') :- acksS(src,sig,val,cnt,l,t), t'=t+1\n"
      "outBad(val,l',t') :- acksS(s1,g1,val,c1,l,t), acksS(s2,g2,val,c2,l,t), c1 != c2, client(l'), delay((val,l,t,l'),t')\n"
      "}\n";
  Program orig = parse_program(toy);
  PartitionGroups groups{{"pr", {"pr1", "pr2"}}};
  Program rewr = partition_cohash(orig, "checker", groups, {"acksIn"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 3;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 9;
  RunSpec spec{{"acksIn"}, {"outBad"}};
  std::vector<RunInput> inputs = {
      {"acksIn", {S("a"), S("g1"), S("v"), Value(int64_t(0))}, "fd", 1},
      {"acksIn", {S("b"), S("g2"), S("v"), Value(int64_t(1))}, "fd", 1},
      {"acksIn", {S("c"), S("g3"), S("w"), Value(int64_t(0))}, "fd", 2}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, spec, cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: dependency partitioning of the storage node") {
  Program orig = parse_program(read_corpus("kvs1.dl"));
  PartitionGroups groups{{"s1", {"s1a", "s1b"}}};
  Program rewr = partition_with_dependencies(orig, "storage", groups, {"in"}).program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 2;
  cfg.rewr_max_delay = 2;
  cfg.horizon = 8;
  EquivalenceVerdict v = check_exact(orig, rewr, kvs_inputs(2), kvs_spec(), cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

namespace {

const char* kEpochToy2 =
    ".edb nodeAddr/1\n.edb client/1\n"
    "nodeAddr(n)\nclient(cli)\n"
    ".input in/4\n.input epochIn/3\n"
    "component front @ f {\n"
    "put(k,v,l',t') :- in(k,v,l,t), nodeAddr(l'), delay((k,v,l,t,l'),t')\n"
    "setEpoch(e,l',t') :- epochIn(e,l,t), nodeAddr(l'), delay((e,l,t,l'),t')\n"
    "}\n"
    "component node @ n {\n"
    "epochs(e,l,t) :- setEpoch(e,l,t)\n"
    "epochs(e,l,t') :- epochs(e,l,t), t'=t+1\n"
    "maxEpoch(max<e>,l,t) :- epochs(e,l,t)\n"
    "outPut(k,v,e,l',t') :- put(k,v,l,t), maxEpoch(e,l,t), client(l'), delay((k,v,e,l,t,l'),t')\n"
    "}\n";

}  // namespace

TEST_CASE("exact oracle: partial partitioning with a replicated epoch") {
  Program orig = parse_program(kEpochToy2);
  PartitionGroups groups{{"n", {"n1", "n2"}}};
  std::map<std::string, std::string> proxies{{"n", "nc"}};
  Program rewr =
      partial_partition(orig, "node", {0, 1, 2}, groups, proxies, {"in", "epochIn"})
          .program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 7;
  cfg.rewr_max_delay = 1;
  cfg.horizon = 14;
  RunSpec spec{{"in", "epochIn"}, {"outPut"}};
  std::vector<RunInput> inputs = {
      {"in", {S("k"), S("x")}, "f", 1},
      {"epochIn", {Value(int64_t(5))}, "f", 1}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, spec, cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}

TEST_CASE("exact oracle: partitioning a sealed snapshot output") {
  const char* toy =
      ".edb nodeAddr/1\n.edb collAddr/1\n.edb client/1\n"
      "nodeAddr(n)\ncollAddr(c)\nclient(cli)\n"
      ".input in/3\n.input epochIn/3\n"
      "component front @ f {\n"
      "put(k,l',t') :- in(k,l,t), nodeAddr(l'), delay((k,l,t,l'),t')\n"
      "snapReq(e,l',t') :- epochIn(e,l,t), nodeAddr(l'), delay((e,l,t,l'),t')\n"
      "}\n"
      "component node @ n {\n"
      "reqs(e,l,t) :- snapReq(e,l,t)\n"
      "reqs(e,l,t') :- reqs(e,l,t), t'=t+1\n"
      "store(k,l,t') :- put(k,l,t), t'=t+1\n"
      "store(k,l,t') :- store(k,l,t), t'=t+1\n"
      "snap(seal<store>,e,l',t') :- snapReq(e,l,t), store(k,l,t), collAddr(l'), delay((e,l,t,l'),t')\n"
      "}\n"
      "component coll @ c {\n"
      "got(k,e,l,t) :- snap(k,e,l,t)\n"
      "outSnap(k,e,l',t') :- got(k,e,l,t), client(l'), delay((k,e,l,t,l'),t')\n"
      "}\n";
  Program sugared = parse_program(toy);
  RewriteResult des = desugar_seal(sugared);
  Program orig = des.program;  // the desugared program is the runnable baseline

  PartitionGroups groups{{"n", {"n1", "n2"}}};
  std::map<std::string, std::string> proxies{{"n", "nc"}};
  RewriteResult part = partial_partition(orig, "node", {0, 1}, groups, proxies,
                                         {"in", "epochIn"});
  RewriteResult sealed = partition_sealed(part.program, "node", "snap",
                                          part.meta.at("sealed_input"));
  Program rewr = sealed.program;

  EquivalenceConfig cfg;
  cfg.orig_max_delay = 6;
  cfg.rewr_max_delay = 1;
  cfg.horizon = 14;
  RunSpec spec{{"in", "epochIn"}, {"outSnap"}};
  std::vector<RunInput> inputs = {{"in", {S("k1")}, "f", 1},
                                  {"epochIn", {Value(int64_t(7))}, "f", 2}};
  EquivalenceVerdict v = check_exact(orig, rewr, inputs, spec, cfg);
  CAPTURE(v.str());
  CHECK(v.equivalent);
}
