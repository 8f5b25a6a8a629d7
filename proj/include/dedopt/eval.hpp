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

#ifndef DEDOPT_EVAL_HPP_
#define DEDOPT_EVAL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dedopt/ast.hpp"

namespace dedopt {

// ---------------------------------------------------------------------------
// Delay schedules
// ---------------------------------------------------------------------------

// Identity of one asynchronous send event. The delay input tuple distinguishes
// head facts; the send time separates re-derivations of persisted facts.
struct MessageKey {
  int comp = 0;
  int rule = 0;
  Tuple delay_input;
  std::string dest;
  int64_t send_time = 0;
  std::string str() const;
};

// Deterministic assignment of arrival times to send events. Every arrival
// strictly exceeds the send time. The `used` table records the assignment
// actually consumed by a run, which makes any run replayable as an explicit
// table.
class DelaySchedule {
 public:
  enum class Mode { SeededRandom, Enumerated, ExplicitTable };

  static DelaySchedule seeded(uint64_t seed, int max_delay);
  static DelaySchedule table(std::map<std::string, int64_t> arrivals);
  static DelaySchedule enumerated(int max_delay);

  int64_t arrival(const MessageKey& k);

  // Resets the run-local cursor; call before every run.
  void begin_run();

  // Enumerated mode: advance to the next assignment in the enumeration order.
  // Returns false when the space is exhausted.
  bool next_assignment();

  Mode mode = Mode::SeededRandom;
  uint64_t seed = 0;
  int max_delay = 1;
  std::map<std::string, int64_t> explicit_arrivals;
  std::vector<std::pair<std::string, int>> choices;  // enumeration prefix
  size_t cursor = 0;
  std::map<std::string, int64_t> used;
};

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct Derivation {
  int comp = -1;              // -1 for injected inputs
  int rule = -1;
  std::vector<int> body;      // fact ids
  int64_t derived_at = 0;     // body timestep (send time for async heads)
};

class Instance {
 public:
  struct FactRec {
    int rel;           // index into program.relations
    Tuple payload;     // ordinary attributes (full tuple for EDB)
    std::string loc;   // empty for EDB
    int64_t time = 0;  // meaningless for EDB
    Value loc_v;       // interpreter views of loc/time
    Value time_v;
  };

  using RelIds = std::map<std::string, int>;

  explicit Instance(const Program& p,
                    std::shared_ptr<const RelIds> shared_ids = nullptr);

  int rel_id(const std::string& name) const;
  const std::string& rel_name(int id) const;

  // Returns the fact id; inserts if absent (set semantics).
  int add_idb(int rel, Tuple payload, const std::string& loc, int64_t time,
              bool* inserted = nullptr);
  int add_edb(int rel, Tuple vals);
  void add_derivation(int fact, Derivation d);

  bool has_idb(int rel, const Tuple& payload, const std::string& loc,
               int64_t time) const;
  const std::vector<int>& idb_at(int rel, const std::string& loc, int64_t time) const;
  const std::vector<int>& idb_at(int rel, int loc_id, int64_t time) const;
  const std::vector<int>& edb_of(int rel) const;
  // interned location id; -1 if the location was never materialized
  int loc_id(const std::string& loc) const;

  const std::vector<FactRec>& facts() const { return facts_; }
  const std::vector<std::vector<Derivation>>& provenance() const { return prov_; }

  // All (loc, time) cells materialized for a relation.
  std::vector<std::pair<std::string, int64_t>> cells(int rel) const;

  // Canonical line-oriented dump of all facts (sorted); for determinism checks.
  std::string canonical() const;

 private:
  const Program* prog_;
  std::shared_ptr<const RelIds> rel_ids_;
  std::map<std::string, int> loc_ids_;
  std::vector<FactRec> facts_;
  std::vector<std::vector<Derivation>> prov_;
  std::map<uint64_t, std::vector<int>> index_;  // fact hash → candidate ids
  std::map<std::tuple<int, int, int64_t>, std::vector<int>> idb_;
  std::map<int, std::vector<int>> edb_;
};

// ---------------------------------------------------------------------------
// Histories and runs
// ---------------------------------------------------------------------------

struct IORecord {
  bool is_input = false;
  std::string relation;
  Tuple payload;
  std::string dest;
  int64_t send = 0;
  int64_t arrival = 0;
};

struct History {
  std::vector<IORecord> records;
  bool truncated = false;
  // Canonical line-oriented text, sorted by arrival, relation, values.
  std::string canonical() const;
};

struct RunInput {
  std::string relation;
  Tuple payload;
  std::string dest;
  int64_t time = 0;
};

struct RunSpec {
  std::vector<std::string> input_relations;
  std::vector<std::string> output_relations;
};

struct RunResult {
  Instance instance;
  History history;
  bool truncated = false;
  int64_t quiesced_at = -1;  // first tick of sustained quiescence, -1 if none
};

// Evaluates one EDB-function tuple: true when the inputs are in the function
// relation (outputs filled). Shared by the interpreter and policy routing.
bool eval_builtin_function(const Relation& rel, const Tuple& inputs, Tuple& outputs);

// One immediate-consequence evaluation of a rule at (loc, t). Returns derived
// head facts; asynchronous heads consult the schedule for arrival time and
// destination. Used directly by tests and by the run loop.
struct DerivedFact {
  Tuple payload;
  std::string loc;
  int64_t time = 0;
  std::vector<int> body;  // supporting fact ids
};
std::vector<DerivedFact> immediate_consequence(const Program& p, int comp, int rule,
                                               const Instance& inst,
                                               const std::string& loc, int64_t t,
                                               DelaySchedule* sched);

// Executes all nodes in lockstep over a shared virtual clock up to horizon.
// Deterministic for a fixed (program, inputs, schedule).
RunResult run(const Program& p, const std::vector<RunInput>& inputs,
              DelaySchedule& sched, int64_t horizon, const RunSpec& spec);

// ---------------------------------------------------------------------------
// Stratification (within-timestep)
// ---------------------------------------------------------------------------

struct Strata {
  std::map<std::string, int> stratum;
  int count = 0;
};

// Assigns every relation a stratum such that each aggregation/negation edge of
// a synchronous rule strictly increases the stratum. Cycles through sequential
// or asynchronous rules are unconstrained. Throws on a same-timestep cycle
// crossing an aggregation/negation edge.
Strata stratify(const Program& p);

// Caches program-derived tables (strata, rule groupings, relation ids) so
// repeated runs of one program (schedule enumeration, seed sweeps) skip the
// per-run setup.
class Runner {
 public:
  explicit Runner(const Program& p);
  RunResult run(const std::vector<RunInput>& inputs, DelaySchedule& sched,
                int64_t horizon, const RunSpec& spec) const;

 private:
  const Program& p_;
  Strata strata_;
  std::map<std::string, int> node_comp_;
  std::vector<std::vector<std::vector<int>>> sync_rules_;
  std::shared_ptr<const Instance::RelIds> rel_ids_;
};

}  // namespace dedopt

#endif  // DEDOPT_EVAL_HPP_
