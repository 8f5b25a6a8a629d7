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

#ifndef DEDOPT_EQUIVALENCE_HPP_
#define DEDOPT_EQUIVALENCE_HPP_

#include <set>
#include <string>
#include <vector>

#include "dedopt/eval.hpp"

namespace dedopt {

// Input send times and output arrival times, projected from a run. The
// destination is part of an output record unless the relation is listed in
// ignore_dest (a rewrite may legitimately change internal addresses).
struct ObservableHistory {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string canonical() const;      // sorted, timestamps included
  std::string content_only() const;   // outputs deduplicated, timestamps erased
};

ObservableHistory observable(const History& h, const RunSpec& spec,
                             const std::set<std::string>& ignore_dest = {});

struct EquivalenceConfig {
  int orig_max_delay = 3;
  int rewr_max_delay = 2;
  int64_t horizon = 12;
  long schedule_limit = 200000;
  int sample_seeds = 100;
  std::set<std::string> ignore_dest;
};

struct Counterexample {
  std::string rewritten_schedule;  // key=arrival;... explicit table
  std::string original_schedule;   // a representative original run
  std::string differing;           // record with no original counterpart
  uint64_t orig_hash = 0;
  uint64_t rewr_hash = 0;
};

struct EquivalenceVerdict {
  std::string mode;  // "exact-history" or "eventual-content"
  bool equivalent = false;
  std::string error;  // limit exceeded / not confluent / non-quiescent
  long original_runs = 0;
  long rewritten_runs = 0;
  bool sampled = false;  // rewritten side sampled instead of enumerated
  Counterexample cex;
  std::string str() const;
};

// Brute-force oracle: every enumerated schedule of the rewritten program must
// produce an observable history some enumerated original schedule produces.
EquivalenceVerdict check_exact(const Program& orig, const Program& rewr,
                               const std::vector<RunInput>& inputs,
                               const RunSpec& spec, const EquivalenceConfig& cfg);

// Eventual content: the original must be output-confluent over sampled
// schedules; the rewritten program must reach the same quiescent output
// content on every sampled schedule.
EquivalenceVerdict check_eventual(const Program& orig, const Program& rewr,
                                  const std::vector<RunInput>& inputs,
                                  const RunSpec& spec, int seeds, int max_delay,
                                  int64_t horizon,
                                  const std::set<std::string>& ignore_dest = {});

// Deterministic reproduction of both runs of a counterexample.
std::pair<History, History> replay(const Counterexample& cex, const Program& orig,
                                   const Program& rewr,
                                   const std::vector<RunInput>& inputs,
                                   const RunSpec& spec, int64_t horizon);

uint64_t program_hash(const Program& p);
std::string serialize_schedule(const DelaySchedule& s);
DelaySchedule deserialize_schedule(const std::string& text);

}  // namespace dedopt

#endif  // DEDOPT_EQUIVALENCE_HPP_
