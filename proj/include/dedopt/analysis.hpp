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

#ifndef DEDOPT_ANALYSIS_HPP_
#define DEDOPT_ANALYSIS_HPP_

#include <string>
#include <vector>

#include "dedopt/ast.hpp"

namespace dedopt {

class Instance;

// ---------------------------------------------------------------------------
// Signatures and rewrite preconditions
// ---------------------------------------------------------------------------

struct ComponentSignature {
  std::vector<std::string> referenced;  // IDB relations in rule bodies
  std::vector<std::string> heads;
  std::vector<std::string> inputs;   // referenced \ heads
  std::vector<std::string> outputs;  // heads \ referenced
};

ComponentSignature signature(const Component& c, const Program& p);

struct Verdict {
  bool ok = false;
  std::vector<std::string> reasons;  // witnesses for a negative verdict
  explicit operator bool() const { return ok; }
  std::string str() const;
};

// C1 is independent of C2: (a) reference sets are disjoint and (b) C1 does
// not reference an output of C2.
Verdict is_independent(const Component& c1, const Component& c2, const Program& p);
Verdict is_mutually_independent(const Component& c1, const Component& c2,
                                const Program& p);

// Precondition form used by forwarding-based decouplings: C2's inputs will be
// renamed to forwarded copies, so shared references to relations C2 merely
// consumes are fine. What matters is that C1 reads nothing C2 derives.
Verdict is_independent_for_forwarding(const Component& c1, const Component& c2,
                                      const Program& p);

enum class MonotonicityMode { Strict, Relaxed };

Verdict is_monotonic(const Component& c, const Program& p, MonotonicityMode mode);
Verdict is_functional(const Component& c, const Program& p);

// Conservative dependency tests behind the state-machine check.
bool existence_dependency(const std::string& rel,
                          const std::vector<std::string>& inputs,
                          const Component& c, const Program& p);
bool no_change_dependency(const std::string& rel,
                          const std::vector<std::string>& inputs,
                          const Component& c, const Program& p);

Verdict is_state_machine(const Component& c, const Program& p);

// Assembles a hypothetical component from a rule subset of src (for split
// planning). Indices are 0-based into src.rules.
Component make_split(const Component& src, const std::vector<int>& rule_indices,
                     const std::string& name);

// ---------------------------------------------------------------------------
// Functional and co-partition dependencies
// ---------------------------------------------------------------------------

// Function tag attached to a dependency: a composition of named builtins
// applied innermost-first; empty = identity; opaque tags are usable for
// equality reasoning but not for computing partition keys.
struct FnChain {
  bool opaque = false;
  std::vector<std::string> fns;
  bool identity() const { return !opaque && fns.empty(); }
  bool computable() const { return !opaque; }
  std::string str() const;
  bool operator==(const FnChain& o) const { return opaque == o.opaque && fns == o.fns; }
  bool operator<(const FnChain& o) const {
    if (opaque != o.opaque) return o.opaque;
    return fns < o.fns;
  }
};

// range = fn(domain) on every fact of `relation`.
struct FunctionalDependency {
  std::string relation;
  int domain = 0;
  int range = 0;
  FnChain fn;
};

// For any two facts f1 in `from`, f2 in `to` sharing a proof tree:
// pi_{to_attr}(f2) = fn(pi_{from_attr}(f1)).
struct CoPartitionDependency {
  std::string from;
  int from_attr = 0;
  std::string to;
  int to_attr = 0;
  FnChain fn;
};

struct DependencySet {
  std::vector<FunctionalDependency> fds;
  std::vector<CoPartitionDependency> cds;

  bool has_fd(const std::string& rel, int domain, int range,
              const FnChain* fn = nullptr) const;
  bool has_cd(const std::string& from, int fa, const std::string& to, int ta) const;
  std::string str() const;
};

DependencySet infer_dependencies(const Program& p);

// ---------------------------------------------------------------------------
// Distribution policies
// ---------------------------------------------------------------------------

struct PolicyEntry {
  std::string relation;
  int key_attr = 0;
  FnChain via;  // canonical key = via(pi_key(f))
};

struct DistributionPolicy {
  std::vector<PolicyEntry> entries;
  std::vector<std::string> nodes;
  std::string mode;  // "cohash" or "cohash+cd"

  const PolicyEntry* entry_for(const std::string& rel) const;
  // The node a fact of `rel` with this payload routes to.
  std::string route(const Program& p, const std::string& rel, const Tuple& payload) const;
};

enum class PolicyMode { CoHash, CoHashCd };

struct PolicySearchResult {
  bool ok = false;
  DistributionPolicy policy;
  std::string blocking_rule;  // pretty-printed rule that prevents a policy
  std::string blocking_pair;  // the two relations with no shared key / CD path
};

// Searches for a distribution policy over every relation the component's
// rules touch (minus `replicated`, which will be copied to all nodes).
// Deterministic: candidates are tried lexicographically.
PolicySearchResult find_distribution_policy(const Component& c, const Program& p,
                                            const DependencySet& deps,
                                            const std::vector<std::string>& nodes,
                                            PolicyMode mode,
                                            const std::vector<std::string>& replicated = {});

// Parallel disjoint correctness over a materialized run: facts of covered
// relations within one proof tree all route to the same node. Returns an
// empty string when the check passes, else a description of the offending
// tree.
std::string check_parallel_disjoint(const Instance& inst, const Program& p,
                                    const DistributionPolicy& policy);

}  // namespace dedopt

#endif  // DEDOPT_ANALYSIS_HPP_
