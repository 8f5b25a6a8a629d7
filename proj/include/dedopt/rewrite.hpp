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

#ifndef DEDOPT_REWRITE_HPP_
#define DEDOPT_REWRITE_HPP_

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dedopt/analysis.hpp"
#include "dedopt/ast.hpp"

namespace dedopt {

struct RewriteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A decoupling plan: the listed rules move to a fresh component; the rest
// stay. One new address per home of the source component.
struct SplitPlan {
  std::string component;
  std::vector<int> move_rules;  // 0-based indices into the source rule list
  std::string new_component;
  std::vector<std::string> new_addrs;
};

struct RewriteResult {
  Program program;
  std::vector<std::string> generated_relations;
  std::vector<std::string> evidence;  // precondition verdicts used
  std::map<std::string, std::string> meta;  // names later rewrite steps need
};

// Client-facing channels that no rewrite may retarget or relocate.
using Protected = std::vector<std::string>;

// --- decoupling -------------------------------------------------------------

// Retargets every external producer of the component's referenced relations
// from the old home addresses to the new ones, then re-homes the component.
RewriteResult redirection(Program p, const std::string& component,
                          const std::vector<std::string>& new_addrs,
                          const Protected& prot = {});

RewriteResult decouple_mutually_independent(Program p, const SplitPlan& plan,
                                            const Protected& prot = {});
RewriteResult decouple_functional(Program p, const SplitPlan& plan,
                                  const Protected& prot = {});
RewriteResult decouple_monotonic(Program p, const SplitPlan& plan,
                                 MonotonicityMode mode, const Protected& prot = {});
RewriteResult decouple_state_machine(Program p, const SplitPlan& plan,
                                     const Protected& prot = {});
// The moved side feeds the stay-home side: batching plus acknowledgement-
// delayed outputs.
RewriteResult decouple_asymmetric(Program p, const SplitPlan& plan,
                                  MonotonicityMode mode, const Protected& prot = {});

// --- partitioning -----------------------------------------------------------

// Per old home address, the group of partition nodes replacing it.
using PartitionGroups = std::map<std::string, std::vector<std::string>>;

RewriteResult partition_cohash(Program p, const std::string& component,
                               const PartitionGroups& groups,
                               const Protected& prot = {});
RewriteResult partition_with_dependencies(Program p, const std::string& component,
                                          const PartitionGroups& groups,
                                          const Protected& prot = {});

// Rules listed in c1_rules reference the non-partitionable relations; their
// inputs are replicated through a generated per-home coordinator proxy.
RewriteResult partial_partition(Program p, const std::string& component,
                                const std::vector<int>& c1_rules,
                                const PartitionGroups& groups,
                                const std::map<std::string, std::string>& proxies,
                                const Protected& prot = {});

// --- sealing ----------------------------------------------------------------

// Expands every seal<> head into the counting/send/receive machinery and
// records the generated names in the program's seal info table.
RewriteResult desugar_seal(Program p);

// After partial partitioning: each partition sends its own fraction of a
// sealed output; the receiver recombines counts from all partitions.
// sealed_input names the rSealed alias of the replicated input (from the
// partial_partition meta).
RewriteResult partition_sealed(Program p, const std::string& component,
                               const std::string& out_relation,
                               const std::string& sealed_input);

// --- internal helpers shared by the rewrite implementations ------------------
namespace rewrite_detail {

Term V(const std::string& v);
Term C(Value v);
Literal mklit(const std::string& rel, std::vector<Term> terms, bool neg = false);
Literal mkdelay(std::vector<Term> inputs, const std::string& out_var);
Rule mkrule(Literal head, std::vector<Literal> lits, std::vector<Constraint> cons);
Constraint succ(const std::string& next, const std::string& cur);
Constraint cmp(const std::string& lhs, const std::string& op,
               std::vector<ExprAtom> rhs);
ExprAtom av(const std::string& v);
ExprAtom an(int64_t n);

// Adds a 1-in/1-out forwardmap EDB function mapping each old home to the
// matching new address (identity elsewhere).
std::string add_forward_fn(Program& p, const std::vector<std::string>& from,
                           const std::vector<std::string>& to,
                           std::vector<std::string>& generated);

// Retargets asynchronous producers of `rels` outside `exclude` components:
// head location goes through the forward function.
void retarget_producers(Program& p, const std::vector<std::string>& rels,
                        const std::string& fwd_fn,
                        const std::vector<std::string>& exclude);

// Renames references (body literals) of `from` to `to` in a rule set.
void replace_refs(std::vector<Rule>& rules, const std::string& from,
                  const std::string& to);

// Flags entangled ordinary attributes of a generated rule's head.
void flag_spacetime(Program& p, const Rule& r);

}  // namespace rewrite_detail

}  // namespace dedopt

#endif  // DEDOPT_REWRITE_HPP_
