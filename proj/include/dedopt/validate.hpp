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

#ifndef DEDOPT_VALIDATE_HPP_
#define DEDOPT_VALIDATE_HPP_

#include <string>
#include <vector>

#include "dedopt/ast.hpp"

namespace dedopt {

struct Violation {
  std::string component;
  int rule_index = -1;  // within the component, -1 for program-level
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string str() const;
};

// Classifies one rule as synchronous / sequential / asynchronous and fills the
// derived fields. Throws std::runtime_error on an ill-formed space-time
// pattern (head time unrelated to body time, delay present but head location
// equal to the body location variable, ...).
void classify_rule(Rule& r, const Program& p);

// Runs classify_rule over every rule and marks persistence rules. Failures
// are recorded on the rules (classify_ok / classify_err), not thrown.
void classify_rules(Program& p);

// Structural well-formedness: space-time constraints (1)-(3), aggregate and
// negation placement, EDB-functions never heads, range restriction, and no
// entanglement outside flagged attributes. Empty report iff well-formed.
ValidationReport check_well_formed(const Program& p);

}  // namespace dedopt

#endif  // DEDOPT_VALIDATE_HPP_
