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

#ifndef DEDOPT_PRINTER_HPP_
#define DEDOPT_PRINTER_HPP_

#include <string>

#include "dedopt/ast.hpp"

namespace dedopt {

// Canonical source text; parse_program(pretty_print(p)) is structurally
// identical to p. This is the interchange format between pipeline stages.
std::string pretty_print(const Program& p);

std::string print_rule(const Rule& r);
std::string print_literal(const Literal& l);

// Structural program equality (the round-trip check).
bool programs_equal(const Program& a, const Program& b);

}  // namespace dedopt

#endif  // DEDOPT_PRINTER_HPP_
