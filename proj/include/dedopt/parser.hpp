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

#ifndef DEDOPT_PARSER_HPP_
#define DEDOPT_PARSER_HPP_

#include <stdexcept>
#include <string>

#include "dedopt/ast.hpp"

namespace dedopt {

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line_, int col_, const std::string& msg)
      : std::runtime_error(std::to_string(line_) + ":" + std::to_string(col_) +
                           ": " + msg),
        line(line_),
        col(col_) {}
};

// Parses dialect source. Statements are newline-terminated; `#` starts a
// comment. Also resolves relations (declares IDB relations from rule heads)
// and classifies every rule. Throws ParseError on syntax errors, unknown
// relations, arity mismatches, and ill-formed space-time patterns.
Program parse_program(const std::string& text);

// Parses a `.facts` file (one `relation(v1,v2,...)` fact per line) and appends
// the facts to the program's EDB. Relations must be declared EDB-stored.
void parse_facts_into(Program& p, const std::string& text);

// Re-resolves relations and re-classifies all rules after an AST-level change.
// Same errors as parse_program.
void reanalyze(Program& p);

}  // namespace dedopt

#endif  // DEDOPT_PARSER_HPP_
