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

#ifndef DEDOPT_RUNCONFIG_HPP_
#define DEDOPT_RUNCONFIG_HPP_

#include <string>
#include <vector>

#include "dedopt/equivalence.hpp"
#include "dedopt/eval.hpp"
#include "dedopt/rewrite.hpp"

namespace dedopt {

// Run configuration: inputs with injection times, schedule parameters,
// horizon, designated input/output relations, protected client channels, and
// the equivalence knobs. Destinations of the form "@component" resolve to the
// component's (single) home address at run time.
struct RunConfig {
  std::vector<RunInput> inputs;
  std::string schedule_mode = "seeded";  // seeded | enumerate | table
  uint64_t seed = 1;
  int max_delay = 2;
  int64_t horizon = 16;
  RunSpec spec;
  Protected protected_channels;

  // equivalence configuration
  std::string check_mode = "eventual";  // exact | eventual
  int seeds = 100;
  int orig_max_delay = 3;
  int rewr_max_delay = 2;
  long schedule_limit = 200000;
  std::vector<std::string> ignore_dest;
};

RunConfig load_run_config(const std::string& json_text);

// Resolves "@component" destinations against the program.
std::vector<RunInput> resolve_inputs(const RunConfig& cfg, const Program& p);

// A rewrite plan: an ordered list of steps applied sequentially.
struct PlanStep {
  std::string raw_json;
  std::string kind;
};

struct Plan {
  std::vector<std::string> steps;  // one JSON object per step
};

Plan load_plan(const std::string& json_text);

// Applies one step; `meta` carries names generated by earlier steps (e.g. the
// sealed-input alias from partial partitioning).
RewriteResult apply_plan_step(Program p, const std::string& step_json,
                              const Protected& prot,
                              std::map<std::string, std::string>& meta);

// Applies all steps; returns the program after each step.
std::vector<Program> apply_plan(Program p, const Plan& plan, const Protected& prot);

}  // namespace dedopt

#endif  // DEDOPT_RUNCONFIG_HPP_
