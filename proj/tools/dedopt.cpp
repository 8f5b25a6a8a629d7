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

// Command-line driver: check / analyze / rewrite / simulate / verify.
// Exit codes: 0 ok, 1 property violation, 2 usage or IO error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dedopt/analysis.hpp"
#include "dedopt/equivalence.hpp"
#include "dedopt/parser.hpp"
#include "dedopt/printer.hpp"
#include "dedopt/rewrite.hpp"
#include "dedopt/runconfig.hpp"
#include "dedopt/validate.hpp"

using namespace dedopt;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Program load_program(const std::string& path, const std::string& facts) {
  Program p = parse_program(slurp(path));
  if (!facts.empty()) parse_facts_into(p, slurp(facts));
  return p;
}

void emit_report(const std::string& out, const json& j) {
  if (out.empty()) return;
  std::ofstream f(out, std::ios::app);
  f << j.dump() << "\n";
}

bool uses_seal(const Program& p) {
  for (const auto& c : p.components)
    for (const auto& r : c.rules)
      for (const auto& t : r.head.terms)
        if (t.kind == TermKind::Agg && t.agg_fn == "seal") return true;
  return false;
}

int cmd_check(const std::string& path, const std::string& facts,
              const std::string& report) {
  Program p = load_program(path, facts);
  ValidationReport rep = check_well_formed(p);
  json j = {{"command", "check"}, {"program", path}, {"ok", rep.ok()}};
  json viol = json::array();
  for (const auto& v : rep.violations)
    viol.push_back({{"component", v.component}, {"rule", v.rule_index + 1},
                    {"what", v.what}});
  j["violations"] = viol;
  emit_report(report, j);
  if (rep.ok()) {
    std::cout << "ok: " << path << " is well-formed ("
              << p.components.size() << " components)\n";
    return 0;
  }
  std::cout << rep.str();
  return 1;
}

int cmd_analyze(const std::string& path, const std::string& facts,
                const std::string& component, const std::string& report) {
  Program p = load_program(path, facts);
  DependencySet deps = infer_dependencies(p);
  json j = {{"command", "analyze"}, {"program", path}};
  json comps = json::array();
  for (const auto& c : p.components) {
    if (!component.empty() && c.name != component) continue;
    ComponentSignature sig = signature(c, p);
    Verdict mono_s = is_monotonic(c, p, MonotonicityMode::Strict);
    Verdict mono_r = is_monotonic(c, p, MonotonicityMode::Relaxed);
    Verdict fn = is_functional(c, p);
    Verdict sm = is_state_machine(c, p);
    std::cout << "component " << c.name << "\n";
    auto show = [](const char* what, const std::vector<std::string>& v) {
      std::cout << "  " << what << ":";
      for (const auto& r : v) std::cout << " " << r;
      std::cout << "\n";
    };
    show("references", sig.referenced);
    show("inputs", sig.inputs);
    show("outputs", sig.outputs);
    std::cout << "  monotonic (strict):  " << mono_s.str() << "\n";
    std::cout << "  monotonic (relaxed): " << mono_r.str() << "\n";
    std::cout << "  functional:          " << fn.str() << "\n";
    std::cout << "  state machine:       " << sm.str() << "\n";
    comps.push_back({{"name", c.name},
                     {"references", sig.referenced},
                     {"inputs", sig.inputs},
                     {"outputs", sig.outputs},
                     {"monotonic_strict", mono_s.ok},
                     {"monotonic_relaxed", mono_r.ok},
                     {"functional", fn.ok},
                     {"state_machine", sm.ok}});
  }
  std::cout << deps.str();
  j["components"] = comps;
  json fds = json::array();
  for (const auto& fd : deps.fds)
    fds.push_back({{"relation", fd.relation}, {"domain", fd.domain + 1},
                   {"range", fd.range + 1}, {"fn", fd.fn.str()}});
  j["fds"] = fds;
  emit_report(report, j);
  return 0;
}

int cmd_rewrite(const std::string& path, const std::string& facts,
                const std::string& plan_path, const std::string& out_dir,
                const std::vector<std::string>& prot, const std::string& report) {
  Program p = load_program(path, facts);
  Plan plan = load_plan(slurp(plan_path));
  std::map<std::string, std::string> meta;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  json j = {{"command", "rewrite"}, {"program", path}, {"plan", plan_path}};
  json steps = json::array();
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    RewriteResult res = apply_plan_step(std::move(p), plan.steps[i], prot, meta);
    p = res.program;
    std::string name = "step" + std::to_string(i + 1) + ".dl";
    std::string out = (out_dir.empty() ? name : out_dir + "/" + name);
    std::ofstream f(out);
    f << pretty_print(p);
    std::cout << "step " << i + 1 << " -> " << out << "\n";
    for (const auto& e : res.evidence) std::cout << "  " << e << "\n";
    steps.push_back({{"file", out}, {"evidence", res.evidence},
                     {"generated", res.generated_relations}});
  }
  j["steps"] = steps;
  emit_report(report, j);
  return 0;
}

int cmd_simulate(const std::string& path, const std::string& facts,
                 const std::string& config_path, const std::string& out,
                 uint64_t seed_override, bool have_seed,
                 const std::string& report) {
  Program p = load_program(path, facts);
  if (uses_seal(p)) {
    // sealed sugar has no direct execution semantics
    RewriteResult des = desugar_seal(std::move(p));
    p = des.program;
  }
  RunConfig cfg = load_run_config(slurp(config_path));
  if (have_seed) cfg.seed = seed_override;
  auto inputs = resolve_inputs(cfg, p);
  DelaySchedule sched = cfg.schedule_mode == "enumerate"
                            ? DelaySchedule::enumerated(cfg.max_delay)
                            : DelaySchedule::seeded(cfg.seed, cfg.max_delay);
  RunResult res = run(p, inputs, sched, cfg.horizon, cfg.spec);
  std::string text = res.history.canonical();
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    f << text;
    std::cout << "history -> " << out << (res.truncated ? " (truncated)" : "")
              << "\n";
  }
  emit_report(report, json{{"command", "simulate"},
                           {"program", path},
                           {"seed", cfg.seed},
                           {"truncated", res.truncated},
                           {"quiesced_at", res.quiesced_at},
                           {"records", res.history.records.size()}});
  return 0;
}

int cmd_verify(const std::string& orig_path, const std::string& rewr_path,
               const std::string& facts, const std::string& config_path,
               const std::string& report) {
  Program orig = load_program(orig_path, facts);
  Program rewr = load_program(rewr_path, facts);
  for (Program* q : {&orig, &rewr}) {
    if (uses_seal(*q)) {
      RewriteResult des = desugar_seal(std::move(*q));
      *q = des.program;
    }
  }
  RunConfig cfg = load_run_config(slurp(config_path));
  auto inputs = resolve_inputs(cfg, orig);
  std::set<std::string> ignore(cfg.ignore_dest.begin(), cfg.ignore_dest.end());

  EquivalenceVerdict v;
  if (cfg.check_mode == "exact") {
    EquivalenceConfig ec;
    ec.orig_max_delay = cfg.orig_max_delay;
    ec.rewr_max_delay = cfg.rewr_max_delay;
    ec.horizon = cfg.horizon;
    ec.schedule_limit = cfg.schedule_limit;
    ec.sample_seeds = cfg.seeds;
    ec.ignore_dest = ignore;
    v = check_exact(orig, rewr, inputs, cfg.spec, ec);
  } else {
    v = check_eventual(orig, rewr, inputs, cfg.spec, cfg.seeds, cfg.max_delay,
                       cfg.horizon, ignore);
  }
  std::cout << v.str() << "\n";
  json j = {{"command", "verify"},        {"original", orig_path},
            {"rewritten", rewr_path},     {"mode", v.mode},
            {"equivalent", v.equivalent}, {"error", v.error},
            {"original_runs", v.original_runs},
            {"rewritten_runs", v.rewritten_runs},
            {"sampled", v.sampled}};
  if (!v.equivalent) {
    j["counterexample"] = {{"differing", v.cex.differing},
                           {"rewritten_schedule", v.cex.rewritten_schedule},
                           {"original_schedule", v.cex.original_schedule}};
  }
  emit_report(report, j);
  return v.equivalent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rule-driven optimizer for distributed protocols in a "
               "spatiotemporal Datalog dialect"};
  app.require_subcommand(1);

  std::string program, facts, component, plan, out_dir, config, out, rewritten;
  std::string report;
  uint64_t seed = 0;

  auto* check = app.add_subcommand("check", "parse and validate a program");
  check->add_option("program", program)->required();
  check->add_option("--facts", facts);
  check->add_option("--report", report);

  auto* analyze =
      app.add_subcommand("analyze", "signatures and rewrite preconditions");
  analyze->add_option("program", program)->required();
  analyze->add_option("--facts", facts);
  analyze->add_option("--component", component);
  analyze->add_option("--report", report);

  auto* rewrite = app.add_subcommand("rewrite", "apply a rewrite plan");
  rewrite->add_option("program", program)->required();
  rewrite->add_option("--plan", plan)->required();
  rewrite->add_option("--facts", facts);
  rewrite->add_option("--out-dir", out_dir);
  std::vector<std::string> prot;
  rewrite->add_option("--protect", prot);
  rewrite->add_option("--report", report);

  auto* simulate = app.add_subcommand("simulate", "run under a delay schedule");
  simulate->add_option("program", program)->required();
  simulate->add_option("--config", config)->required();
  simulate->add_option("--facts", facts);
  simulate->add_option("--out", out);
  auto* seed_opt = simulate->add_option("--seed", seed);
  simulate->add_option("--report", report);

  auto* verify =
      app.add_subcommand("verify", "equivalence of original and rewritten");
  verify->add_option("original", program)->required();
  verify->add_option("rewritten", rewritten)->required();
  verify->add_option("--config", config)->required();
  verify->add_option("--facts", facts);
  verify->add_option("--report", report);

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(program, facts, report);
    if (analyze->parsed()) return cmd_analyze(program, facts, component, report);
    if (rewrite->parsed())
      return cmd_rewrite(program, facts, plan, out_dir, prot, report);
    if (simulate->parsed())
      return cmd_simulate(program, facts, config, out, seed,
                          seed_opt->count() > 0, report);
    if (verify->parsed())
      return cmd_verify(program, rewritten, facts, config, report);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const RewriteError& e) {
    std::cerr << "rewrite refused: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
