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

#include "dedopt/runconfig.hpp"

#include <algorithm>

#include <json.hpp>

namespace dedopt {

using nlohmann::json;

namespace {

Value json_value(const json& j) {
  if (j.is_number_integer()) return Value(j.get<int64_t>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw std::runtime_error("config values must be integers or strings");
}

std::vector<std::string> str_list(const json& j) {
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(e.get<std::string>());
  return out;
}

}  // namespace

RunConfig load_run_config(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;
  for (const auto& in : j.value("inputs", json::array())) {
    RunInput ri;
    ri.relation = in.at("relation").get<std::string>();
    for (const auto& v : in.at("values")) ri.payload.push_back(json_value(v));
    ri.dest = in.at("dest").get<std::string>();
    ri.time = in.at("time").get<int64_t>();
    cfg.inputs.push_back(std::move(ri));
  }
  cfg.schedule_mode = j.value("schedule", std::string("seeded"));
  cfg.seed = j.value("seed", 1u);
  cfg.max_delay = j.value("max_delay", 2);
  cfg.horizon = j.value("horizon", 16);
  cfg.spec.input_relations = str_list(j.value("input_relations", json::array()));
  cfg.spec.output_relations = str_list(j.value("output_relations", json::array()));
  cfg.protected_channels = str_list(j.value("protected", json::array()));
  cfg.check_mode = j.value("check", std::string("eventual"));
  cfg.seeds = j.value("seeds", 100);
  cfg.orig_max_delay = j.value("orig_max_delay", 3);
  cfg.rewr_max_delay = j.value("rewr_max_delay", 2);
  cfg.schedule_limit = j.value("schedule_limit", 200000L);
  cfg.ignore_dest = str_list(j.value("ignore_dest", json::array()));
  return cfg;
}

std::vector<RunInput> resolve_inputs(const RunConfig& cfg, const Program& p) {
  std::vector<RunInput> out = cfg.inputs;
  for (auto& in : out) {
    if (in.dest.rfind('@', 0) != 0) continue;
    const Component* c = p.find_component(in.dest.substr(1));
    if (!c) throw std::runtime_error("no component for destination " + in.dest);
    if (c->homes.size() != 1)
      throw std::runtime_error("destination " + in.dest +
                               " is ambiguous (multiple homes)");
    in.dest = c->homes[0];
  }
  return out;
}

Plan load_plan(const std::string& text) {
  json j = json::parse(text);
  Plan plan;
  for (const auto& step : j.at("steps")) plan.steps.push_back(step.dump());
  return plan;
}

RewriteResult apply_plan_step(Program p, const std::string& step_json,
                              const Protected& prot,
                              std::map<std::string, std::string>& meta) {
  json j = json::parse(step_json);
  std::string kind = j.at("rewrite").get<std::string>();

  auto split_plan = [&]() {
    SplitPlan sp;
    sp.component = j.at("component").get<std::string>();
    if (j.contains("move")) {
      for (const auto& i : j.at("move")) sp.move_rules.push_back(i.get<int>());
    } else {
      // select rules by head relation name
      const Component* c = p.find_component(sp.component);
      if (!c) throw RewriteError("no component '" + sp.component + "'");
      std::vector<std::string> heads = str_list(j.at("move_heads"));
      for (size_t i = 0; i < c->rules.size(); ++i)
        if (std::find(heads.begin(), heads.end(), c->rules[i].head.relation) !=
            heads.end())
          sp.move_rules.push_back(static_cast<int>(i));
    }
    sp.new_component = j.at("new_component").get<std::string>();
    sp.new_addrs = str_list(j.at("new_addrs"));
    return sp;
  };
  auto groups_of = [&]() {
    PartitionGroups g;
    for (const auto& [k, v] : j.at("groups").items()) g[k] = str_list(v);
    return g;
  };
  auto mode_of = [&]() {
    return j.value("mode", std::string("strict")) == "relaxed"
               ? MonotonicityMode::Relaxed
               : MonotonicityMode::Strict;
  };

  RewriteResult res;
  if (kind == "desugar_seal") {
    res = desugar_seal(std::move(p));
  } else if (kind == "redirection") {
    res = redirection(std::move(p), j.at("component").get<std::string>(),
                      str_list(j.at("new_addrs")), prot);
  } else if (kind == "mutual") {
    res = decouple_mutually_independent(std::move(p), split_plan(), prot);
  } else if (kind == "functional") {
    res = decouple_functional(std::move(p), split_plan(), prot);
  } else if (kind == "monotonic") {
    res = decouple_monotonic(std::move(p), split_plan(), mode_of(), prot);
  } else if (kind == "state_machine") {
    res = decouple_state_machine(std::move(p), split_plan(), prot);
  } else if (kind == "asymmetric") {
    res = decouple_asymmetric(std::move(p), split_plan(), mode_of(), prot);
  } else if (kind == "partition_cohash") {
    res = partition_cohash(std::move(p), j.at("component").get<std::string>(),
                           groups_of(), prot);
  } else if (kind == "partition_cd") {
    res = partition_with_dependencies(
        std::move(p), j.at("component").get<std::string>(), groups_of(), prot);
  } else if (kind == "partial_partition") {
    std::vector<int> c1;
    if (j.contains("c1_rules")) {
      for (const auto& i : j.at("c1_rules")) c1.push_back(i.get<int>());
    } else {
      const Component* c = p.find_component(j.at("component").get<std::string>());
      if (!c) throw RewriteError("no such component");
      std::vector<std::string> heads = str_list(j.at("c1_heads"));
      for (size_t i = 0; i < c->rules.size(); ++i)
        if (std::find(heads.begin(), heads.end(), c->rules[i].head.relation) !=
            heads.end())
          c1.push_back(static_cast<int>(i));
    }
    std::map<std::string, std::string> proxies;
    for (const auto& [k, v] : j.at("proxies").items())
      proxies[k] = v.get<std::string>();
    res = partial_partition(std::move(p), j.at("component").get<std::string>(), c1,
                            groups_of(), proxies, prot);
  } else if (kind == "partition_sealed") {
    std::string sealed_input = j.value("sealed_input", std::string());
    if (sealed_input.empty()) {
      auto it = meta.find("sealed_input");
      if (it == meta.end())
        throw RewriteError("partition_sealed needs a sealed_input (none recorded)");
      sealed_input = it->second;
    }
    res = partition_sealed(std::move(p), j.at("component").get<std::string>(),
                           j.at("out").get<std::string>(), sealed_input);
  } else {
    throw RewriteError("unknown rewrite kind '" + kind + "'");
  }
  for (const auto& [k, v] : res.meta) meta[k] = v;
  return res;
}

std::vector<Program> apply_plan(Program p, const Plan& plan, const Protected& prot) {
  std::vector<Program> out;
  std::map<std::string, std::string> meta;
  for (const auto& step : plan.steps) {
    RewriteResult res = apply_plan_step(std::move(p), step, prot, meta);
    p = res.program;
    out.push_back(p);
  }
  return out;
}

}  // namespace dedopt
