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

#include "dedopt/equivalence.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "dedopt/printer.hpp"

namespace dedopt {

std::string ObservableHistory::canonical() const {
  std::vector<std::string> lines;
  for (const auto& s : inputs) lines.push_back("in  " + s);
  for (const auto& s : outputs) lines.push_back("out " + s);
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string ObservableHistory::content_only() const {
  std::vector<std::string> lines;
  for (const auto& s : outputs) {
    // strip the "@t=..." suffix
    auto at = s.rfind(" @");
    lines.push_back(at == std::string::npos ? s : s.substr(0, at));
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

ObservableHistory observable(const History& h, const RunSpec& spec,
                             const std::set<std::string>& ignore_dest) {
  std::set<std::string> ins(spec.input_relations.begin(), spec.input_relations.end());
  std::set<std::string> outs(spec.output_relations.begin(),
                             spec.output_relations.end());
  ObservableHistory obs;
  for (const auto& r : h.records) {
    if (r.is_input && ins.count(r.relation)) {
      obs.inputs.push_back(r.relation + tuple_str(r.payload) + " @t=" +
                           std::to_string(r.send));
    } else if (!r.is_input && outs.count(r.relation)) {
      std::string dest = ignore_dest.count(r.relation) ? "*" : r.dest;
      obs.outputs.push_back(r.relation + tuple_str(r.payload) + " -> " + dest +
                            " @t=" + std::to_string(r.arrival));
    }
  }
  return obs;
}

uint64_t program_hash(const Program& p) { return str_hash(pretty_print(p)); }

std::string serialize_schedule(const DelaySchedule& s) {
  std::string out;
  for (const auto& [k, v] : s.used) out += k + "=" + std::to_string(v) + "\x1e";
  return out;
}

DelaySchedule deserialize_schedule(const std::string& text) {
  std::map<std::string, int64_t> table;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\x1e', pos);
    if (end == std::string::npos) break;
    std::string entry = text.substr(pos, end - pos);
    size_t eq = entry.rfind('=');
    table[entry.substr(0, eq)] = std::stoll(entry.substr(eq + 1));
    pos = end + 1;
  }
  return DelaySchedule::table(std::move(table));
}

std::string EquivalenceVerdict::str() const {
  std::string out = mode + ": " + (equivalent ? "equivalent" : "NOT equivalent");
  if (!error.empty()) out += " (" + error + ")";
  out += " [original runs: " + std::to_string(original_runs) +
         ", rewritten runs: " + std::to_string(rewritten_runs) +
         (sampled ? ", sampled" : "") + "]";
  if (!equivalent && !cex.differing.empty())
    out += "\n  differing: " + cex.differing;
  return out;
}

// ---------------------------------------------------------------------------

EquivalenceVerdict check_exact(const Program& orig, const Program& rewr,
                               const std::vector<RunInput>& inputs,
                               const RunSpec& spec, const EquivalenceConfig& cfg) {
  EquivalenceVerdict v;
  v.mode = "exact-history";

  Runner orig_runner(orig);
  Runner rewr_runner(rewr);

  // exhaustively enumerate the original's schedules
  std::set<std::string> orig_obs;
  std::string first_orig_schedule;
  std::string first_orig_canonical;
  {
    DelaySchedule sched = DelaySchedule::enumerated(cfg.orig_max_delay);
    for (;;) {
      RunResult r = orig_runner.run(inputs, sched, cfg.horizon, spec);
      ObservableHistory obs = observable(r.history, spec, cfg.ignore_dest);
      if (v.original_runs == 0) {
        first_orig_schedule = serialize_schedule(sched);
        first_orig_canonical = obs.canonical();
      }
      orig_obs.insert(obs.canonical());
      ++v.original_runs;
      if (v.original_runs > cfg.schedule_limit) {
        v.error = "original schedule space exceeds the limit; use check_eventual";
        return v;
      }
      if (!sched.next_assignment()) break;
      sched.begin_run();
    }
  }

  // enumerate (or sample) the rewritten side and match each run
  auto try_run = [&](DelaySchedule& sched) -> bool {
    RunResult r = rewr_runner.run(inputs, sched, cfg.horizon, spec);
    ObservableHistory obs = observable(r.history, spec, cfg.ignore_dest);
    ++v.rewritten_runs;
    if (orig_obs.count(obs.canonical())) return true;
    // counterexample: find a line with no original support
    v.cex.rewritten_schedule = serialize_schedule(sched);
    v.cex.original_schedule = first_orig_schedule;
    v.cex.orig_hash = program_hash(orig);
    v.cex.rewr_hash = program_hash(rewr);
    std::string canon = obs.canonical();
    v.cex.differing = "no original run matches this rewritten history";
    // a more precise witness: first line differing from the closest original
    for (const auto& line : obs.outputs) {
      bool in_any = false;
      for (const auto& oc : orig_obs)
        if (oc.find("out " + line) != std::string::npos) in_any = true;
      if (!in_any) {
        v.cex.differing = "out " + line;
        break;
      }
    }
    return false;
  };

  {
    DelaySchedule sched = DelaySchedule::enumerated(cfg.rewr_max_delay);
    long count = 0;
    bool exhausted = false;
    for (;;) {
      ++count;
      if (count > cfg.schedule_limit) break;
      if (!try_run(sched)) return v;
      if (!sched.next_assignment()) {
        exhausted = true;
        break;
      }
      sched.begin_run();
    }
    if (!exhausted) {
      // fall back to seeded sampling of the rewritten side
      v.sampled = true;
      for (int s = 1; s <= cfg.sample_seeds; ++s) {
        DelaySchedule sample = DelaySchedule::seeded(s, cfg.rewr_max_delay);
        if (!try_run(sample)) return v;
      }
    }
  }
  v.equivalent = true;
  return v;
}

EquivalenceVerdict check_eventual(const Program& orig, const Program& rewr,
                                  const std::vector<RunInput>& inputs,
                                  const RunSpec& spec, int seeds, int max_delay,
                                  int64_t horizon,
                                  const std::set<std::string>& ignore_dest) {
  EquivalenceVerdict v;
  v.mode = "eventual-content";

  Runner orig_runner(orig);
  Runner rewr_runner(rewr);
  std::string content;
  for (int s = 1; s <= seeds; ++s) {
    DelaySchedule sched = DelaySchedule::seeded(s, max_delay);
    RunResult r = orig_runner.run(inputs, sched, horizon, spec);
    ++v.original_runs;
    if (r.quiesced_at < 0) {
      v.error = "original run (seed " + std::to_string(s) +
                ") did not quiesce before the horizon";
      return v;
    }
    std::string c = observable(r.history, spec, ignore_dest).content_only();
    if (s == 1) {
      content = c;
    } else if (c != content) {
      v.error = "original is not output-confluent on these inputs (seed " +
                std::to_string(s) + " differs); only check_exact applies";
      return v;
    }
  }

  for (int s = 1; s <= seeds; ++s) {
    DelaySchedule sched = DelaySchedule::seeded(s * 7919 + 17, max_delay);
    RunResult r = rewr_runner.run(inputs, sched, horizon, spec);
    ++v.rewritten_runs;
    if (r.quiesced_at < 0) {
      v.error = "rewritten run (seed " + std::to_string(s) +
                ") did not quiesce before the horizon";
      return v;
    }
    std::string c = observable(r.history, spec, ignore_dest).content_only();
    if (c != content) {
      v.cex.rewritten_schedule = serialize_schedule(sched);
      v.cex.orig_hash = program_hash(orig);
      v.cex.rewr_hash = program_hash(rewr);
      // witness: first differing line
      v.cex.differing = "output content differs";
      std::istringstream a(content), b(c);
      std::string la, lb;
      while (true) {
        bool ga = static_cast<bool>(std::getline(a, la));
        bool gb = static_cast<bool>(std::getline(b, lb));
        if (!ga && !gb) break;
        if (!ga || !gb || la != lb) {
          v.cex.differing = (ga ? "missing: " + la : "extra: " + lb);
          break;
        }
      }
      return v;
    }
  }
  v.equivalent = true;
  return v;
}

std::pair<History, History> replay(const Counterexample& cex, const Program& orig,
                                   const Program& rewr,
                                   const std::vector<RunInput>& inputs,
                                   const RunSpec& spec, int64_t horizon) {
  if (cex.orig_hash != program_hash(orig) || cex.rewr_hash != program_hash(rewr))
    throw std::runtime_error("counterexample does not belong to these programs");
  DelaySchedule so = deserialize_schedule(cex.original_schedule);
  DelaySchedule sr = deserialize_schedule(cex.rewritten_schedule);
  so.begin_run();
  RunResult ro = run(orig, inputs, so, horizon, spec);
  sr.begin_run();
  RunResult rr = run(rewr, inputs, sr, horizon, spec);
  return {ro.history, rr.history};
}

}  // namespace dedopt
