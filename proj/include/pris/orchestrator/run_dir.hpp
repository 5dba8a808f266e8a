#pragma once

// Run directories:
//
//   config.json     run config, user prompt and the resolved backend profile
//   events.jsonl    hash-chained event log
//   artifacts.jsonl one record per generated visual
//   summary.jsonl   rendered summary records
//   report.md       rendered report
//
// config.json alone is enough to replay the run.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pris/backends/profile.hpp"
#include "pris/orchestrator/engine.hpp"
#include "pris/reporting/report.hpp"

namespace pris {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(in.good(), ErrorKind::invalid_argument, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::invalid_argument, "cannot write " + p.string());
  out << text;
}

inline Json run_config_record(const RunConfig& config, const PromptRecord& prompt, const BackendProfile& profile) {
  return make_record("run_config", Json{{"config", config}, {"prompt", prompt}, {"profile", profile.resolved()}});
}

inline RunResult execute_run(const RunConfig& config, const PromptRecord& prompt, const BackendProfile& profile,
                             const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "config.json", canonical(run_config_record(config, prompt, profile)) + "\n");
  BuiltBackends built = build_backends(profile);
  EventLog log(out_dir / "events.jsonl");
  RunResult result = run(config, prompt, built.set, log);

  std::string artifacts;
  for (const auto& c : result.candidates)
    artifacts += canonical(make_record("artifact", Json{{"candidate_id", c.candidate_id},
                                                        {"prompt_id", c.prompt_id},
                                                        {"seed", c.seed},
                                                        {"visual", c.visual}})) +
                 "\n";
  write_file(out_dir / "artifacts.jsonl", artifacts);
  reporting::render(out_dir);
  return result;
}

struct ReplayOutcome {
  std::filesystem::path replay_dir;
  bool events_identical = false;
  bool report_identical = false;
  bool identical() const { return events_identical && report_identical; }
};

// Re-executes a run from its config.json into `replay_dir` (default
// <run_dir>/replay) and compares the event log and report byte for byte.
inline ReplayOutcome replay(const std::filesystem::path& run_dir, std::filesystem::path replay_dir = {}) {
  if (replay_dir.empty()) replay_dir = run_dir / "replay";
  const Json rec = parse_record(read_file(run_dir / "config.json"));
  const RunConfig config = field<RunConfig>(rec, "config");
  const PromptRecord prompt = field<PromptRecord>(rec, "prompt");
  const BackendProfile profile = parse_profile(field<Json>(rec, "profile"));
  execute_run(config, prompt, profile, replay_dir);
  ReplayOutcome out;
  out.replay_dir = replay_dir;
  out.events_identical = read_file(run_dir / "events.jsonl") == read_file(replay_dir / "events.jsonl");
  out.report_identical = read_file(run_dir / "report.md") == read_file(replay_dir / "report.md");
  return out;
}

}  // namespace pris
