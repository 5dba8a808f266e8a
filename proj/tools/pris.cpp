// pris: run, replay and report prompt-redesign search; run verifier benchmarks.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pris/bench/bench.hpp"
#include "pris/orchestrator/run_dir.hpp"

namespace fs = std::filesystem;
using namespace pris;

namespace {

struct RunArgs {
  std::string mode = "pris";
  int n = 20;
  std::optional<int> m, k;
  int steps = 50;
  bool cfg = true;
  int iterations = 1;
  std::string backend;
  std::uint64_t seed = 0;
  std::string out;
  std::string prompt;
  std::string world;
  int parallelism = 1;
  std::optional<std::int64_t> budget;
};

PromptRecord resolve_prompt(const RunArgs& a, const BuiltBackends& built, RunConfig& config) {
  const sim::SimWorld* w = nullptr;
  if (!a.world.empty()) {
    require(built.universe != nullptr, ErrorKind::invalid_argument, "--world needs a profile with simulated worlds");
    w = &built.universe->world(a.world);
  } else if (built.universe) {
    w = built.universe->world_for_exact_prompt(a.prompt);
  }
  if (w) {
    config.media_kind = w->media_kind;
    return w->prompt_record();
  }
  require(!trim(a.prompt).empty(), ErrorKind::invalid_argument, "give --prompt or --world");
  return PromptRecord{"user-prompt", trim(a.prompt), std::nullopt, Provenance::user()};
}

int cmd_run(const RunArgs& a) {
  RunConfig config;
  config.mode = parse_run_mode(a.mode);
  config.total_samples = a.n;
  config.first_phase = a.m;
  config.top_k = a.k;
  config.denoising_steps = a.steps;
  config.cfg_enabled = a.cfg;
  config.iterations = config.mode == RunMode::bon ? 0 : a.iterations;
  config.run_seed = a.seed;
  config.parallelism = a.parallelism;
  config.nfe_budget = a.budget;
  const BackendProfile profile = load_profile(a.backend);
  const BuiltBackends built = build_backends(profile);
  const PromptRecord prompt = resolve_prompt(a, built, config);
  const RunResult r = execute_run(config, prompt, profile, a.out);
  std::cout << "best " << r.best.candidate_id << " score " << r.best.score->core_hits << "/" << r.best.score->core_total
            << " core, " << r.best.score->extra_hits << "/" << r.best.score->extra_total << " extra; nfe "
            << r.ledger.nfe_used << "/" << r.ledger.nfe_budget << "\n"
            << "wrote " << (fs::path(a.out) / "report.md").string() << "\n";
  return 0;
}

int cmd_replay(const std::string& dir, const std::string& into) {
  const ReplayOutcome o = replay(dir, into);
  std::cout << "events " << (o.events_identical ? "identical" : "DIFFER") << ", report "
            << (o.report_identical ? "identical" : "DIFFER") << " (" << o.replay_dir.string() << ")\n";
  return o.identical() ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  reporting::render(fs::path(dir));
  std::cout << "wrote " << (fs::path(dir) / "report.md").string() << "\n";
  return 0;
}

struct BenchArgs {
  std::string manifest;
  std::vector<std::string> strategies = {"efc"};
  std::string backend;
  std::string out;
  std::uint64_t seed = 0;
  int parallelism = 1;
  // synth
  std::vector<std::string> worlds;
  bench::SynthOptions synth;
};

int cmd_bench_run(const BenchArgs& a) {
  const auto entries = bench::read_manifest(fs::path(a.manifest));
  const BuiltBackends built = build_backends(load_profile(a.backend));
  fs::create_directories(a.out);
  std::vector<bench::EvalResult> results;
  std::string records;
  for (const auto& s : a.strategies) {
    auto strategy = bench::make_strategy(bench::parse_strategy(s), built.set, a.seed);
    results.push_back(bench::evaluate(*strategy, entries, a.parallelism));
    const auto& r = results.back();
    records += canonical(bench::result_record(r)) + "\n";
    for (const auto& t : r.traces)
      records += canonical(make_record("benchmark_trace", Json{{"strategy", s}, {"trace", t}})) + "\n";
    std::cout << s << ": " << r.overall.hits << "/" << r.overall.count << " = " << r.overall.accuracy() << " ("
              << r.failed_entries << " failed)\n";
  }
  write_file(fs::path(a.out) / "results.jsonl", records);
  write_file(fs::path(a.out) / "report.md", bench::render_report(results));
  std::cout << "wrote " << (fs::path(a.out) / "report.md").string() << "\n";
  return 0;
}

int cmd_bench_synth(const BenchArgs& a) {
  const BuiltBackends built = build_backends(load_profile(a.backend));
  require(built.universe != nullptr, ErrorKind::invalid_argument, "synthesis needs simulated worlds");
  bench::SynthOptions o = a.synth;
  o.seed = a.seed;
  const auto entries = bench::synthesize(*built.universe, a.worlds, o);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out, bench::write_manifest(entries));
  std::cout << "wrote " << entries.size() << " entries to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt redesign for inference-time scaling, with element-level verification"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "run a search and write a run directory");
  run->add_option("--mode", ra.mode, "bon | pris | pris-per-sample")->capture_default_str();
  run->add_option("--n", ra.n, "total samples N")->capture_default_str();
  run->add_option("--m", ra.m, "first-phase samples M (default N/2)");
  run->add_option("--k", ra.k, "top-k (default ceil(N/4))");
  run->add_option("--steps", ra.steps, "denoising steps")->capture_default_str();
  run->add_flag("--cfg,!--no-cfg", ra.cfg, "classifier-free guidance (doubles NFE per step)");
  run->add_option("--iterations", ra.iterations, "revision rounds")->capture_default_str();
  run->add_option("--backend", ra.backend, "backend profile")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", ra.seed, "run seed")->capture_default_str();
  run->add_option("--out", ra.out, "run directory")->required();
  run->add_option("--prompt", ra.prompt, "user prompt");
  run->add_option("--world", ra.world, "simulated world id; uses its prompt");
  run->add_option("--parallelism", ra.parallelism, "concurrent jobs")->capture_default_str();
  run->add_option("--budget", ra.budget, "NFE budget (default N * steps * (cfg ? 2 : 1))");

  std::string replay_dir, replay_into;
  auto* rep = app.add_subcommand("replay", "re-execute a run from its config and compare bytes");
  rep->add_option("run_dir", replay_dir)->required()->check(CLI::ExistingDirectory);
  rep->add_option("--into", replay_into, "replay directory (default <run_dir>/replay)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "verify the event log and re-render the report");
  report->add_option("run_dir", report_dir)->required()->check(CLI::ExistingDirectory);

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "verifier benchmark");
  bench_cmd->require_subcommand(1);
  auto* brun = bench_cmd->add_subcommand("run", "evaluate strategies on a manifest");
  brun->add_option("--manifest", ba.manifest)->required()->check(CLI::ExistingFile);
  brun->add_option("--strategy", ba.strategies,
                   "efc | caption_nli | decomposed_binary_vqa | scalar_reward | oracle | random (repeatable)")
      ->delimiter(',');
  brun->add_option("--backend", ba.backend)->required()->check(CLI::ExistingFile);
  brun->add_option("--out", ba.out)->required();
  brun->add_option("--seed", ba.seed, "seed for the random strategy");
  brun->add_option("--parallelism", ba.parallelism);
  auto* bsynth = bench_cmd->add_subcommand("synth", "write a synthetic manifest from simulated worlds");
  bsynth->add_option("--backend", ba.backend)->required()->check(CLI::ExistingFile);
  bsynth->add_option("--world", ba.worlds, "world id (repeatable)")->required()->delimiter(',');
  bsynth->add_option("--entries", ba.synth.entries)->capture_default_str();
  bsynth->add_option("--pool-size", ba.synth.pool_size)->capture_default_str();
  bsynth->add_option("--aligned", ba.synth.aligned_per_pool, "aligned items per pool")->capture_default_str();
  bsynth->add_option("--votes", ba.synth.votes)->capture_default_str();
  bsynth->add_option("--seed", ba.seed);
  bsynth->add_option("--out", ba.out, "manifest path")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(ra);
    if (*rep) return cmd_replay(replay_dir, replay_into);
    if (*report) return cmd_report(report_dir);
    if (*brun) return cmd_bench_run(ba);
    if (*bsynth) return cmd_bench_synth(ba);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
