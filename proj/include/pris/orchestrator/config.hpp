#pragma once

// Run configuration, NFE accounting and the regeneration plan.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pris/backends/interfaces.hpp"
#include "pris/core/records.hpp"
#include "pris/selection/selection.hpp"

namespace pris {

enum class RunMode { bon, pris, pris_per_sample };

inline std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::bon: return "bon";
    case RunMode::pris: return "pris";
    case RunMode::pris_per_sample: return "pris_per_sample";
  }
  return "?";
}

inline RunMode parse_run_mode(std::string_view s) {
  if (s == "bon") return RunMode::bon;
  if (s == "pris") return RunMode::pris;
  if (s == "pris_per_sample" || s == "pris-per-sample") return RunMode::pris_per_sample;
  fail(ErrorKind::invalid_argument, "unknown run mode '" + std::string(s) + "'");
}

inline std::int64_t compute_nfe(std::int64_t n_samples, std::int64_t steps, bool cfg_enabled) {
  require(n_samples >= 0 && steps > 0, ErrorKind::invalid_argument, "NFE needs nonnegative samples and positive steps");
  return n_samples * steps * (cfg_enabled ? 2 : 1);
}

struct RunConfig {
  int total_samples = 20;
  std::optional<int> first_phase;  // default floor(N/2)
  std::optional<int> top_k;        // default ceil(N/4)
  int denoising_steps = 50;
  bool cfg_enabled = true;
  int iterations = 1;
  RunMode mode = RunMode::pris;
  int parallelism = 1;
  std::uint64_t run_seed = 0;
  std::optional<std::int64_t> nfe_budget;  // default compute_nfe(N, steps, cfg)
  bool accumulate_pool = true;  // iterations >= 2 re-select from every candidate so far
  SelectionOptions selection;
  FailureThreshold failure_threshold;
  Json sampler_options = Json::object();
  MediaKind media_kind = MediaKind::image;

  int m() const { return first_phase.value_or(total_samples / 2); }
  int k() const { return top_k.value_or((total_samples + 3) / 4); }
  std::int64_t budget() const {
    return nfe_budget.value_or(compute_nfe(total_samples, denoising_steps, cfg_enabled));
  }
  std::int64_t nfe_per_sample() const { return compute_nfe(1, denoising_steps, cfg_enabled); }

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::invalid_argument, "run config: " + m); };
    if (total_samples < 1) bad("N must be positive");
    if (denoising_steps < 1) bad("denoising_steps must be positive");
    if (parallelism < 1) bad("parallelism must be positive");
    if (budget() < 0) bad("negative NFE budget");
    if (mode == RunMode::bon) return;
    if (iterations < 1) bad("iterations must be at least 1 outside bon mode");
    if (m() < 1 || m() >= total_samples) bad("need 1 <= M < N");
    if (k() < 1 || k() > m()) bad("need 1 <= k <= M");
    if (total_samples - m() < iterations) bad("fewer remaining samples than iterations");
  }

  // Samples generated in each revision round: the remainder goes last.
  std::vector<int> iteration_sizes() const {
    std::vector<int> out;
    if (mode == RunMode::bon) return out;
    const int remaining = total_samples - m();
    for (int i = 0; i < iterations; ++i) out.push_back(remaining / iterations);
    out.back() += remaining % iterations;
    return out;
  }
};

inline void to_json(Json& j, const RunConfig& c) {
  j = Json{{"total_samples", c.total_samples},
           {"first_phase", c.m()},
           {"top_k", c.k()},
           {"denoising_steps", c.denoising_steps},
           {"cfg_enabled", c.cfg_enabled},
           {"iterations", c.mode == RunMode::bon ? 0 : c.iterations},
           {"mode", to_string(c.mode)},
           {"parallelism", c.parallelism},
           {"run_seed", c.run_seed},
           {"nfe_budget", c.budget()},
           {"accumulate_pool", c.accumulate_pool},
           {"exhaustive_limit", c.selection.exhaustive_limit},
           {"count_extra", c.selection.count_extra},
           {"failure_threshold", {c.failure_threshold.num, c.failure_threshold.den}},
           {"sampler_options", c.sampler_options},
           {"media_kind", to_string(c.media_kind)}};
}

inline void from_json(const Json& j, RunConfig& c) {
  c.total_samples = field<int>(j, "total_samples");
  if (j.contains("first_phase")) c.first_phase = j.at("first_phase").get<int>();
  if (j.contains("top_k")) c.top_k = j.at("top_k").get<int>();
  c.denoising_steps = j.value("denoising_steps", 50);
  c.cfg_enabled = j.value("cfg_enabled", true);
  c.iterations = j.value("iterations", 1);
  c.mode = parse_run_mode(j.value("mode", std::string("pris")));
  c.parallelism = j.value("parallelism", 1);
  c.run_seed = j.value("run_seed", std::uint64_t{0});
  if (j.contains("nfe_budget")) c.nfe_budget = j.at("nfe_budget").get<std::int64_t>();
  c.accumulate_pool = j.value("accumulate_pool", true);
  c.selection.exhaustive_limit = j.value("exhaustive_limit", std::uint64_t{10'000});
  c.selection.count_extra = j.value("count_extra", true);
  if (j.contains("failure_threshold")) {
    c.failure_threshold.num = j.at("failure_threshold").at(0).get<int>();
    c.failure_threshold.den = j.at("failure_threshold").at(1).get<int>();
  }
  c.sampler_options = j.value("sampler_options", Json::object());
  c.media_kind = parse_media_kind(j.value("media_kind", std::string("image")));
}

// ---------------------------------------------------------------------------

struct RegenerationJob {
  int variant_index = 0;
  std::string source_candidate;  // the top-k candidate whose seed is reused
  std::uint64_t seed = 0;

  bool operator==(const RegenerationJob&) const = default;
};

struct RegenerationPlan {
  std::vector<RegenerationJob> jobs;
  int variant_count = 0;
  bool degraded = false;  // job count not a multiple of k; seeds assigned round-robin

  bool operator==(const RegenerationPlan&) const = default;
};

inline void to_json(Json& j, const RegenerationPlan& p) {
  Json jobs = Json::array();
  for (const auto& job : p.jobs)
    jobs.push_back(Json{{"variant", job.variant_index}, {"source", job.source_candidate}, {"seed", job.seed}});
  j = Json{{"jobs", jobs}, {"variant_count", p.variant_count}, {"degraded", p.degraded}};
}

// Pairs every variant with every selected seed when job_count is a multiple
// of k. `seeds` maps candidate id to its generation seed.
inline RegenerationPlan plan_regeneration(int job_count, const TopKSelection& selection,
                                          const std::map<std::string, std::uint64_t>& seeds) {
  require(!selection.chosen.empty(), ErrorKind::empty_selection, "cannot plan from an empty selection");
  require(job_count >= 1, ErrorKind::invalid_argument, "job_count must be positive");
  const int k = static_cast<int>(selection.chosen.size());
  RegenerationPlan plan;
  plan.variant_count = (job_count + k - 1) / k;
  plan.degraded = job_count % k != 0;
  for (int j = 0; j < job_count; ++j) {
    const std::string& src = selection.chosen[static_cast<std::size_t>(j % k)];
    auto it = seeds.find(src);
    require(it != seeds.end(), ErrorKind::invalid_argument, "no seed recorded for '" + src + "'");
    plan.jobs.push_back(RegenerationJob{j / k, src, it->second});
  }
  return plan;
}

inline RegenerationPlan plan_regeneration(const RunConfig& config, const TopKSelection& selection,
                                          const std::map<std::string, std::uint64_t>& seeds) {
  return plan_regeneration(config.total_samples - config.m(), selection, seeds);
}

// Per-sample ablation: variant i belongs to chosen candidate i. The seed
// rotates each round so a variant is not locked to one seed.
inline RegenerationPlan plan_per_sample(int job_count, const TopKSelection& selection,
                                        const std::map<std::string, std::uint64_t>& seeds) {
  require(!selection.chosen.empty(), ErrorKind::empty_selection, "cannot plan from an empty selection");
  require(job_count >= 1, ErrorKind::invalid_argument, "job_count must be positive");
  const int k = static_cast<int>(selection.chosen.size());
  RegenerationPlan plan;
  plan.variant_count = k;
  plan.degraded = job_count % k != 0;
  for (int j = 0; j < job_count; ++j) {
    const std::string& src = selection.chosen[static_cast<std::size_t>((j + j / k) % k)];
    plan.jobs.push_back(RegenerationJob{j % k, src, seeds.at(src)});
  }
  return plan;
}

// ---------------------------------------------------------------------------

struct BudgetLedger {
  std::int64_t nfe_used = 0;
  std::int64_t nfe_budget = 0;
  std::map<std::string, std::int64_t> wall_clock_by_stage;  // microseconds
  std::map<std::string, int> calls_by_backend;

  void charge(std::int64_t nfe) { nfe_used += nfe; }
  void add(const CallTally& t) {
    for (const auto& [k, v] : t.micros_by_stage) wall_clock_by_stage[k] += v;
    for (const auto& [k, v] : t.calls_by_backend) calls_by_backend[k] += v;
  }
  std::int64_t total_micros() const {
    std::int64_t s = 0;
    for (const auto& [k, v] : wall_clock_by_stage) s += v;
    return s;
  }

  bool operator==(const BudgetLedger&) const = default;
};

inline void to_json(Json& j, const BudgetLedger& l) {
  j = Json{{"nfe_used", l.nfe_used},
           {"nfe_budget", l.nfe_budget},
           {"wall_clock_by_stage", l.wall_clock_by_stage},
           {"calls_by_backend", l.calls_by_backend}};
}
inline void from_json(const Json& j, BudgetLedger& l) {
  l.nfe_used = field<std::int64_t>(j, "nfe_used");
  l.nfe_budget = field<std::int64_t>(j, "nfe_budget");
  l.wall_clock_by_stage = j.value("wall_clock_by_stage", std::map<std::string, std::int64_t>{});
  l.calls_by_backend = j.value("calls_by_backend", std::map<std::string, int>{});
}

}  // namespace pris
