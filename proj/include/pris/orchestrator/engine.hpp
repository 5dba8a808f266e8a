#pragma once

// The BoN baseline and the PRIS loop.
//
// A phase is: generate every job, then verify each distinct visual once, then
// score every candidate's reward against the original prompt. Phases are
// barriers and events are appended in job order after each barrier, so the
// log does not depend on parallelism.

#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pris/core/prng.hpp"
#include "pris/orchestrator/config.hpp"
#include "pris/orchestrator/event_log.hpp"
#include "pris/redesign/redesign.hpp"

namespace pris {

template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int parallelism, Fn&& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// True when `a` ranks strictly above `b`: alignment score, then scalar
// reward, then candidate id.
inline bool ranks_above(const Candidate& a, const Candidate& b) {
  switch (compare_scores(a.score.value(), b.score.value())) {
    case Ordering::a_wins: return true;
    case Ordering::b_wins: return false;
    case Ordering::tie: break;
  }
  const double ra = a.scalar_reward.value_or(0.0);
  const double rb = b.scalar_reward.value_or(0.0);
  if (ra != rb) return ra > rb;
  return a.candidate_id < b.candidate_id;
}

inline const Candidate* best_of(const std::vector<Candidate>& pool) {
  const Candidate* best = nullptr;
  for (const auto& c : pool)
    if (!best || ranks_above(c, *best)) best = &c;
  return best;
}

inline std::uint64_t fresh_seed(std::uint64_t run_seed, int phase, int index) {
  return KeyedRng::bits({run_seed, static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(index),
                         key(Stream::fresh_seed)}) >>
         32;
}

inline std::string candidate_id(int phase, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%d-%03d", phase, index);
  return buf;
}

struct RunResult {
  RunConfig config;
  PromptRecord prompt;
  DecompositionResult decomposition;
  std::vector<Candidate> candidates;  // completed, in generation order
  Candidate best;
  BudgetLedger ledger;
  PromptLineage lineage;
  std::vector<TopKSelection> selections;
  std::vector<FailureDiagnosis> diagnoses;
  std::vector<std::string> warnings;
  int failed_jobs = 0;
  std::vector<Json> events;
};

// Recomputes the ledger from a run's events alone.
inline BudgetLedger ledger_from_events(const std::vector<Json>& events) {
  BudgetLedger l;
  for (const auto& e : events) {
    const Json& body = e.at("body");
    const std::string kind = e.at("event").get<std::string>();
    if (kind == "run_started") l.nfe_budget = body.at("config").at("nfe_budget").get<std::int64_t>();
    if (body.contains("nfe")) l.charge(body.at("nfe").get<std::int64_t>());
    if (body.contains("tally")) l.add(body.at("tally").get<CallTally>());
  }
  return l;
}

class Engine {
 public:
  Engine(BackendSet backends, RunConfig config, EventLog& log, VerifierOptions verifier_options = {})
      : verifier_(std::move(backends), verifier_options), reviser_(verifier_), config_(std::move(config)), log_(log) {
    config_.validate();
  }

  RunResult run(const PromptRecord& prompt) {
    prompt.validate();
    require(prompt.provenance.kind == ProvenanceKind::user, ErrorKind::invalid_argument, "runs start from a user prompt");
    r_ = RunResult{};
    r_.config = config_;
    r_.prompt = prompt;
    r_.ledger.nfe_budget = config_.budget();
    r_.lineage.add(prompt);
    report_cache_.clear();

    log_.append("run_started", Json{{"config", config_},
                                    {"prompt", prompt},
                                    {"backend_fingerprint", verifier_.backends().fingerprint()}});

    CallTally dt;
    r_.decomposition = verifier_.decompose(prompt, config_.media_kind, dt);
    r_.ledger.add(dt);
    const auto telemetry = decomposition_telemetry(r_.decomposition);
    log_.append("decomposition", Json{{"decomposition", r_.decomposition},
                                      {"tally", dt},
                                      {"element_count_outlier", telemetry.outlier}});
    if (telemetry.outlier)
      warn("decomposition produced " + std::to_string(telemetry.count) + " elements, far above typical");

    if (config_.mode == RunMode::bon) {
      run_phase(0, fresh_jobs(0, prompt, config_.total_samples));
    } else {
      run_pris_loop();
    }
    finish();
    r_.events = log_.records();
    return std::move(r_);
  }

  const EfcVerifier& verifier() const { return verifier_; }

 private:
  struct Job {
    std::string candidate_id;
    PromptRecord prompt;
    std::uint64_t seed = 0;
    std::string source_candidate;  // empty for fresh seeds
  };

  struct Outcome {
    std::optional<VisualHandle> visual;
    std::optional<VerificationReport> report;
    std::optional<double> reward;
    std::string failed_stage;
    std::string error;
    CallTally tally;
  };

  static bool is_candidate_failure(const Error& e) {
    switch (e.kind()) {
      case ErrorKind::backend_error:
      case ErrorKind::empty_caption:
      case ErrorKind::invalid_label:
      case ErrorKind::degenerate_answer: return true;
      default: return false;
    }
  }

  void warn(const std::string& message) {
    r_.warnings.push_back(message);
    log_.append("warning", Json{{"message", message}});
  }

  std::vector<Job> fresh_jobs(int phase, const PromptRecord& prompt, int count) const {
    std::vector<Job> jobs;
    for (int i = 0; i < count; ++i)
      jobs.push_back(Job{candidate_id(phase, i), prompt, fresh_seed(config_.run_seed, phase, i), {}});
    return jobs;
  }

  // Returns the candidates completed in this phase.
  std::vector<Candidate> run_phase(int phase, const std::vector<Job>& jobs) {
    const std::int64_t nfe = compute_nfe(static_cast<std::int64_t>(jobs.size()), config_.denoising_steps,
                                         config_.cfg_enabled);
    if (r_.ledger.nfe_used + nfe > r_.ledger.nfe_budget)
      fail(ErrorKind::budget_exceeded, "phase " + std::to_string(phase) + " needs " + std::to_string(nfe) +
                                           " NFE with " + std::to_string(r_.ledger.nfe_budget - r_.ledger.nfe_used) +
                                           " left");
    const BackendSet& b = verifier_.backends();
    const MediaKind media = config_.media_kind;

    auto outcomes = parallel_map<Outcome>(jobs.size(), config_.parallelism, [&](std::size_t i) {
      Outcome o;
      try {
        o.visual = timed(*b.clock, o.tally, "generator", media, [&] {
          return detail::guard_backend("generator", [&] {
            return b.generator->generate(jobs[i].prompt, jobs[i].seed, config_.denoising_steps, config_.cfg_enabled,
                                         media, config_.sampler_options);
          });
        });
      } catch (const Error& e) {
        if (!is_candidate_failure(e)) throw;
        o.failed_stage = "generation";
        o.error = e.what();
      }
      return o;
    });

    // Each distinct visual is verified once, by the first job that produced it.
    std::vector<std::size_t> owners;
    std::map<std::string, std::size_t> owner_of;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!outcomes[i].visual) continue;
      const std::string& uri = outcomes[i].visual->uri;
      if (report_cache_.count(uri) || owner_of.count(uri)) continue;
      owner_of[uri] = i;
      owners.push_back(i);
    }
    auto verified = parallel_map<Outcome>(owners.size(), config_.parallelism, [&](std::size_t n) {
      const std::size_t i = owners[n];
      Outcome o;
      try {
        o.report = verifier_.verify(r_.decomposition, jobs[i].candidate_id, *outcomes[i].visual, o.tally);
      } catch (const Error& e) {
        if (!is_candidate_failure(e)) throw;
        o.failed_stage = "verification";
        o.error = e.what();
      }
      return o;
    });
    for (std::size_t n = 0; n < owners.size(); ++n) {
      const std::size_t i = owners[n];
      outcomes[i].tally.merge(verified[n].tally);
      report_cache_[outcomes[i].visual->uri] = verified[n];
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!outcomes[i].visual) continue;
      const Outcome& v = report_cache_.at(outcomes[i].visual->uri);
      if (v.report) {
        outcomes[i].report = *v.report;
        outcomes[i].report->candidate_id = jobs[i].candidate_id;
      } else {
        outcomes[i].failed_stage = v.failed_stage;
        outcomes[i].error = v.error;
      }
    }

    auto rewards = parallel_map<Outcome>(jobs.size(), config_.parallelism, [&](std::size_t i) {
      Outcome o;
      if (!outcomes[i].report) return o;
      try {
        o.reward = timed(*b.clock, o.tally, "reward", media, [&] {
          return detail::guard_backend("reward", [&] { return b.reward->reward(r_.prompt, *outcomes[i].visual); });
        });
        if (!std::isfinite(*o.reward)) fail(ErrorKind::backend_error, "reward is not finite");
      } catch (const Error& e) {
        if (!is_candidate_failure(e)) throw;
        o.reward.reset();
        o.failed_stage = "reward";
        o.error = e.what();
      }
      return o;
    });

    std::vector<Candidate> done;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      Outcome& o = outcomes[i];
      o.tally.merge(rewards[i].tally);
      if (!rewards[i].failed_stage.empty()) {
        o.failed_stage = rewards[i].failed_stage;
        o.error = rewards[i].error;
      }
      const std::int64_t job_nfe = config_.nfe_per_sample();
      r_.ledger.charge(job_nfe);
      r_.ledger.add(o.tally);
      Json body{{"phase", phase},
                {"candidate_id", jobs[i].candidate_id},
                {"prompt_id", jobs[i].prompt.prompt_id},
                {"seed", jobs[i].seed},
                {"source_candidate", jobs[i].source_candidate},
                {"nfe", job_nfe},
                {"tally", o.tally}};
      if (o.failed_stage.empty()) {
        Candidate c;
        c.candidate_id = jobs[i].candidate_id;
        c.prompt_id = jobs[i].prompt.prompt_id;
        c.seed = jobs[i].seed;
        c.visual = *o.visual;
        c.report = *o.report;
        c.score = score_report(*o.report, r_.decomposition.elements);
        c.scalar_reward = rewards[i].reward;
        body["candidate"] = c;
        body["reward_prompt_id"] = r_.prompt.prompt_id;
        log_.append("candidate", std::move(body));
        r_.candidates.push_back(c);
        done.push_back(std::move(c));
      } else {
        ++r_.failed_jobs;
        body["stage"] = o.failed_stage;
        body["error"] = o.error;
        if (o.visual) body["visual"] = *o.visual;
        log_.append("candidate_failed", std::move(body));
      }
    }
    return done;
  }

  std::map<std::string, std::uint64_t> seeds() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& c : r_.candidates) out[c.candidate_id] = c.seed;
    return out;
  }

  const Candidate& find_candidate(const std::string& id) const {
    for (const auto& c : r_.candidates)
      if (c.candidate_id == id) return c;
    fail(ErrorKind::invalid_argument, "unknown candidate '" + id + "'");
  }

  void add_prompt(const PromptRecord& p) {
    if (!r_.lineage.find(p.prompt_id)) r_.lineage.add(p);
  }

  void run_pris_loop() {
    const auto& elements = r_.decomposition.elements;
    std::vector<Candidate> latest = run_phase(0, fresh_jobs(0, r_.prompt, config_.m()));
    const auto sizes = config_.iteration_sizes();

    for (int t = 1; t <= config_.iterations; ++t) {
      const int job_count = sizes[static_cast<std::size_t>(t - 1)];
      const std::vector<Candidate>& pool = config_.accumulate_pool ? r_.candidates : latest;
      if (pool.empty()) {
        warn("iteration " + std::to_string(t) + " has no verified candidates; generating from the original prompt");
        latest = run_phase(t, fresh_jobs(t, r_.prompt, job_count));
        continue;
      }

      TopKSelection sel = select_top_k(pool, config_.k(), config_.selection, &elements);
      r_.selections.push_back(sel);
      log_.append("selection", Json{{"iteration", t}, {"pool_size", pool.size()}, {"selection", sel}});

      std::vector<VerificationReport> reports;
      std::vector<std::string> captions;
      for (const auto& id : sel.chosen) {
        reports.push_back(*find_candidate(id).report);
        captions.push_back(reports.back().caption);
      }
      FailureDiagnosis diag = diagnose(sel, reports, elements, config_.failure_threshold);
      r_.diagnoses.push_back(diag);
      log_.append("diagnosis", Json{{"iteration", t}, {"diagnosis", diag}});

      RegenerationPlan plan;
      std::vector<PromptRecord> variants;
      if (config_.mode == RunMode::pris) {
        plan = plan_regeneration(job_count, sel, seeds());
        variants = revise_shared(t, sel, diag, captions, plan.variant_count);
      } else {
        plan = plan_per_sample(job_count, sel, seeds());
        variants = revise_each(t, sel);
      }
      log_.append("plan", Json{{"iteration", t}, {"plan", plan}});

      std::vector<Job> jobs;
      for (std::size_t j = 0; j < plan.jobs.size(); ++j) {
        const auto& pj = plan.jobs[j];
        jobs.push_back(Job{candidate_id(t, static_cast<int>(j)), variants.at(static_cast<std::size_t>(pj.variant_index)),
                           pj.seed, pj.source_candidate});
      }
      latest = run_phase(t, jobs);
    }
  }

  // Parent for round t: the original prompt first, then the prompt that
  // produced the best selected candidate.
  PromptRecord parent_for(int t, const TopKSelection& sel) const {
    if (t == 1) return r_.prompt;
    const Candidate* best = nullptr;
    for (const auto& id : sel.chosen) {
      const Candidate& c = find_candidate(id);
      if (!best || ranks_above(c, *best)) best = &c;
    }
    return *r_.lineage.find(best->prompt_id);
  }

  std::vector<PromptRecord> revise_shared(int t, const TopKSelection& sel, const FailureDiagnosis& diag,
                                          const std::vector<std::string>& captions, int variant_count) {
    RevisionRequest req;
    req.parent = parent_for(t, sel);
    req.elements = r_.decomposition.elements;
    req.common_failures = diag.common_failures;
    for (const auto& e : req.elements)
      if (std::find(diag.common_failures.begin(), diag.common_failures.end(), e.element_id) ==
          diag.common_failures.end())
        req.satisfied.push_back(e.element_id);
    req.mode = diag.exploration_mode ? RevisionMode::exploration : RevisionMode::failure_targeted;
    req.variant_count = variant_count;
    req.caption_excerpts = captions;
    req.iteration = t;
    req.media_kind = config_.media_kind;

    for (int pass = 0; pass < 2; ++pass) {
      CallTally tally;
      try {
        RevisionResult res = reviser_.revise(req, tally);
        r_.ledger.add(tally);
        for (const auto& v : res.variants) add_prompt(v);
        log_.append("revision", Json{{"iteration", t},
                                     {"mode", to_string(req.mode)},
                                     {"parent_id", req.parent.prompt_id},
                                     {"common_failures", req.common_failures},
                                     {"result", res},
                                     {"tally", tally}});
        return res.variants;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::unfaithful_revision) throw;
        r_.ledger.add(tally);
        log_.append("revision_rejected", Json{{"iteration", t}, {"mode", to_string(req.mode)}, {"tally", tally}});
        if (req.mode == RevisionMode::failure_targeted) {
          warn(std::string(e.what()) + "; falling back to exploration");
          req.mode = RevisionMode::exploration;
          req.common_failures.clear();
          req.satisfied.clear();
          for (const auto& el : req.elements) req.satisfied.push_back(el.element_id);
        } else {
          warn(std::string(e.what()) + "; regenerating from the unchanged parent");
          break;
        }
      }
    }
    return std::vector<PromptRecord>(static_cast<std::size_t>(variant_count), req.parent);
  }

  std::vector<PromptRecord> revise_each(int t, const TopKSelection& sel) {
    std::vector<PromptRecord> variants;
    CallTally tally;
    Json parents = Json::array();
    for (std::size_t i = 0; i < sel.chosen.size(); ++i) {
      const Candidate& c = find_candidate(sel.chosen[i]);
      const PromptRecord parent = *r_.lineage.find(c.prompt_id);
      parents.push_back(parent.prompt_id);
      try {
        variants.push_back(reviser_.revise_per_sample(parent, *c.report, r_.decomposition.elements, tally, t,
                                                      static_cast<int>(i), config_.media_kind));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::unfaithful_revision) throw;
        warn(std::string(e.what()) + "; keeping the sample's own prompt");
        variants.push_back(parent);
      }
      add_prompt(variants.back());
    }
    r_.ledger.add(tally);
    log_.append("revision", Json{{"iteration", t},
                                 {"mode", to_string(RevisionMode::per_sample)},
                                 {"parent_ids", parents},
                                 {"result", Json{{"variants", variants},
                                                 {"rewriter_fingerprint", verifier_.backends().rewriter->fingerprint()}}},
                                 {"tally", tally}});
    return variants;
  }

  void finish() {
    const Candidate* best = best_of(r_.candidates);
    require(best != nullptr, ErrorKind::empty_selection, "no candidate completed");
    r_.best = *best;
    log_.append("run_finished", Json{{"best_candidate_id", best->candidate_id},
                                     {"best_prompt_id", best->prompt_id},
                                     {"best_score", *best->score},
                                     {"completed", r_.candidates.size()},
                                     {"failed", r_.failed_jobs},
                                     {"ledger", r_.ledger}});
  }

  EfcVerifier verifier_;
  PromptReviser reviser_;
  RunConfig config_;
  EventLog& log_;
  RunResult r_;
  std::map<std::string, Outcome> report_cache_;
};

inline RunResult run_bon(RunConfig config, const PromptRecord& prompt, BackendSet backends, EventLog& log) {
  config.mode = RunMode::bon;
  return Engine(std::move(backends), std::move(config), log).run(prompt);
}

inline RunResult run_pris(RunConfig config, const PromptRecord& prompt, BackendSet backends, EventLog& log) {
  require(config.mode != RunMode::bon, ErrorKind::invalid_argument, "run_pris needs mode pris or pris_per_sample");
  return Engine(std::move(backends), std::move(config), log).run(prompt);
}

inline RunResult run(const RunConfig& config, const PromptRecord& prompt, BackendSet backends, EventLog& log) {
  return Engine(std::move(backends), config, log).run(prompt);
}

}  // namespace pris
