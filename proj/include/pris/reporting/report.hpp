#pragma once

// Renders a run directory's event log into summary.jsonl (canonical records)
// and report.md. Uses the log alone; no backend is touched.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pris/orchestrator/engine.hpp"

namespace pris::reporting {

struct RenderedReport {
  std::string summary_jsonl;
  std::string markdown;
};

namespace detail {

inline std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline std::string ratio(int a, int b) { return std::to_string(a) + "/" + std::to_string(b); }

inline std::string md_cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

inline std::string verdict_cell(const ElementVerdict& ev) {
  const char* label = ev.verdict.label == NliLabel::entailment ? "E" : "C";
  if (ev.verdict.coerced) return std::string(label) + " (coerced)";
  return std::string(label) + (ev.verdict.stage == VerdictStage::probe_nli ? " (probe)" : " (caption)");
}

struct Digest {
  RunConfig config;
  PromptRecord prompt;
  std::string backend_fingerprint;
  DecompositionResult decomposition;
  std::vector<Candidate> candidates;
  std::vector<Json> failures;
  std::map<std::string, int> phase_of;
  PromptLineage lineage;
  std::map<int, Json> selections, diagnoses, revisions, plans;
  std::vector<std::string> warnings;
  Json finished;
};

inline Digest digest(const std::vector<Json>& events) {
  Digest d;
  bool started = false;
  for (const auto& e : events) {
    const std::string kind = e.at("event").get<std::string>();
    const Json& b = e.at("body");
    if (kind == "run_started") {
      started = true;
      d.config = b.at("config").get<RunConfig>();
      d.prompt = b.at("prompt").get<PromptRecord>();
      d.backend_fingerprint = b.value("backend_fingerprint", "");
      d.lineage.add(d.prompt);
    } else if (kind == "decomposition") {
      d.decomposition = b.at("decomposition").get<DecompositionResult>();
    } else if (kind == "candidate") {
      d.candidates.push_back(b.at("candidate").get<Candidate>());
      d.phase_of[d.candidates.back().candidate_id] = b.at("phase").get<int>();
    } else if (kind == "candidate_failed") {
      d.failures.push_back(b);
    } else if (kind == "selection") {
      d.selections[b.at("iteration").get<int>()] = b;
    } else if (kind == "diagnosis") {
      d.diagnoses[b.at("iteration").get<int>()] = b.at("diagnosis");
    } else if (kind == "revision") {
      d.revisions[b.at("iteration").get<int>()] = b;
      for (const auto& v : b.at("result").at("variants")) {
        auto p = v.get<PromptRecord>();
        if (!d.lineage.find(p.prompt_id)) d.lineage.add(p);
      }
    } else if (kind == "plan") {
      d.plans[b.at("iteration").get<int>()] = b.at("plan");
    } else if (kind == "warning") {
      d.warnings.push_back(b.at("message").get<std::string>());
    } else if (kind == "run_finished") {
      d.finished = b;
    }
  }
  require(started, ErrorKind::corrupt_log, "log has no run_started event");
  require(!d.finished.is_null(), ErrorKind::corrupt_log, "log has no run_finished event; the run is incomplete");
  return d;
}

}  // namespace detail

inline RenderedReport render(const std::vector<Json>& events) {
  using namespace detail;
  const Digest d = digest(events);
  const auto& elements = d.decomposition.elements;
  const std::string best_id = d.finished.at("best_candidate_id").get<std::string>();
  const Candidate* best = nullptr;
  for (const auto& c : d.candidates)
    if (c.candidate_id == best_id) best = &c;
  require(best != nullptr, ErrorKind::corrupt_log, "best candidate '" + best_id + "' never completed");
  const BudgetLedger ledger = d.finished.at("ledger").get<BudgetLedger>();
  const auto chain = d.lineage.chain(best->prompt_id);

  // --- summary.jsonl
  RenderedReport out;
  {
    Json lineage_ids = Json::array();
    for (const auto& p : chain) lineage_ids.push_back(p.prompt_id);
    Json s = make_record("run_summary", Json{{"mode", to_string(d.config.mode)},
                                             {"prompt_id", d.prompt.prompt_id},
                                             {"best_candidate_id", best->candidate_id},
                                             {"best_prompt_id", best->prompt_id},
                                             {"best_score", *best->score},
                                             {"best_reward", best->scalar_reward.value_or(0.0)},
                                             {"best_visual", best->visual.uri},
                                             {"lineage", lineage_ids},
                                             {"completed", d.candidates.size()},
                                             {"failed", d.failures.size()},
                                             {"warnings", d.warnings.size()}});
    out.summary_jsonl += canonical(s) + "\n";
    for (const auto& c : d.candidates)
      out.summary_jsonl += canonical(make_record("candidate_summary", Json{{"candidate_id", c.candidate_id},
                                                                         {"prompt_id", c.prompt_id},
                                                                         {"seed", c.seed},
                                                                         {"score", *c.score},
                                                                         {"scalar_reward", c.scalar_reward.value_or(0.0)},
                                                                         {"visual", c.visual.uri}})) +
                           "\n";
    for (const auto& [t, diag] : d.diagnoses)
      out.summary_jsonl += canonical(make_record("diagnosis_summary", Json{{"iteration", t}, {"diagnosis", diag}})) + "\n";
    out.summary_jsonl += canonical(make_record("ledger", ledger)) + "\n";
  }

  // --- report.md
  std::ostringstream md;
  const RunConfig& c = d.config;
  md << "# Run report\n\n";
  md << "| setting | value |\n|---|---|\n";
  md << "| mode | " << to_string(c.mode) << " |\n";
  md << "| N | " << c.total_samples << " |\n";
  if (c.mode != RunMode::bon) {
    md << "| M | " << c.m() << " |\n| k | " << c.k() << " |\n| iterations | " << c.iterations << " |\n";
  }
  md << "| denoising steps | " << c.denoising_steps << " |\n";
  md << "| classifier-free guidance | " << (c.cfg_enabled ? "on" : "off") << " |\n";
  md << "| media | " << to_string(c.media_kind) << " |\n";
  md << "| run seed | " << c.run_seed << " |\n";
  md << "| backend fingerprint | `" << d.backend_fingerprint << "` |\n\n";

  md << "## Prompt\n\n> " << md_cell(d.prompt.text) << "\n\n";

  md << "## Best candidate\n\n";
  md << "`" << best->candidate_id << "` from prompt `" << best->prompt_id << "`, seed " << best->seed << ".\n\n";
  md << "- core: " << ratio(best->score->core_hits, best->score->core_total) << "\n";
  md << "- extra: " << ratio(best->score->extra_hits, best->score->extra_total) << "\n";
  md << "- scalar reward (original prompt): " << fixed(best->scalar_reward.value_or(0.0)) << "\n";
  md << "- visual: [" << best->candidate_id << "](" << best->visual.uri << ")\n\n";

  md << "## Prompt lineage\n\n";
  md << "| prompt | provenance | parent | text |\n|---|---|---|---|\n";
  for (const auto& p : chain)
    md << "| `" << p.prompt_id << "` | " << to_string(p.provenance.kind) << " | "
       << (p.provenance.parent_id.empty() ? "-" : "`" + p.provenance.parent_id + "`") << " | " << md_cell(p.text)
       << " |\n";
  if (d.lineage.records().size() > chain.size()) {
    md << "\nOther prompts generated during the run:\n\n";
    for (const auto& p : d.lineage.records()) {
      bool on_chain = false;
      for (const auto& q : chain) on_chain = on_chain || q.prompt_id == p.prompt_id;
      if (!on_chain) md << "- `" << p.prompt_id << "`: " << md_cell(p.text) << "\n";
    }
  }
  md << "\n";

  md << "## Elements\n\n| id | importance | category | element |\n|---|---|---|---|\n";
  for (const auto& e : elements)
    md << "| " << e.element_id << " | " << to_string(e.importance) << " | " << to_string(e.semantic_category) << " | "
       << md_cell(e.text) << " |\n";
  md << "\n";

  md << "## Element matrix\n\nE = entailed, C = contradicted; the stage that settled each verdict is in "
        "parentheses.\n\n";
  md << "| candidate | prompt | seed |";
  for (const auto& e : elements) md << " e" << e.element_id << " |";
  md << " core | extra | reward |\n|---|---|---|";
  for (std::size_t i = 0; i < elements.size(); ++i) md << "---|";
  md << "---|---|---|\n";
  for (const auto& cand : d.candidates) {
    md << "| `" << cand.candidate_id << "`" << (cand.candidate_id == best_id ? " (best)" : "") << " | `"
       << cand.prompt_id << "` | " << cand.seed << " |";
    for (const auto& e : elements) {
      const ElementVerdict* ev = nullptr;
      for (const auto& x : cand.report->per_element)
        if (x.element_id == e.element_id) ev = &x;
      md << " " << (ev ? verdict_cell(*ev) : "?") << " |";
    }
    md << " " << ratio(cand.score->core_hits, cand.score->core_total) << " | "
       << ratio(cand.score->extra_hits, cand.score->extra_total) << " | " << fixed(cand.scalar_reward.value_or(0.0))
       << " |\n";
  }
  if (!d.failures.empty()) {
    md << "\nFailed jobs:\n\n";
    for (const auto& f : d.failures)
      md << "- `" << f.at("candidate_id").get<std::string>() << "` (seed " << f.at("seed").get<std::uint64_t>()
         << ") failed at " << f.at("stage").get<std::string>() << ": " << md_cell(f.at("error").get<std::string>())
         << "\n";
  }
  md << "\n";

  md << "## Diagnosis\n\n";
  if (d.diagnoses.empty()) {
    md << "No diagnosis: this run never revised its prompt.\n\n";
  } else {
    for (const auto& [t, diag] : d.diagnoses) {
      md << "### Iteration " << t << "\n\n| element | hits / k | common failure |\n|---|---|---|\n";
      std::set<int> failing;
      for (const auto& id : diag.at("common_failures")) failing.insert(id.get<int>());
      for (const auto& row : diag.at("per_element_success")) {
        const int id = row.at("element_id").get<int>();
        std::string text;
        for (const auto& e : elements)
          if (e.element_id == id) text = e.text;
        md << "| e" << id << " " << md_cell(text) << " | " << ratio(row.at("hits").get<int>(), row.at("k").get<int>())
           << " | " << (failing.count(id) ? "yes" : "no") << " |\n";
      }
      md << "\n";
    }
  }

  if (!d.selections.empty()) {
    md << "## Iterations\n\n";
    std::map<int, std::vector<const Candidate*>> by_phase;
    for (const auto& cand : d.candidates) by_phase[d.phase_of.at(cand.candidate_id)].push_back(&cand);
    for (const auto& [t, sel_body] : d.selections) {
      const Json& sel = sel_body.at("selection");
      md << "### Iteration " << t << "\n\n";
      md << "1. Generate: " << sel_body.at("pool_size").get<int>() << " verified candidates in the pool.\n";
      md << "2. Select: top-" << sel.at("chosen").size() << " by element coverage (" << sel.at("method").get<std::string>()
         << (sel.at("tie_broken").get<bool>() ? ", tie broken by reward" : "") << "): ";
      for (std::size_t i = 0; i < sel.at("chosen").size(); ++i)
        md << (i ? ", " : "") << "`" << sel.at("chosen")[i].get<std::string>() << "`";
      md << "; covers " << sel.at("covered_elements").size() << " of " << elements.size() << " elements.\n";
      md << "3. Diagnose and revise: ";
      if (d.diagnoses.count(t)) {
        const Json& diag = d.diagnoses.at(t);
        if (diag.at("common_failures").empty()) {
          md << "no common failure, so the prompt was paraphrased for exploration";
        } else {
          md << "common failures ";
          bool first = true;
          for (const auto& id : diag.at("common_failures")) {
            for (const auto& row : diag.at("per_element_success"))
              if (row.at("element_id") == id)
                md << (first ? "" : ", ") << "e" << id.get<int>() << " ("
                   << ratio(row.at("hits").get<int>(), row.at("k").get<int>()) << ")";
            first = false;
          }
        }
      }
      if (d.revisions.count(t)) {
        const Json& rev = d.revisions.at(t);
        md << "; " << rev.at("mode").get<std::string>() << " revision produced";
        for (const auto& v : rev.at("result").at("variants")) md << " `" << v.at("prompt_id").get<std::string>() << "`";
      }
      md << ".\n";
      md << "4. Regenerate: ";
      if (d.plans.count(t)) {
        const Json& plan = d.plans.at(t);
        md << plan.at("jobs").size() << " jobs over " << plan.at("variant_count").get<int>()
           << " prompt variant(s) with reused seeds" << (plan.at("degraded").get<bool>() ? " (round-robin)" : "");
        if (by_phase.count(t)) {
          const Candidate* top = nullptr;
          for (const Candidate* x : by_phase.at(t))
            if (!top || ranks_above(*x, *top)) top = x;
          md << "; best new candidate `" << top->candidate_id << "` at core "
             << ratio(top->score->core_hits, top->score->core_total);
        }
      }
      md << ".\n\n";
    }
  }

  if (!d.warnings.empty()) {
    md << "## Warnings\n\n";
    for (const auto& w : d.warnings) md << "- " << md_cell(w) << "\n";
    md << "\n";
  }

  md << "## Budget ledger\n\n";
  md << "NFE used " << ledger.nfe_used << " of " << ledger.nfe_budget << ".\n\n";
  md << "| stage | calls | seconds |\n|---|---|---|\n";
  for (const auto& [stage, micros] : ledger.wall_clock_by_stage) {
    const auto calls = ledger.calls_by_backend.count(stage) ? ledger.calls_by_backend.at(stage) : 0;
    md << "| " << stage << " | " << calls << " | " << fixed(static_cast<double>(micros) / 1e6, 1) << " |\n";
  }
  md << "| total | | " << fixed(static_cast<double>(ledger.total_micros()) / 1e6, 1) << " |\n";

  out.markdown = md.str();
  return out;
}

// Checks the chain, then writes summary.jsonl and report.md into run_dir.
inline RenderedReport render(const std::filesystem::path& run_dir) {
  const auto events = read_event_log(run_dir / "events.jsonl");
  RenderedReport r = render(events);
  std::ofstream(run_dir / "summary.jsonl", std::ios::binary | std::ios::trunc) << r.summary_jsonl;
  std::ofstream(run_dir / "report.md", std::ios::binary | std::ios::trunc) << r.markdown;
  return r;
}

}  // namespace pris::reporting
