#pragma once

// Prompt revision. The rewriter backend produces text; the engine checks that
// each variant still entails what it must keep, retries once, then gives up.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "pris/verifier/efc.hpp"

namespace pris {

struct RevisionRequest {
  PromptRecord parent;
  std::vector<SemanticElement> elements;
  std::vector<int> common_failures;
  std::vector<int> satisfied;
  RevisionMode mode = RevisionMode::failure_targeted;
  int variant_count = 1;
  std::optional<VerificationReport> per_sample_report;  // per_sample mode only
  std::vector<std::string> caption_excerpts;
  int iteration = 1;
  MediaKind media_kind = MediaKind::image;

  void validate() const {
    parent.validate();
    require(variant_count >= 1, ErrorKind::invalid_argument, "variant_count must be positive");
    require(iteration >= 1, ErrorKind::invalid_argument, "iteration must be positive");
    if (mode == RevisionMode::failure_targeted)
      require(!common_failures.empty(), ErrorKind::invalid_argument, "failure_targeted revision needs failures");
    if (mode == RevisionMode::exploration)
      require(common_failures.empty(), ErrorKind::invalid_argument, "exploration revision takes no failures");
    require(per_sample_report.has_value() == (mode == RevisionMode::per_sample), ErrorKind::invalid_argument,
            "per_sample_report is required exactly in per_sample mode");
    std::set<int> ids;
    for (const auto& e : elements) ids.insert(e.element_id);
    for (int id : common_failures)
      require(ids.count(id) == 1, ErrorKind::dangling_element, "failure id " + std::to_string(id) + " unknown");
    for (int id : satisfied)
      require(ids.count(id) == 1, ErrorKind::dangling_element, "satisfied id " + std::to_string(id) + " unknown");
  }
};

struct RevisionResult {
  std::vector<PromptRecord> variants;
  std::string rewriter_fingerprint;
  int attempts = 1;
  std::vector<int> checked_elements;  // hypotheses every variant had to entail

  bool operator==(const RevisionResult&) const = default;
};

inline void to_json(Json& j, const RevisionResult& r) {
  j = Json{{"variants", r.variants},
           {"rewriter_fingerprint", r.rewriter_fingerprint},
           {"attempts", r.attempts},
           {"checked_elements", r.checked_elements}};
}

class PromptReviser {
 public:
  explicit PromptReviser(EfcVerifier& verifier) : v_(verifier) {}

  RevisionResult revise(const RevisionRequest& request, CallTally& tally) {
    request.validate();
    std::vector<int> failures = request.common_failures;
    if (request.mode == RevisionMode::per_sample) failures = contradicted(*request.per_sample_report, request.elements);

    RewriteRequest rw;
    rw.mode = request.mode;
    rw.parent_text = request.parent.text;
    rw.variant_count = request.variant_count;
    rw.caption_excerpts = request.caption_excerpts;
    for (int id : failures) rw.failures.push_back(element(request.elements, id).text);
    for (int id : request.satisfied) rw.satisfied.push_back(element(request.elements, id).text);

    RevisionResult result;
    result.rewriter_fingerprint = v_.backends().rewriter->fingerprint();
    result.checked_elements = required_elements(request, failures);

    std::string last_problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
      rw.attempt = attempt;
      auto texts = timed(*v_.backends().clock, tally, "rewriter", request.media_kind, [&] {
        return detail::guard_backend("rewriter", [&] { return v_.backends().rewriter->rewrite(rw); });
      });
      if (static_cast<int>(texts.size()) != request.variant_count)
        fail(ErrorKind::backend_error, "rewriter returned " + std::to_string(texts.size()) + " variants, expected " +
                                           std::to_string(request.variant_count));
      last_problem = first_problem(texts, request, result.checked_elements, tally);
      if (last_problem.empty()) {
        result.attempts = attempt + 1;
        for (std::size_t j = 0; j < texts.size(); ++j) {
          PromptRecord p;
          p.prompt_id = variant_id(request, static_cast<int>(j));
          p.text = trim(texts[j]);
          p.category = request.parent.category;
          p.provenance = request.mode == RevisionMode::standard_expansion
                             ? Provenance::expanded(request.parent.prompt_id)
                             : Provenance::revised(request.iteration, request.parent.prompt_id);
          result.variants.push_back(std::move(p));
        }
        return result;
      }
    }
    fail(ErrorKind::unfaithful_revision, std::string(to_string(request.mode)) + " revision of '" +
                                             request.parent.prompt_id + "' failed after retry: " + last_problem);
  }

  RevisionResult revise(const RevisionRequest& request) {
    CallTally t;
    return revise(request, t);
  }

  // Failure-blind enrichment; every original element must survive.
  PromptRecord standard_expand(const PromptRecord& prompt, const std::vector<SemanticElement>& elements,
                               CallTally& tally, MediaKind media_kind = MediaKind::image) {
    RevisionRequest req;
    req.parent = prompt;
    req.elements = elements;
    req.mode = RevisionMode::standard_expansion;
    req.media_kind = media_kind;
    return revise(req, tally).variants.front();
  }

  PromptRecord standard_expand(const PromptRecord& prompt, const std::vector<SemanticElement>& elements) {
    CallTally t;
    return standard_expand(prompt, elements, t);
  }

  // One variant aimed at this sample's own contradictions. A report with
  // nothing contradicted returns the parent unchanged.
  PromptRecord revise_per_sample(const PromptRecord& prompt, const VerificationReport& report,
                                 const std::vector<SemanticElement>& elements, CallTally& tally, int iteration = 1,
                                 int index = 0, MediaKind media_kind = MediaKind::image) {
    score_report(report, elements);  // final-report precondition
    if (contradicted(report, elements).empty()) return prompt;
    RevisionRequest req;
    req.parent = prompt;
    req.elements = elements;
    req.mode = RevisionMode::per_sample;
    req.per_sample_report = report;
    req.iteration = iteration;
    req.media_kind = media_kind;
    for (const auto& e : elements)
      if (report.entailed(e.element_id)) req.satisfied.push_back(e.element_id);
    req.caption_excerpts = {report.caption};
    auto r = revise(req, tally);
    PromptRecord out = r.variants.front();
    out.prompt_id = prompt.prompt_id + "/p" + std::to_string(iteration) + "." + std::to_string(index);
    return out;
  }

  PromptRecord revise_per_sample(const PromptRecord& prompt, const VerificationReport& report,
                                 const std::vector<SemanticElement>& elements) {
    CallTally t;
    return revise_per_sample(prompt, report, elements, t);
  }

 private:
  static const SemanticElement& element(const std::vector<SemanticElement>& elements, int id) {
    for (const auto& e : elements)
      if (e.element_id == id) return e;
    fail(ErrorKind::dangling_element, "element " + std::to_string(id) + " unknown");
  }

  static std::vector<int> contradicted(const VerificationReport& report, const std::vector<SemanticElement>& elements) {
    std::vector<int> out;
    for (const auto& e : elements)
      if (!report.entailed(e.element_id)) out.push_back(e.element_id);
    return out;
  }

  static std::vector<int> required_elements(const RevisionRequest& req, const std::vector<int>& failures) {
    std::set<int> ids;
    switch (req.mode) {
      case RevisionMode::failure_targeted:
      case RevisionMode::per_sample:
        ids.insert(failures.begin(), failures.end());
        for (int id : req.satisfied)
          if (element(req.elements, id).importance == Importance::core) ids.insert(id);
        break;
      case RevisionMode::exploration:
      case RevisionMode::standard_expansion:
        for (const auto& e : req.elements) ids.insert(e.element_id);
        break;
    }
    return {ids.begin(), ids.end()};
  }

  static std::string variant_id(const RevisionRequest& req, int j) {
    if (req.mode == RevisionMode::standard_expansion) return req.parent.prompt_id + "/x" + std::to_string(j);
    return req.parent.prompt_id + "/r" + std::to_string(req.iteration) + "." + std::to_string(j);
  }

  // Empty string when every variant passes.
  std::string first_problem(const std::vector<std::string>& texts, const RevisionRequest& req,
                            const std::vector<int>& required, CallTally& tally) {
    for (const auto& raw : texts) {
      const std::string t = trim(raw);
      if (t.empty()) return "empty variant";
      if (t == trim(req.parent.text)) return "variant identical to parent";
      for (int id : required) {
        const auto& e = element(req.elements, id);
        const Verdict verdict = v_.nli_judge({t, e.text, VerdictStage::caption_nli}, tally, req.media_kind);
        if (verdict.label != NliLabel::entailment)
          return "variant '" + t + "' does not entail '" + e.text + "' (" + std::string(to_string(verdict.label)) + ")";
      }
    }
    return {};
  }

  EfcVerifier& v_;
};

}  // namespace pris
