#pragma once

// Element-level factual correction: decompose the prompt into atomic
// elements, caption the visual once, judge every element against the caption
// by text-to-text entailment, and resolve the remaining neutrals by asking an
// open-ended question about the visual and judging the answer.

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "pris/backends/interfaces.hpp"
#include "pris/backends/labels.hpp"
#include "pris/core/records.hpp"
#include "pris/core/scoring.hpp"

namespace pris {

struct DecompositionResult {
  std::string prompt_id;
  std::vector<SemanticElement> elements;
  std::string decomposer_fingerprint;
  MediaKind media_kind = MediaKind::image;

  bool operator==(const DecompositionResult&) const = default;
};

inline void to_json(Json& j, const DecompositionResult& d) {
  j = Json{{"prompt_id", d.prompt_id},
           {"elements", d.elements},
           {"decomposer_fingerprint", d.decomposer_fingerprint},
           {"media_kind", to_string(d.media_kind)}};
}
inline void from_json(const Json& j, DecompositionResult& d) {
  d.prompt_id = field<std::string>(j, "prompt_id");
  d.elements = field<std::vector<SemanticElement>>(j, "elements");
  d.decomposer_fingerprint = field<std::string>(j, "decomposer_fingerprint");
  d.media_kind = parse_media_kind(j.value("media_kind", std::string("image")));
}

struct NliQuery {
  std::string premise;
  std::string hypothesis;
  VerdictStage stage = VerdictStage::caption_nli;
};

// Typical element counts per prompt: about 3.5 for image prompts and 7.3 for
// video prompts. Counts far outside are flagged, never rejected.
struct DecompositionTelemetry {
  int count = 0;
  double typical_mean = 0.0;
  bool outlier = false;
};

inline DecompositionTelemetry decomposition_telemetry(const DecompositionResult& d) {
  DecompositionTelemetry t;
  t.count = static_cast<int>(d.elements.size());
  t.typical_mean = d.media_kind == MediaKind::image ? 3.5 : 7.3;
  t.outlier = t.count > 3.0 * t.typical_mean;
  return t;
}

struct VerifierOptions {
  // Disabling probing yields the caption-only variant: caption-stage
  // neutrals become contradictions directly.
  bool probing_enabled = true;
};

namespace detail {

// Converts stray exceptions from a backend into BackendError with context.
template <typename Fn>
auto guard_backend(std::string_view capability, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::backend_error, std::string(capability) + ": " + e.what());
  }
}

}  // namespace detail

class EfcVerifier {
 public:
  explicit EfcVerifier(BackendSet backends, VerifierOptions options = {})
      : b_(std::move(backends)), options_(options) {
    b_.validate();
  }

  const BackendSet& backends() const { return b_; }
  const VerifierOptions& options() const { return options_; }

  DecompositionResult decompose(const PromptRecord& prompt, MediaKind media_kind, CallTally& tally) {
    prompt.validate();
    const std::string fp = b_.decomposer->fingerprint();
    const auto cache_key = std::make_tuple(prompt.prompt_id, fp, media_kind);
    {
      std::shared_lock lock(mu_);
      if (auto it = decompositions_.find(cache_key); it != decompositions_.end()) return it->second;
    }
    auto elements = timed(*b_.clock, tally, "decomposer", media_kind, [&] {
      return detail::guard_backend("decomposer", [&] { return b_.decomposer->decompose(prompt, media_kind); });
    });
    DecompositionResult result{prompt.prompt_id, std::move(elements), fp, media_kind};
    validate_decomposition(result);
    std::unique_lock lock(mu_);
    return decompositions_.try_emplace(cache_key, std::move(result)).first->second;
  }

  DecompositionResult decompose(const PromptRecord& prompt, MediaKind media_kind) {
    CallTally t;
    return decompose(prompt, media_kind, t);
  }

  std::string caption(const VisualHandle& visual, CallTally& tally) {
    const auto cache_key = std::make_pair(visual.uri, b_.captioner->fingerprint());
    {
      std::shared_lock lock(mu_);
      if (auto it = captions_.find(cache_key); it != captions_.end()) {
        ++caption_cache_hits_;
        return it->second;
      }
    }
    std::string text = timed(*b_.clock, tally, "captioner", visual.media_kind, [&] {
      return detail::guard_backend("captioner", [&] { return b_.captioner->caption(visual); });
    });
    require(!trim(text).empty(), ErrorKind::empty_caption, "captioner returned nothing for '" + visual.uri + "'");
    std::unique_lock lock(mu_);
    return captions_.try_emplace(cache_key, std::move(text)).first->second;
  }

  std::string caption(const VisualHandle& visual) {
    CallTally t;
    return caption(visual, t);
  }

  Verdict nli_judge(const NliQuery& query, CallTally& tally, MediaKind media_kind = MediaKind::image) {
    require(!trim(query.premise).empty() && !trim(query.hypothesis).empty(), ErrorKind::invalid_argument,
            "NLI query needs a nonempty premise and hypothesis");
    const std::string raw = timed(*b_.clock, tally, "nli", media_kind, [&] {
      return detail::guard_backend("nli", [&] { return b_.nli->judge(query.premise, query.hypothesis, query.stage); });
    });
    Verdict v;
    v.label = normalize_nli_label(raw);
    v.stage = query.stage;
    v.evidence = query.premise;
    return v;
  }

  Verdict nli_judge(const NliQuery& query) {
    CallTally t;
    return nli_judge(query, t);
  }

  // Open-ended probe. Closed questions are rejected up front; a bare yes/no
  // answer gets one retry with an instruction to elaborate.
  std::string probe(const VisualHandle& visual, const std::string& question, CallTally& tally) {
    if (!is_open_ended_question(question))
      fail(ErrorKind::degenerate_answer, "closed-form probe question rejected: '" + question + "'");
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string answer = timed(*b_.clock, tally, "prober", visual.media_kind, [&] {
        return detail::guard_backend("prober", [&] { return b_.prober->probe(visual, question, attempt > 0); });
      });
      if (!trim(answer).empty() && !is_bare_yes_no(answer)) return answer;
    }
    fail(ErrorKind::degenerate_answer, "prober gave no descriptive answer to '" + question + "'");
  }

  std::string probe(const VisualHandle& visual, const std::string& question) {
    CallTally t;
    return probe(visual, question, t);
  }

  VerificationReport verify(const DecompositionResult& decomposition, const std::string& candidate_id,
                            const VisualHandle& visual, CallTally& tally) {
    require(decomposition.media_kind == visual.media_kind, ErrorKind::invalid_argument,
            "decomposition and visual disagree on media kind");
    VerificationReport report;
    report.candidate_id = candidate_id;
    report.caption = caption(visual, tally);
    for (const auto& element : decomposition.elements) {
      ElementVerdict ev;
      ev.element_id = element.element_id;
      ev.verdict = nli_judge({report.caption, element.text, VerdictStage::caption_nli}, tally, visual.media_kind);
      if (ev.verdict.label == NliLabel::neutral) {
        if (!options_.probing_enabled) {
          ev.verdict.label = NliLabel::contradiction;
          ev.verdict.coerced = true;
          ++coerced_;
        } else {
          const std::string& q = element.probe_question.value();
          ++probes_issued_;
          const std::string answer = probe(visual, q, tally);
          ev.verdict = nli_judge({answer, element.text, VerdictStage::probe_nli}, tally, visual.media_kind);
          ev.probe_question = q;
          if (ev.verdict.label == NliLabel::neutral) {
            ev.verdict.label = NliLabel::contradiction;
            ev.verdict.coerced = true;
            ++coerced_;
          }
        }
      }
      report.per_element.push_back(std::move(ev));
    }
    return report;
  }

  VerificationReport verify(const DecompositionResult& decomposition, const std::string& candidate_id,
                            const VisualHandle& visual) {
    CallTally t;
    return verify(decomposition, candidate_id, visual, t);
  }

  long probes_issued() const { return probes_issued_.load(); }
  long coerced_neutrals() const { return coerced_.load(); }
  long caption_cache_hits() const { return caption_cache_hits_.load(); }

 private:
  static void validate_decomposition(const DecompositionResult& d) {
    require(!d.elements.empty(), ErrorKind::empty_decomposition,
            "decomposer returned no elements for '" + d.prompt_id + "'");
    std::set<std::string> texts;
    for (std::size_t i = 0; i < d.elements.size(); ++i) {
      const auto& e = d.elements[i];
      auto bad = [&](const std::string& why) { fail(ErrorKind::backend_error, "decomposer output malformed: " + why); };
      if (e.element_id != static_cast<int>(i)) bad("element ids not contiguous from 0");
      if (trim(e.text).empty()) bad("empty element text");
      if (!texts.insert(ascii_lower(trim(e.text))).second) bad("duplicate element '" + e.text + "'");
      if (!e.probe_question) bad("element '" + e.text + "' lacks a probe question");
      if (!is_open_ended_question(*e.probe_question)) bad("closed probe question '" + *e.probe_question + "'");
      if (is_motion_level(e.semantic_category) && d.media_kind != MediaKind::video)
        bad("motion-level element '" + e.text + "' for an image prompt");
    }
  }

  BackendSet b_;
  VerifierOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::tuple<std::string, std::string, MediaKind>, DecompositionResult> decompositions_;
  std::map<std::pair<std::string, std::string>, std::string> captions_;
  std::atomic<long> probes_issued_{0};
  std::atomic<long> coerced_{0};
  std::atomic<long> caption_cache_hits_{0};
};

}  // namespace pris
