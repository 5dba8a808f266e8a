#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pris/core/errors.hpp"

namespace pris {

// ---------------------------------------------------------------------------
// Enumerations and their canonical spellings
// ---------------------------------------------------------------------------

enum class Importance { core, extra };

enum class SemanticCategory {
  object_presence,
  property,
  spatial,
  object_motion,
  camera,
  transition,
  temporal_order,
  other,
};

enum class NliLabel { entailment, neutral, contradiction };

enum class VerdictStage { caption_nli, probe_nli };

enum class MediaKind { image, video };

enum class ProvenanceKind { user, expanded, revised };

namespace detail {

template <typename Enum, std::size_t N>
struct EnumNames {
  std::array<std::pair<Enum, std::string_view>, N> entries;

  constexpr std::string_view name(Enum value) const {
    for (const auto& [e, s] : entries)
      if (e == value) return s;
    return "?";
  }

  Enum parse(std::string_view text, std::string_view what) const {
    for (const auto& [e, s] : entries)
      if (s == text) return e;
    fail(ErrorKind::invalid_argument, "unknown " + std::string(what) + " '" + std::string(text) + "'");
  }
};

inline constexpr EnumNames<Importance, 2> importance_names{
    {{{Importance::core, "core"}, {Importance::extra, "extra"}}}};

inline constexpr EnumNames<SemanticCategory, 8> category_names{{{
    {SemanticCategory::object_presence, "object_presence"},
    {SemanticCategory::property, "property"},
    {SemanticCategory::spatial, "spatial"},
    {SemanticCategory::object_motion, "object_motion"},
    {SemanticCategory::camera, "camera"},
    {SemanticCategory::transition, "transition"},
    {SemanticCategory::temporal_order, "temporal_order"},
    {SemanticCategory::other, "other"},
}}};

inline constexpr EnumNames<NliLabel, 3> label_names{{{
    {NliLabel::entailment, "entailment"},
    {NliLabel::neutral, "neutral"},
    {NliLabel::contradiction, "contradiction"},
}}};

inline constexpr EnumNames<VerdictStage, 2> stage_names{
    {{{VerdictStage::caption_nli, "caption_nli"}, {VerdictStage::probe_nli, "probe_nli"}}}};

inline constexpr EnumNames<MediaKind, 2> media_names{
    {{{MediaKind::image, "image"}, {MediaKind::video, "video"}}}};

inline constexpr EnumNames<ProvenanceKind, 3> provenance_names{{{
    {ProvenanceKind::user, "user"},
    {ProvenanceKind::expanded, "expanded"},
    {ProvenanceKind::revised, "revised"},
}}};

}  // namespace detail

inline std::string_view to_string(Importance v) { return detail::importance_names.name(v); }
inline std::string_view to_string(SemanticCategory v) { return detail::category_names.name(v); }
inline std::string_view to_string(NliLabel v) { return detail::label_names.name(v); }
inline std::string_view to_string(VerdictStage v) { return detail::stage_names.name(v); }
inline std::string_view to_string(MediaKind v) { return detail::media_names.name(v); }
inline std::string_view to_string(ProvenanceKind v) { return detail::provenance_names.name(v); }

inline Importance parse_importance(std::string_view s) { return detail::importance_names.parse(s, "importance"); }
inline SemanticCategory parse_category(std::string_view s) { return detail::category_names.parse(s, "semantic category"); }
inline NliLabel parse_label(std::string_view s) { return detail::label_names.parse(s, "label"); }
inline VerdictStage parse_stage(std::string_view s) { return detail::stage_names.parse(s, "stage"); }
inline MediaKind parse_media_kind(std::string_view s) { return detail::media_names.parse(s, "media kind"); }
inline ProvenanceKind parse_provenance(std::string_view s) { return detail::provenance_names.parse(s, "provenance"); }

// Motion-level categories are only meaningful for video.
constexpr bool is_motion_level(SemanticCategory c) {
  return c == SemanticCategory::object_motion || c == SemanticCategory::camera ||
         c == SemanticCategory::transition || c == SemanticCategory::temporal_order;
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::user;
  int iteration = 0;          // revision round, revised only
  std::string parent_id;      // empty for user prompts

  static Provenance user() { return {}; }
  static Provenance expanded(std::string parent) { return {ProvenanceKind::expanded, 0, std::move(parent)}; }
  static Provenance revised(int iteration, std::string parent) {
    return {ProvenanceKind::revised, iteration, std::move(parent)};
  }

  bool operator==(const Provenance&) const = default;
};

struct PromptRecord {
  std::string prompt_id;
  std::string text;
  std::optional<std::string> category;
  Provenance provenance;

  void validate() const {
    require(!prompt_id.empty(), ErrorKind::invalid_argument, "prompt_id is empty");
    require(!text.empty(), ErrorKind::invalid_argument, "prompt '" + prompt_id + "' has empty text");
    if (provenance.kind == ProvenanceKind::user) {
      require(provenance.parent_id.empty(), ErrorKind::invalid_argument, "user prompt carries a parent");
    } else {
      require(!provenance.parent_id.empty(), ErrorKind::invalid_argument,
              "derived prompt '" + prompt_id + "' has no parent");
      require(provenance.parent_id != prompt_id, ErrorKind::invalid_argument, "prompt is its own parent");
    }
  }

  bool operator==(const PromptRecord&) const = default;
};

// Append-only set of prompts. A child can only be added once its parent is
// present, so the provenance graph is a forest by construction.
class PromptLineage {
 public:
  void add(const PromptRecord& record) {
    record.validate();
    require(find(record.prompt_id) == nullptr, ErrorKind::invalid_argument,
            "duplicate prompt id '" + record.prompt_id + "'");
    if (record.provenance.kind != ProvenanceKind::user) {
      require(find(record.provenance.parent_id) != nullptr, ErrorKind::invalid_argument,
              "parent '" + record.provenance.parent_id + "' of '" + record.prompt_id + "' is unknown");
    }
    records_.push_back(record);
  }

  const PromptRecord* find(std::string_view id) const {
    for (const auto& r : records_)
      if (r.prompt_id == id) return &r;
    return nullptr;
  }

  // Root-first chain ending at `id`.
  std::vector<PromptRecord> chain(std::string_view id) const {
    std::vector<PromptRecord> out;
    const PromptRecord* cur = find(id);
    while (cur != nullptr) {
      out.push_back(*cur);
      cur = cur->provenance.kind == ProvenanceKind::user ? nullptr : find(cur->provenance.parent_id);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  const std::vector<PromptRecord>& records() const { return records_; }

 private:
  std::vector<PromptRecord> records_;
};

// ---------------------------------------------------------------------------
// Elements and verdicts
// ---------------------------------------------------------------------------

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Closed-question auxiliaries; an open-ended probe may not start with one.
inline constexpr std::array<std::string_view, 14> closed_question_auxiliaries = {
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "has", "have", "had"};

inline bool is_open_ended_question(std::string_view question) {
  const std::string q = ascii_lower(trim(question));
  if (q.empty()) return false;
  std::size_t end = 0;
  while (end < q.size() && std::isalpha(static_cast<unsigned char>(q[end]))) ++end;
  const std::string_view first(q.data(), end);
  return std::find(closed_question_auxiliaries.begin(), closed_question_auxiliaries.end(), first) ==
         closed_question_auxiliaries.end();
}

struct SemanticElement {
  int element_id = 0;
  std::string text;
  Importance importance = Importance::core;
  SemanticCategory semantic_category = SemanticCategory::other;
  std::optional<std::string> probe_question;

  void validate() const {
    require(element_id >= 0, ErrorKind::invalid_argument, "negative element id");
    require(!trim(text).empty(), ErrorKind::invalid_argument, "element text is empty");
    if (probe_question) {
      require(is_open_ended_question(*probe_question), ErrorKind::invalid_argument,
              "probe question is closed-form: '" + *probe_question + "'");
    }
  }

  bool operator==(const SemanticElement&) const = default;
};

inline void validate_element_list(const std::vector<SemanticElement>& elements) {
  for (std::size_t i = 0; i < elements.size(); ++i) {
    elements[i].validate();
    require(elements[i].element_id == static_cast<int>(i), ErrorKind::invalid_argument,
            "element ids must be contiguous from 0");
  }
}

struct Verdict {
  NliLabel label = NliLabel::neutral;
  VerdictStage stage = VerdictStage::caption_nli;
  std::string evidence;
  std::optional<double> confidence;
  bool coerced = false;  // residual probe-stage neutral forced to contradiction

  bool operator==(const Verdict&) const = default;
};

struct ElementVerdict {
  int element_id = 0;
  Verdict verdict;
  std::optional<std::string> probe_question;  // set when the probe stage ran

  bool operator==(const ElementVerdict&) const = default;
};

struct VerificationReport {
  std::string candidate_id;
  std::vector<ElementVerdict> per_element;
  std::string caption;

  const ElementVerdict* find(int element_id) const {
    for (const auto& ev : per_element)
      if (ev.element_id == element_id) return &ev;
    return nullptr;
  }

  bool entailed(int element_id) const {
    const auto* ev = find(element_id);
    return ev != nullptr && ev->verdict.label == NliLabel::entailment;
  }

  bool operator==(const VerificationReport&) const = default;
};

// ---------------------------------------------------------------------------
// Scores and candidates
// ---------------------------------------------------------------------------

struct AlignmentScore {
  int core_hits = 0;
  int core_total = 0;
  int extra_hits = 0;
  int extra_total = 0;

  void validate() const {
    require(core_hits >= 0 && extra_hits >= 0 && core_total >= 0 && extra_total >= 0,
            ErrorKind::invalid_argument, "negative score component");
    require(core_hits <= core_total && extra_hits <= extra_total, ErrorKind::invalid_argument,
            "score hits exceed totals");
  }

  double core_accuracy() const { return core_total == 0 ? 0.0 : double(core_hits) / core_total; }
  double extra_accuracy() const { return extra_total == 0 ? 0.0 : double(extra_hits) / extra_total; }

  bool operator==(const AlignmentScore&) const = default;
};

struct VisualHandle {
  MediaKind media_kind = MediaKind::image;
  int frame_count = 1;
  std::string uri;

  bool operator==(const VisualHandle&) const = default;
};

struct Candidate {
  std::string candidate_id;
  std::string prompt_id;
  std::uint64_t seed = 0;
  VisualHandle visual;
  std::optional<VerificationReport> report;
  std::optional<AlignmentScore> score;
  std::optional<double> scalar_reward;

  bool operator==(const Candidate&) const = default;
};

}  // namespace pris
