#pragma once

// Canonical record encoding: one JSON object per line, keys sorted, no
// insignificant whitespace. Every record carries `schema` and `type`.

#include <json.hpp>

#include <string>
#include <string_view>

#include "pris/core/types.hpp"

namespace pris {

using Json = nlohmann::json;

inline constexpr std::string_view record_schema = "pris/1";

inline Json make_record(std::string_view type, Json body = Json::object()) {
  body["schema"] = record_schema;
  body["type"] = type;
  return body;
}

inline std::string canonical(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::strict); }

inline Json parse_record(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("unparseable record: ") + e.what());
  }
  require(j.is_object() && j.value("schema", "") == record_schema, ErrorKind::invalid_argument,
          "record has wrong or missing schema");
  return j;
}

template <typename T>
T field(const Json& j, const char* name) {
  require(j.is_object() && j.contains(name), ErrorKind::invalid_argument,
          std::string("record lacks field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("field '") + name + "': " + e.what());
  }
}

// --- to/from JSON for domain types (found by ADL) ---------------------------

inline void to_json(Json& j, const Provenance& p) {
  j = Json{{"kind", to_string(p.kind)}};
  if (p.kind != ProvenanceKind::user) j["parent_id"] = p.parent_id;
  if (p.kind == ProvenanceKind::revised) j["iteration"] = p.iteration;
}
inline void from_json(const Json& j, Provenance& p) {
  p.kind = parse_provenance(field<std::string>(j, "kind"));
  p.parent_id = j.value("parent_id", std::string{});
  p.iteration = j.value("iteration", 0);
}

inline void to_json(Json& j, const PromptRecord& r) {
  j = Json{{"prompt_id", r.prompt_id}, {"text", r.text}, {"provenance", r.provenance}};
  if (r.category) j["category"] = *r.category;
}
inline void from_json(const Json& j, PromptRecord& r) {
  r.prompt_id = field<std::string>(j, "prompt_id");
  r.text = field<std::string>(j, "text");
  r.provenance = j.contains("provenance") ? j.at("provenance").get<Provenance>() : Provenance{};
  if (j.contains("category") && !j.at("category").is_null()) r.category = j.at("category").get<std::string>();
  r.validate();
}

inline void to_json(Json& j, const SemanticElement& e) {
  j = Json{{"element_id", e.element_id},
           {"text", e.text},
           {"importance", to_string(e.importance)},
           {"semantic_category", to_string(e.semantic_category)}};
  if (e.probe_question) j["probe_question"] = *e.probe_question;
}
inline void from_json(const Json& j, SemanticElement& e) {
  e.element_id = field<int>(j, "element_id");
  e.text = field<std::string>(j, "text");
  e.importance = parse_importance(field<std::string>(j, "importance"));
  e.semantic_category = parse_category(j.value("semantic_category", std::string("other")));
  if (j.contains("probe_question") && !j.at("probe_question").is_null())
    e.probe_question = j.at("probe_question").get<std::string>();
  e.validate();
}

inline void to_json(Json& j, const Verdict& v) {
  j = Json{{"label", to_string(v.label)}, {"stage", to_string(v.stage)}, {"evidence", v.evidence}};
  if (v.confidence) j["confidence"] = *v.confidence;
  if (v.coerced) j["coerced"] = true;
}
inline void from_json(const Json& j, Verdict& v) {
  v.label = parse_label(field<std::string>(j, "label"));
  v.stage = parse_stage(field<std::string>(j, "stage"));
  v.evidence = field<std::string>(j, "evidence");
  if (j.contains("confidence")) v.confidence = j.at("confidence").get<double>();
  v.coerced = j.value("coerced", false);
}

inline void to_json(Json& j, const ElementVerdict& ev) {
  j = Json{{"element_id", ev.element_id}, {"verdict", ev.verdict}};
  if (ev.probe_question) j["probe_question"] = *ev.probe_question;
}
inline void from_json(const Json& j, ElementVerdict& ev) {
  ev.element_id = field<int>(j, "element_id");
  ev.verdict = field<Verdict>(j, "verdict");
  if (j.contains("probe_question")) ev.probe_question = j.at("probe_question").get<std::string>();
}

inline void to_json(Json& j, const VerificationReport& r) {
  j = Json{{"candidate_id", r.candidate_id}, {"per_element", r.per_element}, {"caption", r.caption}};
}
inline void from_json(const Json& j, VerificationReport& r) {
  r.candidate_id = field<std::string>(j, "candidate_id");
  r.per_element = field<std::vector<ElementVerdict>>(j, "per_element");
  r.caption = field<std::string>(j, "caption");
}

inline void to_json(Json& j, const AlignmentScore& s) {
  j = Json{{"core_hits", s.core_hits},
           {"core_total", s.core_total},
           {"extra_hits", s.extra_hits},
           {"extra_total", s.extra_total}};
}
inline void from_json(const Json& j, AlignmentScore& s) {
  s.core_hits = field<int>(j, "core_hits");
  s.core_total = field<int>(j, "core_total");
  s.extra_hits = field<int>(j, "extra_hits");
  s.extra_total = field<int>(j, "extra_total");
  s.validate();
}

inline void to_json(Json& j, const VisualHandle& v) {
  j = Json{{"media_kind", to_string(v.media_kind)}, {"frame_count", v.frame_count}, {"uri", v.uri}};
}
inline void from_json(const Json& j, VisualHandle& v) {
  v.media_kind = parse_media_kind(field<std::string>(j, "media_kind"));
  v.frame_count = j.value("frame_count", 1);
  v.uri = field<std::string>(j, "uri");
}

inline void to_json(Json& j, const Candidate& c) {
  j = Json{{"candidate_id", c.candidate_id}, {"prompt_id", c.prompt_id}, {"seed", c.seed}, {"visual", c.visual}};
  if (c.report) j["report"] = *c.report;
  if (c.score) j["score"] = *c.score;
  if (c.scalar_reward) j["scalar_reward"] = *c.scalar_reward;
}
inline void from_json(const Json& j, Candidate& c) {
  c.candidate_id = field<std::string>(j, "candidate_id");
  c.prompt_id = field<std::string>(j, "prompt_id");
  c.seed = field<std::uint64_t>(j, "seed");
  c.visual = field<VisualHandle>(j, "visual");
  if (j.contains("report")) c.report = j.at("report").get<VerificationReport>();
  if (j.contains("score")) c.score = j.at("score").get<AlignmentScore>();
  if (j.contains("scalar_reward")) c.scalar_reward = j.at("scalar_reward").get<double>();
}

}  // namespace pris
