#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pris/backends/profile.hpp"

namespace pris::test {

inline std::filesystem::path source_dir() { return PRIS_SOURCE_DIR; }

inline SemanticElement element(int id, std::string text, Importance imp = Importance::core) {
  SemanticElement e;
  e.element_id = id;
  e.text = std::move(text);
  e.importance = imp;
  e.probe_question = "What can be seen?";
  return e;
}

inline std::vector<SemanticElement> elements(std::initializer_list<Importance> kinds) {
  std::vector<SemanticElement> out;
  for (auto k : kinds) out.push_back(element(static_cast<int>(out.size()), "element " + std::to_string(out.size()), k));
  return out;
}

inline VerificationReport report(const std::string& id, std::initializer_list<NliLabel> labels) {
  VerificationReport r;
  r.candidate_id = id;
  r.caption = "a caption";
  int i = 0;
  for (auto l : labels) {
    ElementVerdict ev;
    ev.element_id = i++;
    ev.verdict.label = l;
    r.per_element.push_back(ev);
  }
  return r;
}

// Candidate whose report entails exactly `hits` out of `n` core elements.
inline Candidate candidate(const std::string& id, int n, std::initializer_list<int> hits,
                           std::optional<double> reward = std::nullopt) {
  Candidate c;
  c.candidate_id = id;
  c.prompt_id = "p";
  VerificationReport r;
  r.candidate_id = id;
  r.caption = "a caption";
  for (int i = 0; i < n; ++i) {
    ElementVerdict ev;
    ev.element_id = i;
    ev.verdict.label = NliLabel::contradiction;
    r.per_element.push_back(ev);
  }
  for (int h : hits) r.per_element[static_cast<std::size_t>(h)].verdict.label = NliLabel::entailment;
  c.report = r;
  c.score = AlignmentScore{static_cast<int>(hits.size()), n, 0, 0};
  c.scalar_reward = reward;
  return c;
}

// One-element-per-clause world with independent controlled-English elements.
inline sim::SimWorld tiny_world(double omission = 0.0, double yes_bias = 0.0) {
  const std::string src = R"({
    "world_id": "tiny", "prompt_id": "tiny-prompt",
    "prompt": "A red cube is left of a blue sphere. A green apple is on the table.",
    "world_seed": 5, "caption_omission_prob": )" +
                          std::to_string(omission) + R"(, "yes_bias": )" + std::to_string(yes_bias) + R"(,
    "elements": [
      {"text": "the cube is red", "category": "property", "violation_text": "the cube is yellow",
       "probe_question": "What color is the cube?", "base_prob": 0.6},
      {"text": "the sphere is blue", "category": "property", "violation_text": "the sphere is orange",
       "probe_question": "What color is the sphere?", "base_prob": 0.6},
      {"text": "the apple is on the table", "category": "spatial", "violation_text": "the apple is under the table",
       "probe_question": "Where is the apple?", "base_prob": 0.5, "emphasis_gain": 0.9},
      {"text": "the apple is green", "importance": "extra", "category": "property",
       "violation_text": "the apple is purple", "probe_question": "What color is the apple?", "base_prob": 0.7}
    ]})";
  return Json::parse(src).get<sim::SimWorld>();
}

struct SimFixture {
  std::shared_ptr<sim::SimUniverse> universe;
  BackendSet backends;

  explicit SimFixture(std::vector<sim::SimWorld> worlds) {
    universe = std::make_shared<sim::SimUniverse>(std::move(worlds));
    backends = sim::make_simulated_backends(universe);
  }
};

inline BuiltBackends sim_profile_backends() {
  return build_backends(load_profile(source_dir() / "profiles" / "sim.json"));
}

}  // namespace pris::test
