#pragma once

// Symbolic world model behind the simulated backends. A world declares a
// prompt, its atomic elements and, per element, how likely a generator is to
// realize it and how strongly prompt emphasis helps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pris/backends/fact_logic.hpp"
#include "pris/core/hash.hpp"
#include "pris/core/prng.hpp"
#include "pris/core/records.hpp"

namespace pris::sim {

struct SimElement {
  SemanticElement element;
  std::string violation_text;              // what a caption says when unsatisfied
  std::optional<std::string> reinforcement;  // affirmative phrasing used by the rewriter
  double base_prob = 0.5;
  double emphasis_gain = 0.0;
  double affinity_spread = 0.0;  // seed affinity multiplier lies in [1 - s, 1 + s]
};

struct SimWorld {
  std::string world_id;
  std::string prompt_id;
  std::string prompt;
  std::optional<std::string> category;
  MediaKind media_kind = MediaKind::image;
  int frame_count = 1;
  std::uint64_t world_seed = 0;
  std::vector<SimElement> elements;
  double caption_omission_prob = 0.0;
  double yes_bias = 0.0;
  double reward_noise = 0.0;
  double prompt_sensitivity = 0.0;  // chance a draw is re-keyed by the prompt text
  int focus_capacity = 2;           // emphasized elements before emphasis dilutes
  double generation_failure_prob = 0.0;
  std::string expansion_suffix = ", highly detailed, sharp focus, natural lighting";

  PromptRecord prompt_record() const {
    PromptRecord r{prompt_id.empty() ? world_id : prompt_id, prompt, category, Provenance::user()};
    return r;
  }

  std::vector<SemanticElement> semantic_elements() const {
    std::vector<SemanticElement> out;
    for (const auto& e : elements) out.push_back(e.element);
    return out;
  }

  const SimElement* find_by_text(std::string_view text) const {
    const std::string t = ascii_lower(trim(text));
    for (const auto& e : elements)
      if (ascii_lower(e.element.text) == t) return &e;
    return nullptr;
  }

  std::string marker(const SimElement& e) const {
    return "Make sure that " + e.reinforcement.value_or(e.element.text) + ".";
  }

  // Emphasis per element read from the prompt text. Emphasis beyond
  // `focus_capacity` elements is spread thin.
  std::vector<double> emphasis(std::string_view prompt_text) const {
    std::vector<double> e(elements.size(), 0.0);
    int count = 0;
    for (std::size_t i = 0; i < elements.size(); ++i) {
      if (prompt_text.find(marker(elements[i])) != std::string_view::npos) {
        e[i] = 1.0;
        ++count;
      }
    }
    if (count > focus_capacity) {
      const double share = double(focus_capacity) / count;
      for (auto& v : e) v *= share;
    }
    return e;
  }

  double seed_affinity(std::size_t i, std::uint64_t seed) const {
    const double s = elements[i].affinity_spread;
    return 1.0 + s * (2.0 * KeyedRng::uniform({world_seed, seed, i, key(Stream::affinity)}) - 1.0);
  }

  double satisfaction_prob(std::size_t i, double emphasis_level, std::uint64_t seed) const {
    const auto& el = elements[i];
    const double boosted = std::clamp(el.base_prob + el.emphasis_gain * emphasis_level * (1.0 - el.base_prob), 0.0, 1.0);
    return std::clamp(boosted * seed_affinity(i, seed), 0.0, 1.0);
  }

  std::vector<bool> draw_satisfaction(std::string_view prompt_text, std::uint64_t seed) const {
    const auto emph = emphasis(prompt_text);
    const std::uint64_t pkey = stable_hash64(prompt_text);
    std::vector<bool> sat(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i) {
      double u = KeyedRng::uniform({world_seed, seed, i, key(Stream::satisfy)});
      if (prompt_sensitivity > 0.0 &&
          KeyedRng::uniform({world_seed, seed, i, pkey, key(Stream::prompt_gate)}) < prompt_sensitivity)
        u = KeyedRng::uniform({world_seed, seed, i, pkey, key(Stream::prompt_draw)});
      sat[i] = u < satisfaction_prob(i, emph[i], seed);
    }
    return sat;
  }

  void validate() const {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    auto bad = [&](const std::string& m) { fail(ErrorKind::invalid_argument, "world '" + world_id + "': " + m); };
    if (world_id.empty() || world_id.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_-") != std::string::npos)
      bad("world_id must be [a-z0-9_-]+");
    if (trim(prompt).empty()) bad("empty prompt");
    if (elements.empty()) bad("no elements");
    if (!in_unit(caption_omission_prob) || !in_unit(yes_bias) || !in_unit(prompt_sensitivity) ||
        !in_unit(generation_failure_prob))
      bad("probabilities must lie in [0,1]");
    if (reward_noise < 0.0) bad("negative reward noise");
    if (focus_capacity < 1) bad("focus_capacity must be positive");
    auto se = semantic_elements();
    validate_element_list(se);
    for (std::size_t i = 0; i < elements.size(); ++i) {
      const auto& e = elements[i];
      const std::string& t = e.element.text;
      if (!in_unit(e.base_prob) || !in_unit(e.emphasis_gain) || !in_unit(e.affinity_spread))
        bad("element parameters must lie in [0,1]");
      if (!e.element.probe_question) bad("element '" + t + "' lacks a probe question");
      if (is_motion_level(e.element.semantic_category) && media_kind != MediaKind::video)
        bad("motion-level element '" + t + "' in an image world");
      if (entail(t, t) != NliLabel::entailment) bad("element '" + t + "' does not entail itself");
      if (entail(prompt, t) != NliLabel::entailment) bad("prompt does not entail '" + t + "'");
      if (entail(e.violation_text, t) != NliLabel::contradiction)
        bad("violation '" + e.violation_text + "' does not contradict '" + t + "'");
      if (e.reinforcement && entail(*e.reinforcement, t) != NliLabel::entailment)
        bad("reinforcement does not entail '" + t + "'");
      for (std::size_t j = 0; j < elements.size(); ++j) {
        if (i == j) continue;
        const std::string& u = elements[j].element.text;
        if (ascii_lower(t) == ascii_lower(u)) bad("duplicate element text '" + t + "'");
        if (entail(t, u) != NliLabel::neutral || entail(e.violation_text, u) != NliLabel::neutral)
          bad("elements '" + t + "' and '" + u + "' are not independent");
      }
    }
  }
};

inline std::string default_probe_question(std::string_view element_text) {
  return "What does the visual show regarding this detail: " + std::string(element_text) + "?";
}

inline void to_json(Json& j, const SimElement& e) {
  j = Json{{"text", e.element.text},
           {"importance", to_string(e.element.importance)},
           {"category", to_string(e.element.semantic_category)},
           {"violation_text", e.violation_text},
           {"base_prob", e.base_prob},
           {"emphasis_gain", e.emphasis_gain},
           {"affinity_spread", e.affinity_spread}};
  if (e.element.probe_question) j["probe_question"] = *e.element.probe_question;
  if (e.reinforcement) j["reinforcement"] = *e.reinforcement;
}

inline void to_json(Json& j, const SimWorld& w) {
  j = Json{{"world_id", w.world_id},
           {"prompt_id", w.prompt_id},
           {"prompt", w.prompt},
           {"media_kind", to_string(w.media_kind)},
           {"frame_count", w.frame_count},
           {"world_seed", w.world_seed},
           {"elements", w.elements},
           {"caption_omission_prob", w.caption_omission_prob},
           {"yes_bias", w.yes_bias},
           {"reward_noise", w.reward_noise},
           {"prompt_sensitivity", w.prompt_sensitivity},
           {"focus_capacity", w.focus_capacity},
           {"generation_failure_prob", w.generation_failure_prob},
           {"expansion_suffix", w.expansion_suffix}};
  if (w.category) j["category"] = *w.category;
}

inline void from_json(const Json& j, SimWorld& w) {
  w.world_id = field<std::string>(j, "world_id");
  w.prompt_id = j.value("prompt_id", w.world_id);
  w.prompt = field<std::string>(j, "prompt");
  if (j.contains("category")) w.category = j.at("category").get<std::string>();
  w.media_kind = parse_media_kind(j.value("media_kind", std::string("image")));
  w.frame_count = j.value("frame_count", w.media_kind == MediaKind::video ? 81 : 1);
  w.world_seed = j.value("world_seed", std::uint64_t{0});
  w.caption_omission_prob = j.value("caption_omission_prob", 0.0);
  w.yes_bias = j.value("yes_bias", 0.0);
  w.reward_noise = j.value("reward_noise", 0.0);
  w.prompt_sensitivity = j.value("prompt_sensitivity", 0.0);
  w.focus_capacity = j.value("focus_capacity", 2);
  w.generation_failure_prob = j.value("generation_failure_prob", 0.0);
  w.expansion_suffix = j.value("expansion_suffix", w.expansion_suffix);
  w.elements.clear();
  int id = 0;
  for (const auto& ej : field<Json>(j, "elements")) {
    SimElement e;
    e.element.element_id = id++;
    e.element.text = field<std::string>(ej, "text");
    e.element.importance = parse_importance(ej.value("importance", std::string("core")));
    e.element.semantic_category = parse_category(ej.value("category", std::string("other")));
    e.element.probe_question = ej.value("probe_question", default_probe_question(e.element.text));
    e.violation_text = field<std::string>(ej, "violation_text");
    if (ej.contains("reinforcement")) e.reinforcement = ej.at("reinforcement").get<std::string>();
    e.base_prob = ej.value("base_prob", 0.5);
    e.emphasis_gain = ej.value("emphasis_gain", 0.0);
    e.affinity_spread = ej.value("affinity_spread", 0.0);
    w.elements.push_back(std::move(e));
  }
}

}  // namespace pris::sim
