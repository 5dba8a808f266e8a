#pragma once

// Deterministic simulated backends. Every capability reads the same immutable
// SimUniverse; visuals are symbolic and carry their satisfaction set in the
// handle URI, so captioning and probing are pure functions of the handle.

#include <cctype>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pris/backends/fact_logic.hpp"
#include "pris/backends/interfaces.hpp"
#include "pris/backends/sim_world.hpp"

namespace pris::sim {

struct SimVisual {
  const SimWorld* world = nullptr;
  std::uint64_t seed = 0;
  std::uint64_t prompt_key = 0;
  std::vector<bool> satisfied;
};

class SimUniverse {
 public:
  SimUniverse() = default;
  explicit SimUniverse(std::vector<SimWorld> worlds) {
    for (auto& w : worlds) add(std::move(w));
  }

  void add(SimWorld world) {
    world.validate();
    const std::string id = world.world_id;
    require(!worlds_.count(id), ErrorKind::invalid_argument, "duplicate world '" + id + "'");
    worlds_.emplace(id, std::make_shared<const SimWorld>(std::move(world)));
  }

  const SimWorld& world(std::string_view id) const {
    auto it = worlds_.find(std::string(id));
    if (it == worlds_.end()) fail(ErrorKind::backend_error, "simulated world '" + std::string(id) + "' is unknown");
    return *it->second;
  }

  // The world whose prompt is the longest prefix of `text`. Revisions only
  // ever append to their parent, so this resolves every derived prompt.
  const SimWorld* world_for_prompt(std::string_view text) const {
    const SimWorld* best = nullptr;
    for (const auto& [id, w] : worlds_) {
      if (text.substr(0, w->prompt.size()) == w->prompt && (!best || w->prompt.size() > best->prompt.size()))
        best = w.get();
    }
    return best;
  }

  const SimWorld* world_for_exact_prompt(std::string_view text) const {
    for (const auto& [id, w] : worlds_)
      if (w->prompt == trim(text)) return w.get();
    return nullptr;
  }

  std::string fingerprint() const {
    Json j = Json::array();
    for (const auto& [id, w] : worlds_) j.push_back(*w);
    return "sim-v1:" + sha256_hex(canonical(j)).substr(0, 12);
  }

  static std::string encode_satisfaction(const std::vector<bool>& sat) {
    std::string hex;
    for (std::size_t i = 0; i < sat.size(); i += 4) {
      int nibble = 0;
      for (std::size_t b = 0; b < 4 && i + b < sat.size(); ++b)
        if (sat[i + b]) nibble |= 1 << b;
      hex.push_back("0123456789abcdef"[nibble]);
    }
    return hex;
  }

  VisualHandle make_visual(const SimWorld& w, std::uint64_t seed, std::uint64_t prompt_key, int steps, bool cfg,
                           const std::vector<bool>& sat) const {
    char pk[17];
    std::snprintf(pk, sizeof pk, "%016llx", static_cast<unsigned long long>(prompt_key));
    std::ostringstream uri;
    uri << "sim://" << w.world_id << "/" << seed << "/" << pk << "/s" << steps << (cfg ? "c" : "u") << "/"
        << encode_satisfaction(sat);
    return VisualHandle{w.media_kind, w.frame_count, uri.str()};
  }

  SimVisual decode(const VisualHandle& visual) const {
    const std::string& uri = visual.uri;
    auto malformed = [&] { fail(ErrorKind::backend_error, "not a simulated visual: '" + uri + "'"); };
    if (uri.rfind("sim://", 0) != 0) malformed();
    std::vector<std::string> parts;
    std::stringstream ss(uri.substr(6));
    for (std::string p; std::getline(ss, p, '/');) parts.push_back(p);
    if (parts.size() != 5) malformed();
    SimVisual v;
    v.world = &world(parts[0]);
    try {
      v.seed = std::stoull(parts[1]);
      v.prompt_key = std::stoull(parts[2], nullptr, 16);
    } catch (const std::exception&) {
      malformed();
    }
    const std::string& hex = parts[4];
    const std::size_t n = v.world->elements.size();
    if (hex.size() != (n + 3) / 4) malformed();
    v.satisfied.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      const char c = hex[i / 4];
      const int nibble = std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : c - 'a' + 10;
      if (nibble < 0 || nibble > 15) malformed();
      v.satisfied[i] = (nibble >> (i % 4)) & 1;
    }
    return v;
  }

  std::size_t size() const { return worlds_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const SimWorld>> worlds_;
};

// Sentence describing the element's actual state in a visual.
inline std::string state_text(const SimElement& e, bool satisfied) {
  return satisfied ? e.element.text : e.violation_text;
}

inline std::string sentence(std::string s) {
  s = trim(s);
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (!s.empty() && s.back() != '.') s.push_back('.');
  return s;
}

class SimGenerator final : public Generator {
 public:
  explicit SimGenerator(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  VisualHandle generate(const PromptRecord& prompt, std::uint64_t seed, int steps, bool cfg, MediaKind,
                        const Json&) override {
    const SimWorld* w = u_->world_for_prompt(prompt.text);
    if (!w) fail(ErrorKind::backend_error, "simulated generator has no world for prompt '" + prompt.text + "'");
    const std::uint64_t pkey = stable_hash64(prompt.text);
    if (w->generation_failure_prob > 0.0 &&
        KeyedRng::uniform({w->world_seed, seed, pkey, key(Stream::generation_failure)}) < w->generation_failure_prob)
      fail(ErrorKind::backend_error, "simulated generation failure (seed " + std::to_string(seed) + ")");
    return u_->make_visual(*w, seed, pkey, steps, cfg, w->draw_satisfaction(prompt.text, seed));
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/generator"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

class SimCaptioner final : public Captioner {
 public:
  explicit SimCaptioner(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  std::string caption(const VisualHandle& visual) override {
    const SimVisual v = u_->decode(visual);
    const SimWorld& w = *v.world;
    const std::uint64_t vkey = stable_hash64(visual.uri);
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < w.elements.size(); ++i) {
      if (w.caption_omission_prob > 0.0 &&
          KeyedRng::uniform({w.world_seed, v.seed, i, vkey, key(Stream::omission)}) < w.caption_omission_prob)
        continue;
      parts.push_back(state_text(w.elements[i], v.satisfied[i]));
    }
    if (parts.empty()) return "The scene is shown.";
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!out.empty()) out += " ";
      if (w.media_kind == MediaKind::video) out += (i == 0 ? "At first, " : "Then, ") + parts[i] + ".";
      else out += sentence(parts[i]);
    }
    return out;
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/captioner"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

class SimProber final : public Prober {
 public:
  explicit SimProber(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  std::string probe(const VisualHandle& visual, const std::string& question, bool) override {
    const SimVisual v = u_->decode(visual);
    const SimWorld& w = *v.world;
    const std::string q = trim(question);
    for (std::size_t i = 0; i < w.elements.size(); ++i) {
      const auto& pq = w.elements[i].element.probe_question;
      if (pq && trim(*pq) == q) return sentence(state_text(w.elements[i], v.satisfied[i]));
    }
    // Generic attribute questions: "what color is the cube?"
    const auto t = tokenize(q);
    if (t.size() >= 4 && t[0] == "what" && (t[2] == "is" || t[2] == "are")) {
      const std::string cls = t[1];
      std::size_t n = 3;
      while (n < t.size() && lexicon::is_determiner(t[n])) ++n;
      if (n < t.size()) {
        const std::string noun = lemma(t.back());
        for (std::size_t i = 0; i < w.elements.size(); ++i) {
          for (const auto& f : extract_facts(state_text(w.elements[i], v.satisfied[i]))) {
            if (f.kind == FactKind::attr && f.subject == noun && f.key == cls)
              return sentence("the " + noun + " is " + f.value);
          }
        }
      }
    }
    return "Nothing specific about that can be made out.";
  }

  std::string ask_binary(const VisualHandle& visual, const std::string& question) override {
    const SimVisual v = u_->decode(visual);
    const SimWorld& w = *v.world;
    std::string q = trim(question);
    const std::string prefix = "Is it true that ";
    if (q.rfind(prefix, 0) == 0) q = q.substr(prefix.size());
    if (!q.empty() && q.back() == '?') q.pop_back();
    const SimElement* e = w.find_by_text(q);
    if (!e) return "no";
    const auto i = static_cast<std::uint64_t>(e->element.element_id);
    if (v.satisfied[i]) return "yes";
    const double u = KeyedRng::uniform({w.world_seed, v.seed, i, stable_hash64(visual.uri), key(Stream::yes_bias)});
    return u < w.yes_bias ? "yes" : "no";
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/prober"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

// Exact oracle over controlled-English facts; needs no world.
class SimNli final : public NliModel {
 public:
  std::string judge(const std::string& premise, const std::string& hypothesis, VerdictStage) override {
    return std::string(to_string(entail(premise, hypothesis)));
  }
  std::string fingerprint() const override { return "sim-nli-v1"; }
};

// Identity on declared elements.
class SimDecomposer final : public Decomposer {
 public:
  explicit SimDecomposer(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  std::vector<SemanticElement> decompose(const PromptRecord& prompt, MediaKind) override {
    const SimWorld* w = u_->world_for_exact_prompt(prompt.text);
    if (!w) fail(ErrorKind::backend_error, "simulated decomposer knows no prompt '" + prompt.text + "'");
    return w->semantic_elements();
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/decomposer"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

class SimRewriter final : public Rewriter {
 public:
  explicit SimRewriter(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  std::vector<std::string> rewrite(const RewriteRequest& req) override {
    const SimWorld* w = u_->world_for_prompt(req.parent_text);
    if (!w) fail(ErrorKind::backend_error, "simulated rewriter has no world for '" + req.parent_text + "'");
    std::vector<std::string> out;
    for (int j = 0; j < req.variant_count; ++j) {
      std::string text = req.parent_text;
      switch (req.mode) {
        case RevisionMode::failure_targeted:
        case RevisionMode::per_sample: {
          bool added = false;
          for (const auto& f : req.failures) {
            const SimElement* e = w->find_by_text(f);
            if (!e) continue;
            const std::string m = w->marker(*e);
            if (text.find(m) == std::string::npos) {
              text += " " + m;
              added = true;
            }
          }
          if (j > 0 || !added) text += " Variant " + std::to_string(j + 1) + ".";
          break;
        }
        case RevisionMode::exploration:
          text += " Alternative composition " + std::to_string(j + 1) + ".";
          break;
        case RevisionMode::standard_expansion:
          text += w->expansion_suffix;
          if (j > 0) text += ", variant " + std::to_string(j + 1);
          break;
      }
      if (req.attempt > 0) text += " Described precisely.";
      out.push_back(std::move(text));
    }
    return out;
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/rewriter"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

// Satisfied fraction plus keyed Gaussian noise.
class SimReward final : public RewardModel {
 public:
  explicit SimReward(std::shared_ptr<const SimUniverse> u) : u_(std::move(u)) {}

  double reward(const PromptRecord&, const VisualHandle& visual) override {
    const SimVisual v = u_->decode(visual);
    const SimWorld& w = *v.world;
    const auto hits = std::count(v.satisfied.begin(), v.satisfied.end(), true);
    double r = double(hits) / double(v.satisfied.size());
    if (w.reward_noise > 0.0)
      r += w.reward_noise * KeyedRng::normal(w.world_seed, v.seed, stable_hash64(visual.uri), key(Stream::reward_noise));
    return r;
  }

  std::string fingerprint() const override { return u_->fingerprint() + "/reward"; }

 private:
  std::shared_ptr<const SimUniverse> u_;
};

inline BackendSet make_simulated_backends(std::shared_ptr<const SimUniverse> u) {
  BackendSet b;
  b.generator = std::make_shared<SimGenerator>(u);
  b.captioner = std::make_shared<SimCaptioner>(u);
  b.prober = std::make_shared<SimProber>(u);
  b.nli = std::make_shared<SimNli>();
  b.decomposer = std::make_shared<SimDecomposer>(u);
  b.rewriter = std::make_shared<SimRewriter>(u);
  b.reward = std::make_shared<SimReward>(u);
  b.clock = std::make_shared<ModeledStageClock>();
  return b;
}

}  // namespace pris::sim
