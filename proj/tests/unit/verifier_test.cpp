#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pris/core/scoring.hpp"
#include "pris/verifier/efc.hpp"

using namespace pris;

namespace {

// Wraps a prober so a test can force answers.
struct ScriptedProber : Prober {
  std::shared_ptr<Prober> inner;
  std::vector<std::string> answers;  // consumed first, then falls through
  int calls = 0;
  std::vector<bool> elaborate_flags;

  std::string probe(const VisualHandle& v, const std::string& q, bool elaborate) override {
    ++calls;
    elaborate_flags.push_back(elaborate);
    if (!answers.empty()) {
      auto a = answers.front();
      answers.erase(answers.begin());
      return a;
    }
    return inner->probe(v, q, elaborate);
  }
  std::string ask_binary(const VisualHandle& v, const std::string& q) override { return inner->ask_binary(v, q); }
  std::string fingerprint() const override { return "scripted"; }
};

struct CountingCaptioner : Captioner {
  std::shared_ptr<Captioner> inner;
  std::string forced;
  int calls = 0;
  std::string caption(const VisualHandle& v) override {
    ++calls;
    return forced.empty() ? inner->caption(v) : forced;
  }
  std::string fingerprint() const override { return "counting"; }
};

struct CountingDecomposer : Decomposer {
  std::shared_ptr<Decomposer> inner;
  std::vector<SemanticElement> forced;
  bool use_forced = false;
  int calls = 0;
  std::vector<SemanticElement> decompose(const PromptRecord& p, MediaKind k) override {
    ++calls;
    return use_forced ? forced : inner->decompose(p, k);
  }
  std::string fingerprint() const override { return "counting"; }
};

struct Rig {
  test::SimFixture f;
  const sim::SimWorld& w;
  PromptRecord prompt;
  explicit Rig(double omission = 0.0) : f({test::tiny_world(omission)}), w(f.universe->world("tiny")) {
    prompt = w.prompt_record();
  }
  VisualHandle visual(std::vector<bool> sat, std::uint64_t seed = 1) const {
    return f.universe->make_visual(w, seed, 0, 50, true, sat);
  }
};

std::vector<bool> labels_entailed(const VerificationReport& r) {
  std::vector<bool> out;
  for (const auto& ev : r.per_element) out.push_back(ev.verdict.label == NliLabel::entailment);
  return out;
}

}  // namespace

TEST(Efc, CaptionEntailsAllShortCircuitsProbing) {
  Rig s;
  EfcVerifier v(s.f.backends);
  const auto d = v.decompose(s.prompt, MediaKind::image);
  const auto r = v.verify(d, "c", s.visual({true, true, true, true}));
  EXPECT_EQ(labels_entailed(r), std::vector<bool>(4, true));
  EXPECT_EQ(v.probes_issued(), 0);
  for (const auto& ev : r.per_element) {
    EXPECT_EQ(ev.verdict.stage, VerdictStage::caption_nli);
    EXPECT_FALSE(ev.probe_question.has_value());
  }
}

TEST(Efc, OmittedElementResolvedByProbe) {
  Rig s;
  auto cap = std::make_shared<CountingCaptioner>();
  cap->inner = s.f.backends.captioner;
  cap->forced = "The cube is red. The sphere is blue. The apple is green.";
  BackendSet b = s.f.backends;
  b.captioner = cap;
  EfcVerifier v(b);
  const auto d = v.decompose(s.prompt, MediaKind::image);

  const auto yes = v.verify(d, "c1", s.visual({true, true, true, true}, 1));
  EXPECT_EQ(yes.per_element[2].verdict.label, NliLabel::entailment);
  EXPECT_EQ(yes.per_element[2].verdict.stage, VerdictStage::probe_nli);
  EXPECT_EQ(yes.per_element[2].probe_question, std::optional<std::string>("Where is the apple?"));

  const auto no = v.verify(d, "c2", s.visual({true, true, false, true}, 2));
  EXPECT_EQ(no.per_element[2].verdict.label, NliLabel::contradiction);
  EXPECT_EQ(no.per_element[2].verdict.stage, VerdictStage::probe_nli);
  EXPECT_FALSE(no.per_element[2].verdict.coerced);
  EXPECT_EQ(v.probes_issued(), 2);
}

TEST(Efc, ResidualNeutralIsCoercedToContradiction) {
  Rig s(1.0);
  auto prober = std::make_shared<ScriptedProber>();
  prober->inner = s.f.backends.prober;
  prober->answers = {"Something round is visible."};
  BackendSet b = s.f.backends;
  b.prober = prober;
  EfcVerifier v(b);
  const auto d = v.decompose(s.prompt, MediaKind::image);
  const auto r = v.verify(d, "c", s.visual({true, true, true, true}));
  EXPECT_EQ(r.per_element[0].verdict.label, NliLabel::contradiction);
  EXPECT_TRUE(r.per_element[0].verdict.coerced);
  EXPECT_EQ(v.coerced_neutrals(), 1);
  EXPECT_NO_THROW(score_report(r, d.elements));
}

TEST(Efc, BareYesNoAnswerRetriedOnceThenDegenerate) {
  Rig s(1.0);
  auto prober = std::make_shared<ScriptedProber>();
  prober->inner = s.f.backends.prober;
  prober->answers = {"Yes."};
  BackendSet b = s.f.backends;
  b.prober = prober;
  EfcVerifier v(b);
  const VisualHandle vis = s.visual({true, true, true, true});
  EXPECT_EQ(v.probe(vis, "What color is the cube?"), "The cube is red.");
  EXPECT_EQ(prober->elaborate_flags, (std::vector<bool>{false, true}));

  prober->answers = {"no", "No."};
  try {
    v.probe(vis, "What color is the cube?");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_answer);
  }
}

TEST(Efc, ClosedQuestionRejected) {
  Rig s;
  EfcVerifier v(s.f.backends);
  try {
    v.probe(s.visual({true, true, true, true}), "is there a dog?");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_answer);
  }
}

TEST(Efc, CaptionOnlyVariantMissesOmissions) {
  Rig s(1.0);
  EfcVerifier efc(s.f.backends);
  EfcVerifier caption_only(s.f.backends, VerifierOptions{false});
  const auto d = efc.decompose(s.prompt, MediaKind::image);
  const auto vis = s.visual({true, false, true, true});
  EXPECT_EQ(labels_entailed(efc.verify(d, "c", vis)), (std::vector<bool>{true, false, true, true}));
  const auto r = caption_only.verify(d, "c", vis);
  EXPECT_EQ(labels_entailed(r), std::vector<bool>(4, false));
  EXPECT_EQ(caption_only.probes_issued(), 0);
  EXPECT_TRUE(r.per_element[0].verdict.coerced);
}

TEST(Efc, ExactUnderOmissionWithoutCoercion) {
  Rig s(0.4);
  EfcVerifier v(s.f.backends);
  const auto d = v.decompose(s.prompt, MediaKind::image);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto sat = s.w.draw_satisfaction(s.prompt.text, seed);
    ASSERT_EQ(labels_entailed(v.verify(d, "c" + std::to_string(seed), s.visual(sat, seed))), sat);
  }
  EXPECT_EQ(v.coerced_neutrals(), 0);
  EXPECT_GT(v.probes_issued(), 0);
}

TEST(Efc, DecompositionAndCaptionCached) {
  Rig s;
  auto dec = std::make_shared<CountingDecomposer>();
  dec->inner = s.f.backends.decomposer;
  auto cap = std::make_shared<CountingCaptioner>();
  cap->inner = s.f.backends.captioner;
  BackendSet b = s.f.backends;
  b.decomposer = dec;
  b.captioner = cap;
  EfcVerifier v(b);
  const auto d1 = v.decompose(s.prompt, MediaKind::image);
  const auto d2 = v.decompose(s.prompt, MediaKind::image);
  EXPECT_EQ(d1, d2);
  EXPECT_EQ(dec->calls, 1);
  const auto vis = s.visual({true, true, true, true});
  const auto first = v.verify(d1, "a", vis);
  EXPECT_EQ(v.verify(d1, "a", vis), first);
  EXPECT_EQ(cap->calls, 1);
  EXPECT_EQ(v.caption_cache_hits(), 1);
}

TEST(Efc, DecompositionErrorsSurface) {
  Rig s;
  auto dec = std::make_shared<CountingDecomposer>();
  dec->inner = s.f.backends.decomposer;
  dec->use_forced = true;
  BackendSet b = s.f.backends;
  b.decomposer = dec;
  EfcVerifier v(b);
  try {
    v.decompose(s.prompt, MediaKind::image);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_decomposition);
  }
  auto motion = test::element(0, "the car drives left");
  motion.semantic_category = SemanticCategory::object_motion;
  dec->forced = {motion};
  EXPECT_THROW(v.decompose(PromptRecord{"m", "A car.", std::nullopt, {}}, MediaKind::image), Error);
  EXPECT_NO_THROW(v.decompose(PromptRecord{"m", "A car.", std::nullopt, {}}, MediaKind::video));
  auto dup = test::element(1, "The car drives left");
  dec->forced = {test::element(0, "the car drives left"), dup};
  EXPECT_THROW(v.decompose(PromptRecord{"d", "A car.", std::nullopt, {}}, MediaKind::video), Error);
}

TEST(Efc, EmptyCaptionIsAnError) {
  Rig s;
  auto cap = std::make_shared<CountingCaptioner>();
  cap->inner = s.f.backends.captioner;
  cap->forced = "   ";
  BackendSet b = s.f.backends;
  b.captioner = cap;
  EfcVerifier v(b);
  try {
    v.caption(s.visual({true, true, true, true}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_caption);
  }
}

TEST(Efc, VideoCaptionsDescribeProgression) {
  const auto prof = test::sim_profile_backends();
  const auto& w = prof.universe->world("video-motion");
  EfcVerifier v(prof.set);
  const auto d = v.decompose(w.prompt_record(), MediaKind::video);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto vis = prof.universe->make_visual(w, seed, 0, 50, true, {true, true, true});
    const std::string cap = prof.set.captioner->caption(vis);
    EXPECT_TRUE(cap.rfind("At first, ", 0) == 0 || cap == "The scene is shown.") << cap;
    EXPECT_EQ(score_report(v.verify(d, "v", vis), d.elements), (AlignmentScore{3, 3, 0, 0}));
  }
}

TEST(Efc, DeterministicReports) {
  Rig s(0.5);
  EfcVerifier a(s.f.backends), b(s.f.backends);
  const auto d = a.decompose(s.prompt, MediaKind::image);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto vis = s.visual(s.w.draw_satisfaction(s.prompt.text, seed), seed);
    ASSERT_EQ(canonical(Json(a.verify(d, "x", vis))), canonical(Json(b.verify(d, "x", vis))));
  }
}
