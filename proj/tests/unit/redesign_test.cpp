#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pris/redesign/redesign.hpp"

using namespace pris;

namespace {

// Returns fixed texts per attempt.
struct FixedRewriter : Rewriter {
  std::vector<std::vector<std::string>> per_attempt;
  std::vector<RewriteRequest> seen;
  std::vector<std::string> rewrite(const RewriteRequest& req) override {
    seen.push_back(req);
    return per_attempt.at(static_cast<std::size_t>(req.attempt));
  }
  std::string fingerprint() const override { return "fixed"; }
};

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::invalid_argument;
}

struct Rig {
  test::SimFixture f{{test::tiny_world()}};
  const sim::SimWorld& w = f.universe->world("tiny");
  PromptRecord prompt = w.prompt_record();
  std::vector<SemanticElement> els = w.semantic_elements();

  RevisionRequest request(RevisionMode mode, std::vector<int> failures, int variants = 2) const {
    RevisionRequest r;
    r.parent = prompt;
    r.elements = els;
    r.mode = mode;
    r.common_failures = std::move(failures);
    r.variant_count = variants;
    return r;
  }
};

}  // namespace

TEST(RevisionRequest, Validation) {
  Rig s;
  EXPECT_NO_THROW(s.request(RevisionMode::failure_targeted, {2}).validate());
  EXPECT_EQ(kind_of([&] { s.request(RevisionMode::failure_targeted, {}).validate(); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([&] { s.request(RevisionMode::exploration, {1}).validate(); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([&] { s.request(RevisionMode::failure_targeted, {9}).validate(); }), ErrorKind::dangling_element);
  auto sat = s.request(RevisionMode::exploration, {});
  sat.satisfied = {7};
  EXPECT_EQ(kind_of([&] { sat.validate(); }), ErrorKind::dangling_element);
  auto ps = s.request(RevisionMode::per_sample, {});
  EXPECT_EQ(kind_of([&] { ps.validate(); }), ErrorKind::invalid_argument);
  ps.per_sample_report = test::report("c", {NliLabel::entailment});
  EXPECT_NO_THROW(ps.validate());
  auto stray = s.request(RevisionMode::exploration, {});
  stray.per_sample_report = test::report("c", {NliLabel::entailment});
  EXPECT_THROW(stray.validate(), Error);
  auto zero = s.request(RevisionMode::exploration, {}, 0);
  EXPECT_THROW(zero.validate(), Error);
}

TEST(Revise, FailureTargetedVariantsEntailFailuresAndKeepCore) {
  Rig s;
  EfcVerifier v(s.f.backends);
  PromptReviser reviser(v);
  auto req = s.request(RevisionMode::failure_targeted, {2});
  req.satisfied = {0, 1, 3};
  req.iteration = 1;
  const auto r = reviser.revise(req);
  ASSERT_EQ(r.variants.size(), 2u);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(r.checked_elements, (std::vector<int>{0, 1, 2}));  // the extra element is not required
  EXPECT_EQ(r.variants[0].prompt_id, "tiny-prompt/r1.0");
  EXPECT_EQ(r.variants[1].prompt_id, "tiny-prompt/r1.1");
  for (const auto& p : r.variants) {
    EXPECT_EQ(p.provenance, Provenance::revised(1, "tiny-prompt"));
    EXPECT_NE(p.text.find("Make sure that the apple is on the table."), std::string::npos);
    EXPECT_EQ(sim::entail(p.text, "the apple is on the table"), NliLabel::entailment);
  }
  EXPECT_NE(r.variants[0].text, r.variants[1].text);
}

TEST(Revise, RetriesOnceThenRaisesUnfaithfulRevision) {
  Rig s;
  auto rw = std::make_shared<FixedRewriter>();
  BackendSet b = s.f.backends;
  b.rewriter = rw;
  EfcVerifier v(b);
  PromptReviser reviser(v);

  // First attempt drops the failed element, the retry is faithful.
  using Texts = std::vector<std::vector<std::string>>;
  rw->per_attempt = Texts{{"A red cube is left of a blue sphere."},
                          {s.prompt.text + " Make sure that the apple is on the table."}};
  const auto ok = reviser.revise(s.request(RevisionMode::failure_targeted, {2}, 1));
  EXPECT_EQ(ok.attempts, 2);
  ASSERT_EQ(rw->seen.size(), 2u);
  EXPECT_EQ(rw->seen[1].attempt, 1);
  EXPECT_EQ(rw->seen[0].failures, (std::vector<std::string>{"the apple is on the table"}));

  rw->seen.clear();
  rw->per_attempt = Texts{{"A red cube."}, {s.prompt.text}};
  EXPECT_EQ(kind_of([&] { reviser.revise(s.request(RevisionMode::failure_targeted, {2}, 1)); }),
            ErrorKind::unfaithful_revision);
  EXPECT_EQ(rw->seen.size(), 2u);

  rw->per_attempt = Texts{{"one", "two"}};
  EXPECT_EQ(kind_of([&] { reviser.revise(s.request(RevisionMode::failure_targeted, {2}, 1)); }),
            ErrorKind::backend_error);
}

TEST(Revise, ContradictingVariantRejected) {
  Rig s;
  auto rw = std::make_shared<FixedRewriter>();
  const std::string bad = s.prompt.text + " Make sure that the apple is under the table.";
  rw->per_attempt = std::vector<std::vector<std::string>>{{bad}, {bad}};
  BackendSet b = s.f.backends;
  b.rewriter = rw;
  EfcVerifier v(b);
  PromptReviser reviser(v);
  EXPECT_EQ(kind_of([&] { reviser.revise(s.request(RevisionMode::failure_targeted, {2}, 1)); }),
            ErrorKind::unfaithful_revision);
}

TEST(Revise, ExplorationKeepsEveryElement) {
  Rig s;
  EfcVerifier v(s.f.backends);
  PromptReviser reviser(v);
  const auto r = reviser.revise(s.request(RevisionMode::exploration, {}, 3));
  EXPECT_EQ(r.variants.size(), 3u);
  EXPECT_EQ(r.checked_elements, (std::vector<int>{0, 1, 2, 3}));
  for (const auto& p : r.variants)
    for (const auto& e : s.els) EXPECT_EQ(sim::entail(p.text, e.text), NliLabel::entailment) << p.text;
}

TEST(Revise, StandardExpansionChains) {
  Rig s;
  EfcVerifier v(s.f.backends);
  PromptReviser reviser(v);
  const auto x = reviser.standard_expand(s.prompt, s.els);
  EXPECT_EQ(x.prompt_id, "tiny-prompt/x0");
  EXPECT_EQ(x.provenance, Provenance::expanded("tiny-prompt"));
  const auto xx = reviser.standard_expand(x, s.els);
  EXPECT_EQ(xx.prompt_id, "tiny-prompt/x0/x0");
  EXPECT_EQ(xx.provenance.parent_id, "tiny-prompt/x0");
  PromptLineage lin;
  lin.add(s.prompt);
  lin.add(x);
  lin.add(xx);
  EXPECT_EQ(lin.chain(xx.prompt_id).size(), 3u);
}

TEST(Revise, PerSample) {
  Rig s;
  EfcVerifier v(s.f.backends);
  PromptReviser reviser(v);
  using L = NliLabel;
  const auto all = test::report("c", {L::entailment, L::entailment, L::entailment, L::entailment});
  EXPECT_EQ(reviser.revise_per_sample(s.prompt, all, s.els), s.prompt);

  const auto one = test::report("c", {L::entailment, L::contradiction, L::entailment, L::entailment});
  CallTally tally;
  const auto p = reviser.revise_per_sample(s.prompt, one, s.els, tally, 2, 5);
  EXPECT_EQ(p.prompt_id, "tiny-prompt/p2.5");
  EXPECT_EQ(p.provenance, Provenance::revised(2, "tiny-prompt"));
  EXPECT_NE(p.text.find("Make sure that the sphere is blue."), std::string::npos);
  EXPECT_EQ(p.text.find("Make sure that the apple"), std::string::npos);

  const auto neutral = test::report("c", {L::entailment, L::neutral, L::entailment, L::entailment});
  EXPECT_EQ(kind_of([&] { reviser.revise_per_sample(s.prompt, neutral, s.els); }), ErrorKind::neutral_final_label);
}
