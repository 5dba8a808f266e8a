#include <gtest/gtest.h>

#include <deque>
#include <fstream>
#include <thread>

#include "helpers.hpp"
#include "pris/backends/labels.hpp"
#include "pris/verifier/efc.hpp"

using namespace pris;
using namespace std::chrono_literals;

namespace {

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

template <typename Fn>
WireFailure wire_failure_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::backend_error);
    return e.wire_failure();
  }
  ADD_FAILURE() << "no error thrown";
  return WireFailure::none;
}

wire::TransportResult ok(const std::string& body) { return {true, false, 200, body, ""}; }
wire::TransportResult status(int code) { return {true, false, code, "{}", ""}; }
wire::TransportResult lost(bool timeout) { return {false, timeout, 0, "", timeout ? "read timeout" : "refused"}; }

struct ScriptedTransport : wire::Transport {
  std::deque<wire::TransportResult> script;
  std::vector<std::string> bodies;
  std::vector<std::map<std::string, std::string>> headers;

  wire::TransportResult post(const std::string& path, const std::string& body,
                             const std::map<std::string, std::string>& h) override {
    EXPECT_EQ(path, "/v1/call");
    bodies.push_back(body);
    headers.push_back(h);
    if (script.empty()) return lost(false);
    auto r = script.front();
    script.pop_front();
    return r;
  }
};

struct Harness {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  std::vector<std::chrono::milliseconds> sleeps;
  std::shared_ptr<wire::WireClient> client;

  explicit Harness(wire::WireOptions o = {}) {
    client = std::make_shared<wire::WireClient>(transport, o, [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
  }
};

const std::string nli_ok = R"({"payload":{"label":"entailment"},"status":"ok","usage":{}})";

}  // namespace

// ---------------------------------------------------------------------------
// Labels

TEST(NliLabels, ClosedSynonymTable) {
  EXPECT_EQ(normalize_nli_label("Entailment"), NliLabel::entailment);
  EXPECT_EQ(normalize_nli_label("  entails. "), NliLabel::entailment);
  EXPECT_EQ(normalize_nli_label("Yes-Supports"), NliLabel::entailment);
  EXPECT_EQ(normalize_nli_label("NOT_ENOUGH_INFO"), NliLabel::neutral);
  EXPECT_EQ(normalize_nli_label("\"contradiction\""), NliLabel::contradiction);
  EXPECT_EQ(normalize_nli_label("refutes"), NliLabel::contradiction);
}

TEST(NliLabels, MaybeIsInvalid) {
  EXPECT_EQ(kind_of([] { normalize_nli_label("maybe"); }), ErrorKind::invalid_label);
  EXPECT_EQ(kind_of([] { normalize_nli_label(""); }), ErrorKind::invalid_label);
  EXPECT_EQ(kind_of([] { normalize_nli_label("entailment or neutral"); }), ErrorKind::invalid_label);
}

TEST(NliLabels, BareYesNo) {
  EXPECT_TRUE(is_bare_yes_no("Yes."));
  EXPECT_TRUE(is_bare_yes_no(" no "));
  EXPECT_FALSE(is_bare_yes_no("No, the apple is red."));
  EXPECT_FALSE(is_bare_yes_no("laces"));
}

// ---------------------------------------------------------------------------
// Simulated backends

TEST(SimWorld, FilesValidate) {
  for (const char* f : {"hard_element", "eight_element", "all_easy", "video_motion"}) {
    std::ifstream in(test::source_dir() / "worlds" / (std::string(f) + ".json"));
    ASSERT_TRUE(in.good()) << f;
    EXPECT_NO_THROW(Json::parse(in).get<sim::SimWorld>().validate()) << f;
  }
}

TEST(SimWorld, RejectsDependentElements) {
  auto w = test::tiny_world();
  w.elements[1].element.text = "the cube is red and small";
  EXPECT_THROW(w.validate(), Error);
  auto v = test::tiny_world();
  v.elements[0].violation_text = "the cube is red";
  EXPECT_THROW(v.validate(), Error);
}

TEST(SimWorld, SatisfactionFormula) {
  auto w = test::tiny_world();
  w.elements[0].base_prob = 1.0;
  w.elements[2].base_prob = 0.0;
  w.elements[2].emphasis_gain = 0.9;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    ASSERT_TRUE(w.draw_satisfaction(w.prompt, seed)[0]);
    ASSERT_DOUBLE_EQ(w.satisfaction_prob(2, 0.0, seed), 0.0);
    ASSERT_DOUBLE_EQ(w.satisfaction_prob(2, 1.0, seed), 0.9);
  }
}

TEST(SimWorld, EmphasisRaisedByMarker) {
  auto w = test::tiny_world();
  EXPECT_EQ(w.emphasis(w.prompt), std::vector<double>(4, 0.0));
  const std::string revised = w.prompt + " " + w.marker(w.elements[2]);
  EXPECT_EQ(w.emphasis(revised)[2], 1.0);
  w.focus_capacity = 1;
  const std::string both = revised + " " + w.marker(w.elements[0]);
  EXPECT_DOUBLE_EQ(w.emphasis(both)[2], 0.5);
}

TEST(SimBackends, GenerationDeterministic) {
  test::SimFixture f({test::tiny_world()});
  const auto p = f.universe->world("tiny").prompt_record();
  const auto a = f.backends.generator->generate(p, 42, 50, true, MediaKind::image, Json::object());
  const auto b = f.backends.generator->generate(p, 42, 50, true, MediaKind::image, Json::object());
  const auto c = f.backends.generator->generate(p, 43, 50, true, MediaKind::image, Json::object());
  EXPECT_EQ(a, b);
  EXPECT_NE(a.uri, c.uri);
  EXPECT_EQ(a.uri.rfind("sim://tiny/42/", 0), 0u);
}

TEST(SimBackends, CaptionEchoesSatisfiedStates) {
  test::SimFixture f({test::tiny_world()});
  const auto& w = f.universe->world("tiny");
  const auto v = f.universe->make_visual(w, 1, 0, 50, true, {true, false, true, true});
  const std::string cap = f.backends.captioner->caption(v);
  EXPECT_EQ(sim::entail(cap, "the cube is red"), NliLabel::entailment);
  EXPECT_EQ(sim::entail(cap, "the sphere is blue"), NliLabel::contradiction);
  EXPECT_EQ(sim::entail(cap, "the apple is on the table"), NliLabel::entailment);
}

TEST(SimBackends, FullOmissionLeavesEveryElementNeutral) {
  test::SimFixture f({test::tiny_world(1.0)});
  const auto& w = f.universe->world("tiny");
  const auto v = f.universe->make_visual(w, 1, 0, 50, true, {true, false, true, true});
  const std::string cap = f.backends.captioner->caption(v);
  EXPECT_FALSE(trim(cap).empty());
  for (const auto& e : w.elements) EXPECT_EQ(sim::entail(cap, e.element.text), NliLabel::neutral);
}

TEST(SimBackends, ProberReadsSatisfaction) {
  test::SimFixture f({test::tiny_world()});
  const auto& w = f.universe->world("tiny");
  const auto v = f.universe->make_visual(w, 1, 0, 50, true, {true, false, true, true});
  EXPECT_EQ(f.backends.prober->probe(v, "What color is the cube?", false), "The cube is red.");
  EXPECT_EQ(sim::entail(f.backends.prober->probe(v, "What color is the sphere?", false), "the sphere is blue"),
            NliLabel::contradiction);
}

TEST(SimBackends, SimNliOracleExamples) {
  sim::SimNli nli;
  auto j = [&](const char* p, const char* h) { return nli.judge(p, h, VerdictStage::caption_nli); };
  EXPECT_EQ(j("a red cube sits left of a sphere", "a red cube is present"), "entailment");
  EXPECT_EQ(j("a red cube sits on a table", "the cube is blue"), "contradiction");
  EXPECT_EQ(j("a red cube sits on a table", "a dog is present"), "neutral");
}

TEST(SimBackends, DecomposerIsIdentityOnDeclaredElements) {
  test::SimFixture f({test::tiny_world()});
  const auto& w = f.universe->world("tiny");
  EXPECT_EQ(f.backends.decomposer->decompose(w.prompt_record(), MediaKind::image), w.semantic_elements());
}

TEST(SimBackends, NoiselessRewardMonotoneInSatisfiedCount) {
  test::SimFixture f({test::tiny_world()});
  const auto& w = f.universe->world("tiny");
  const auto p = w.prompt_record();
  auto r = [&](std::vector<bool> sat, std::uint64_t seed) {
    return f.backends.reward->reward(p, f.universe->make_visual(w, seed, 0, 50, true, sat));
  };
  EXPECT_LT(r({false, false, false, false}, 1), r({true, false, false, false}, 2));
  EXPECT_LT(r({true, false, false, false}, 3), r({true, true, false, true}, 4));
  EXPECT_LT(r({true, true, false, true}, 5), r({true, true, true, true}, 6));
  EXPECT_EQ(r({true, false, true, false}, 7), r({false, true, false, true}, 8));
}

TEST(SimBackends, YesBiasOnlyAffectsBinaryQuestions) {
  test::SimFixture f({test::tiny_world(0.0, 1.0)});
  const auto& w = f.universe->world("tiny");
  const auto v = f.universe->make_visual(w, 1, 0, 50, true, {false, false, false, false});
  EXPECT_EQ(f.backends.prober->ask_binary(v, "Is it true that the cube is red?"), "yes");
  EXPECT_EQ(sim::entail(f.backends.prober->probe(v, "What color is the cube?", false), "the cube is red"),
            NliLabel::contradiction);
}

// ---------------------------------------------------------------------------
// Wire adapter

TEST(Wire, RequestShapeAndIdempotencyKey) {
  Harness h;
  h.transport->script = {ok(nli_ok)};
  h.client->call("nli", "nli@v1", Json{{"premise", "p"}, {"hypothesis", "h"}});
  const Json sent = Json::parse(h.transport->bodies.at(0));
  EXPECT_EQ(canonical(sent), h.transport->bodies[0]);
  EXPECT_EQ(sent["schema"], "pris-wire/1");
  EXPECT_EQ(sent["version"], "1");
  EXPECT_EQ(sent["capability"], "nli");
  EXPECT_EQ(sent["instruction_id"], "nli@v1");
  Json bare = sent;
  bare.erase("idempotency_key");
  EXPECT_EQ(sent["idempotency_key"], sha256_hex(canonical(bare)).substr(0, 32));
  EXPECT_EQ(h.transport->headers[0].at("Idempotency-Key"), sent["idempotency_key"]);
}

TEST(Wire, RetriesTransientFailuresWithBackoff) {
  Harness h;
  h.transport->script = {lost(false), status(503), ok(nli_ok)};
  const auto r = h.client->call("nli", "nli@v1", Json::object());
  EXPECT_EQ(r.payload["label"], "entailment");
  ASSERT_EQ(h.transport->bodies.size(), 3u);
  EXPECT_EQ(h.transport->bodies[0], h.transport->bodies[2]);
  EXPECT_EQ(h.sleeps, (std::vector<std::chrono::milliseconds>{200ms, 400ms}));
}

TEST(Wire, TimeoutAfterThreeAttempts) {
  Harness h;
  h.transport->script = {lost(true), lost(true), lost(true), ok(nli_ok)};
  EXPECT_EQ(wire_failure_of([&] { h.client->call("nli", "nli@v1", Json::object()); }), WireFailure::timeout);
  EXPECT_EQ(h.transport->bodies.size(), 3u);
  EXPECT_EQ(h.sleeps.size(), 2u);
}

TEST(Wire, ClientErrorsAreNotRetried) {
  Harness h;
  h.transport->script = {status(400), ok(nli_ok)};
  EXPECT_EQ(wire_failure_of([&] { h.client->call("nli", "nli@v1", Json::object()); }), WireFailure::remote_failure);
  EXPECT_EQ(h.transport->bodies.size(), 1u);
}

TEST(Wire, TooManyRequestsIsRetried) {
  Harness h;
  h.transport->script = {status(429), ok(nli_ok)};
  EXPECT_NO_THROW(h.client->call("nli", "nli@v1", Json::object()));
  EXPECT_EQ(h.transport->bodies.size(), 2u);
}

TEST(Wire, MalformedResponses) {
  for (const char* body : {"not json", "[]", R"({"payload":{}})", R"({"status":"ok","payload":[1]})",
                           R"({"status":"ok"})"}) {
    Harness h;
    h.transport->script = {ok(body)};
    EXPECT_EQ(wire_failure_of([&] { h.client->call("nli", "nli@v1", Json::object()); }), WireFailure::malformed)
        << body;
  }
}

TEST(Wire, RemoteErrorStatus) {
  Harness h;
  h.transport->script = {ok(R"({"status":"error","payload":{"code":"oom"},"usage":{}})")};
  EXPECT_EQ(wire_failure_of([&] { h.client->call("nli", "nli@v1", Json::object()); }), WireFailure::remote_failure);
}

TEST(Wire, RewardMustBeFiniteNumber) {
  for (const char* body : {R"({"status":"ok","payload":{"reward":"nan"}})", R"({"status":"ok","payload":{"reward":null}})",
                           R"({"status":"ok","payload":{"reward":1e400}})", R"({"status":"ok","payload":{}})"}) {
    Harness h;
    h.transport->script = {ok(body)};
    remote::Reward reward(h.client, "http://x", "reward@v1", "fp");
    PromptRecord p{"p", "a shoe", std::nullopt, Provenance::user()};
    EXPECT_EQ(kind_of([&] { reward.reward(p, VisualHandle{MediaKind::image, 1, "store://a"}); }),
              ErrorKind::backend_error)
        << body;
  }
  Harness h;
  h.transport->script = {ok(R"({"status":"ok","payload":{"reward":-1.5}})")};
  remote::Reward reward(h.client, "http://x", "reward@v1", "fp");
  EXPECT_EQ(reward.reward({"p", "a", std::nullopt, {}}, VisualHandle{}), -1.5);
}

TEST(Wire, MaybeLabelFromRemoteNliIsInvalidLabel) {
  Harness h;
  h.transport->script = {ok(R"({"status":"ok","payload":{"label":"maybe"}})")};
  test::SimFixture f({test::tiny_world()});
  BackendSet b = f.backends;
  b.nli = std::make_shared<remote::Nli>(h.client, "http://x", "nli@v1", "fp");
  EfcVerifier v(b);
  EXPECT_EQ(kind_of([&] { v.nli_judge({"premise", "hypothesis", VerdictStage::caption_nli}); }),
            ErrorKind::invalid_label);
}

TEST(Wire, InFlightCapIsRespected) {
  struct SlowTransport : wire::Transport {
    std::atomic<int> now{0}, peak{0};
    wire::TransportResult post(const std::string&, const std::string&, const std::map<std::string, std::string>&) override {
      const int n = ++now;
      int p = peak.load();
      while (n > p && !peak.compare_exchange_weak(p, n)) {
      }
      std::this_thread::sleep_for(20ms);
      --now;
      return ok(nli_ok);
    }
  };
  auto t = std::make_shared<SlowTransport>();
  wire::WireOptions o;
  o.max_in_flight = 2;
  wire::WireClient client(t, o);
  std::vector<std::jthread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { client.call("nli", "nli@v1", Json::object()); });
  threads.clear();
  EXPECT_LE(t->peak.load(), 2);
  EXPECT_GE(t->peak.load(), 1);
}

// ---------------------------------------------------------------------------
// Against a real HTTP server in this process

namespace {

struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::atomic<int> requests{0};
  std::chrono::milliseconds delay{0};

  LocalServer() {
    server.Post("/v1/call", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      std::this_thread::sleep_for(delay);
      const Json body = Json::parse(req.body);
      Json payload;
      if (body["capability"] == "nli") {
        payload = {{"label", body["payload"]["hypothesis"] == body["payload"]["premise"] ? "Entails" : "neutral"}};
      } else {
        payload = {{"caption", "A red cube."}};
      }
      Json out{{"status", "ok"}, {"payload", payload}, {"usage", {{"key", req.get_header_value("Idempotency-Key")}}}};
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST(WireHttp, RoundTripThroughServer) {
  LocalServer s;
  auto client = std::make_shared<wire::WireClient>(std::make_shared<wire::HttpTransport>(s.url(), 5000ms));
  remote::Nli nli(client, s.url(), "nli@v1", "fp");
  EXPECT_EQ(normalize_nli_label(nli.judge("the cube is red", "the cube is red", VerdictStage::caption_nli)),
            NliLabel::entailment);
  EXPECT_EQ(nli.judge("a", "b", VerdictStage::probe_nli), "neutral");
  EXPECT_EQ(s.requests.load(), 2);
}

TEST(WireHttp, ServerTimeoutMapsToTimeout) {
  LocalServer s;
  s.delay = 600ms;
  wire::WireOptions o;
  o.max_attempts = 2;
  o.initial_backoff = 1ms;
  o.timeout = 150ms;
  auto client = std::make_shared<wire::WireClient>(std::make_shared<wire::HttpTransport>(s.url(), o.timeout), o);
  remote::Captioner cap(client, s.url(), "captioner@v1", "fp");
  EXPECT_EQ(wire_failure_of([&] { cap.caption(VisualHandle{}); }), WireFailure::timeout);
}

TEST(WireHttp, UnreachableEndpoint) {
  wire::WireOptions o;
  o.initial_backoff = 1ms;
  o.timeout = 200ms;
  auto client = std::make_shared<wire::WireClient>(std::make_shared<wire::HttpTransport>("http://127.0.0.1:1", o.timeout), o);
  remote::Captioner cap(client, "http://127.0.0.1:1", "captioner@v1", "fp");
  EXPECT_EQ(kind_of([&] { cap.caption(VisualHandle{}); }), ErrorKind::backend_error);
}

// ---------------------------------------------------------------------------
// Golden fixtures: the engine must send exactly the fixture request bytes and
// accept the fixture response.

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Golden {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  std::shared_ptr<wire::WireClient> client = std::make_shared<wire::WireClient>(transport);
  InstructionSet ins = InstructionSet::load(test::source_dir() / "instructions" / "v1");
  std::string ep = "http://127.0.0.1:8600";

  std::filesystem::path dir() const { return test::source_dir() / "docs" / "wire" / "fixtures"; }

  void arm(const std::string& name) {
    std::string body = slurp(dir() / (name + ".response.json"));
    transport->script = {ok(body)};
    transport->bodies.clear();
  }
  void check(const std::string& name) {
    ASSERT_EQ(transport->bodies.size(), 1u);
    EXPECT_EQ(transport->bodies[0] + "\n", slurp(dir() / (name + ".request.json"))) << name;
  }
};

const VisualHandle fixture_image{MediaKind::image, 1, "store://runs/demo/c0-000.png"};
const VisualHandle fixture_video{MediaKind::video, 81, "store://runs/demo/c0-001.mp4"};
const PromptRecord fixture_prompt{"shoe-still-life", "A red vase and a green apple on a wooden table.", std::nullopt,
                                  Provenance::user()};

}  // namespace

TEST(GoldenFixtures, Generator) {
  Golden g;
  g.arm("generator");
  remote::Generator gen(g.client, g.ep, g.ins.id("generator"), g.ins.fingerprint());
  const auto v = gen.generate(fixture_prompt, 1234567, 50, true, MediaKind::image, Json::object());
  g.check("generator");
  EXPECT_EQ(v, fixture_image);
}

TEST(GoldenFixtures, Captioner) {
  Golden g;
  remote::Captioner cap(g.client, g.ep, g.ins.id("captioner"), g.ins.fingerprint());
  g.arm("captioner");
  EXPECT_FALSE(cap.caption(fixture_image).empty());
  g.check("captioner");
  g.arm("captioner_video");
  const std::string text = cap.caption(fixture_video);
  g.check("captioner_video");
  EXPECT_GT(std::count(text.begin(), text.end(), '.'), 1);
}

TEST(GoldenFixtures, Prober) {
  Golden g;
  remote::Prober prober(g.client, g.ep, g.ins);
  g.arm("prober");
  EXPECT_EQ(prober.probe(fixture_image, "What color is the apple?", false), "The apple is green.");
  g.check("prober");
  g.arm("prober_elaborate");
  EXPECT_FALSE(is_bare_yes_no(prober.probe(fixture_image, "What color is the apple?", true)));
  g.check("prober_elaborate");
  g.arm("prober_binary");
  EXPECT_EQ(prober.ask_binary(fixture_image, "Is it true that the apple is green?"), "yes");
  g.check("prober_binary");
}

TEST(GoldenFixtures, Nli) {
  Golden g;
  remote::Nli nli(g.client, g.ep, g.ins.id("nli"), g.ins.fingerprint());
  g.arm("nli");
  EXPECT_EQ(normalize_nli_label(nli.judge("A red vase stands on a wooden table next to an apple.", "the vase is red",
                                          VerdictStage::caption_nli)),
            NliLabel::entailment);
  g.check("nli");
  g.arm("nli_probe");
  EXPECT_EQ(normalize_nli_label(nli.judge("The apple is red.", "the apple is green", VerdictStage::probe_nli)),
            NliLabel::contradiction);
  g.check("nli_probe");
}

TEST(GoldenFixtures, Decomposer) {
  Golden g;
  remote::Decomposer d(g.client, g.ep, g.ins.id("decomposer"), g.ins.fingerprint());
  g.arm("decomposer");
  const auto els = d.decompose(fixture_prompt, MediaKind::image);
  g.check("decomposer");
  ASSERT_EQ(els.size(), 4u);
  EXPECT_NO_THROW(validate_element_list(els));
  EXPECT_EQ(els[3].importance, Importance::extra);
  EXPECT_EQ(els[2].semantic_category, SemanticCategory::spatial);
  EXPECT_FALSE(els[2].probe_question.has_value());
}

TEST(GoldenFixtures, Rewriter) {
  Golden g;
  remote::Rewriter rw(g.client, g.ep, g.ins);
  g.arm("rewriter");
  RewriteRequest r;
  r.mode = RevisionMode::failure_targeted;
  r.parent_text = fixture_prompt.text;
  r.failures = {"the apple is green"};
  r.satisfied = {"the vase is red", "the apple is on the table"};
  r.caption_excerpts = {"A red vase and a red apple on a table."};
  r.variant_count = 2;
  EXPECT_EQ(rw.rewrite(r).size(), 2u);
  g.check("rewriter");
}

TEST(GoldenFixtures, Reward) {
  Golden g;
  remote::Reward reward(g.client, g.ep, g.ins.id("reward"), g.ins.fingerprint());
  g.arm("reward");
  EXPECT_EQ(reward.reward(fixture_prompt, fixture_image), 0.8125);
  g.check("reward");
}

TEST(GoldenFixtures, ErrorReply) {
  Golden g;
  remote::Captioner cap(g.client, g.ep, g.ins.id("captioner"), g.ins.fingerprint());
  g.arm("error");
  EXPECT_EQ(wire_failure_of([&] { cap.caption(fixture_image); }), WireFailure::remote_failure);
  g.check("error");
}

TEST(GoldenFixtures, EveryFixtureIsCanonicalAndPaired) {
  Golden g;
  int pairs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(g.dir())) {
    const std::string name = entry.path().filename().string();
    const auto pos = name.find(".request.json");
    if (pos == std::string::npos) continue;
    const std::string stem = name.substr(0, pos);
    const std::string req = slurp(entry.path());
    const std::string res = slurp(g.dir() / (stem + ".response.json"));
    const Json rq = Json::parse(req);
    EXPECT_EQ(canonical(rq) + "\n", req) << stem;
    EXPECT_EQ(canonical(Json::parse(res)) + "\n", res) << stem;
    EXPECT_EQ(rq["schema"], "pris-wire/1");
    EXPECT_TRUE(std::find(capability_names.begin(), capability_names.end(), rq["capability"].get<std::string>()) !=
                capability_names.end());
    EXPECT_FALSE(rq.contains("media")) << "media must sit inside payload";
    ++pairs;
  }
  EXPECT_EQ(pairs, 12);
}

// ---------------------------------------------------------------------------
// Profiles

TEST(Profiles, ShippedProfilesParse) {
  for (const char* f : {"sim.json", "remote_local.json", "mixed_remote_nli.json"}) {
    EXPECT_NO_THROW(load_profile(test::source_dir() / "profiles" / f)) << f;
  }
}

TEST(Profiles, MixedProfileBindsRemoteNliOnly) {
  const auto p = load_profile(test::source_dir() / "profiles" / "mixed_remote_nli.json");
  const auto b = build_backends(p);
  EXPECT_NE(dynamic_cast<remote::Nli*>(b.set.nli.get()), nullptr);
  EXPECT_NE(dynamic_cast<sim::SimGenerator*>(b.set.generator.get()), nullptr);
  EXPECT_NE(b.set.nli->fingerprint().find("nli@v1"), std::string::npos);
}

TEST(Profiles, AllSevenCapabilitiesRequired) {
  Json j = Json::parse(R"({"name":"x","capabilities":{"generator":"simulated"}})");
  EXPECT_THROW(parse_profile(j), Error);
  j["capabilities"] = {{"generator", "simulated"}, {"captioner", "simulated"}, {"prober", "simulated"},
                       {"nli", "ftp://nope"},      {"decomposer", "simulated"}, {"rewriter", "simulated"},
                       {"reward", "simulated"}};
  EXPECT_THROW(parse_profile(j), Error);
}

TEST(Profiles, ResolvedProfileInlinesWorlds) {
  const auto p = load_profile(test::source_dir() / "profiles" / "sim.json");
  const Json r = p.resolved();
  const auto again = parse_profile(r);
  EXPECT_EQ(again.worlds.size(), p.worlds.size());
  EXPECT_EQ(build_backends(again).fingerprint, build_backends(p).fingerprint);
}
