#pragma once

// Capability interfaces every backend implements. The engine only ever talks
// to models through these seven seams.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pris/core/hash.hpp"
#include "pris/core/records.hpp"
#include "pris/core/types.hpp"

namespace pris {

enum class RevisionMode { failure_targeted, exploration, standard_expansion, per_sample };

inline std::string_view to_string(RevisionMode m) {
  switch (m) {
    case RevisionMode::failure_targeted: return "failure_targeted";
    case RevisionMode::exploration: return "exploration";
    case RevisionMode::standard_expansion: return "standard_expansion";
    case RevisionMode::per_sample: return "per_sample";
  }
  return "?";
}

inline RevisionMode parse_revision_mode(std::string_view s) {
  for (auto m : {RevisionMode::failure_targeted, RevisionMode::exploration, RevisionMode::standard_expansion,
                 RevisionMode::per_sample})
    if (to_string(m) == s) return m;
  fail(ErrorKind::invalid_argument, "unknown revision mode '" + std::string(s) + "'");
}

// What the rewriter backend is asked to do. Text-only: failures, preserved
// content and caption excerpts, never the visuals themselves.
struct RewriteRequest {
  RevisionMode mode = RevisionMode::failure_targeted;
  std::string parent_text;
  std::vector<std::string> failures;
  std::vector<std::string> satisfied;
  std::vector<std::string> caption_excerpts;
  int variant_count = 1;
  int attempt = 0;  // 1 on the single validation retry
};

class Generator {
 public:
  virtual ~Generator() = default;
  // `sampler_options` is passed through untouched; it is the hook for
  // trajectory-level search methods.
  virtual VisualHandle generate(const PromptRecord& prompt, std::uint64_t seed, int steps, bool cfg,
                                MediaKind media_kind, const Json& sampler_options) = 0;
  virtual std::string fingerprint() const = 0;
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string caption(const VisualHandle& visual) = 0;
  virtual std::string fingerprint() const = 0;
};

class Prober {
 public:
  virtual ~Prober() = default;
  // Open-ended question; `elaborate` is set on the retry after a bare yes/no.
  virtual std::string probe(const VisualHandle& visual, const std::string& question, bool elaborate) = 0;
  // Closed yes/no question, used only by the binary-VQA ablation strategy.
  virtual std::string ask_binary(const VisualHandle& visual, const std::string& question) = 0;
  virtual std::string fingerprint() const = 0;
};

class NliModel {
 public:
  virtual ~NliModel() = default;
  // Raw label text; the engine normalizes it.
  virtual std::string judge(const std::string& premise, const std::string& hypothesis, VerdictStage stage) = 0;
  virtual std::string fingerprint() const = 0;
};

class Decomposer {
 public:
  virtual ~Decomposer() = default;
  virtual std::vector<SemanticElement> decompose(const PromptRecord& prompt, MediaKind media_kind) = 0;
  virtual std::string fingerprint() const = 0;
};

class Rewriter {
 public:
  virtual ~Rewriter() = default;
  virtual std::vector<std::string> rewrite(const RewriteRequest& request) = 0;
  virtual std::string fingerprint() const = 0;
};

class RewardModel {
 public:
  virtual ~RewardModel() = default;
  virtual double reward(const PromptRecord& original_prompt, const VisualHandle& visual) = 0;
  virtual std::string fingerprint() const = 0;
};

// ---------------------------------------------------------------------------
// Cost accounting
// ---------------------------------------------------------------------------

// Durations in integer microseconds so that sums are order-independent.
struct CallTally {
  std::map<std::string, std::int64_t> micros_by_stage;
  std::map<std::string, int> calls_by_backend;

  void record(const std::string& capability, std::int64_t micros) {
    micros_by_stage[capability] += micros;
    calls_by_backend[capability] += 1;
  }

  void merge(const CallTally& other) {
    for (const auto& [k, v] : other.micros_by_stage) micros_by_stage[k] += v;
    for (const auto& [k, v] : other.calls_by_backend) calls_by_backend[k] += v;
  }

  bool operator==(const CallTally&) const = default;
};

inline void to_json(Json& j, const CallTally& t) {
  j = Json{{"micros_by_stage", t.micros_by_stage}, {"calls_by_backend", t.calls_by_backend}};
}
inline void from_json(const Json& j, CallTally& t) {
  t.micros_by_stage = j.value("micros_by_stage", std::map<std::string, std::int64_t>{});
  t.calls_by_backend = j.value("calls_by_backend", std::map<std::string, int>{});
}

// Assigns a duration to each backend call.
class StageClock {
 public:
  virtual ~StageClock() = default;
  virtual std::int64_t measure(std::string_view capability, MediaKind media_kind,
                               const std::function<void()>& call) = 0;
};

// Real elapsed time.
class SteadyStageClock final : public StageClock {
 public:
  std::int64_t measure(std::string_view, MediaKind, const std::function<void()>& call) override {
    const auto start = std::chrono::steady_clock::now();
    call();
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start).count();
  }
};

// Fixed per-call costs. Keeps simulated runs byte-reproducible while the
// ledger still carries realistic stage proportions.
class ModeledStageClock final : public StageClock {
 public:
  struct Costs {
    // seconds per call: {image, video}
    std::map<std::string, std::pair<double, double>> per_call = {
        {"generator", {13.0, 105.0}}, {"captioner", {25.0, 60.0}}, {"prober", {4.0, 10.0}},
        {"nli", {1.0, 1.0}},          {"decomposer", {3.0, 3.0}},  {"rewriter", {5.0, 5.0}},
        {"reward", {1.0, 2.0}},
    };
  };

  ModeledStageClock() = default;
  explicit ModeledStageClock(Costs costs) : costs_(std::move(costs)) {}

  std::int64_t measure(std::string_view capability, MediaKind media_kind,
                       const std::function<void()>& call) override {
    call();
    auto it = costs_.per_call.find(std::string(capability));
    if (it == costs_.per_call.end()) return 0;
    const double seconds = media_kind == MediaKind::image ? it->second.first : it->second.second;
    return static_cast<std::int64_t>(seconds * 1'000'000.0);
  }

 private:
  Costs costs_;
};

// Runs `fn` under `clock`, recording the call into `tally`.
template <typename Fn>
auto timed(StageClock& clock, CallTally& tally, const std::string& capability, MediaKind media_kind, Fn&& fn) {
  using Result = decltype(fn());
  if constexpr (std::is_void_v<Result>) {
    const auto micros = clock.measure(capability, media_kind, [&] { fn(); });
    tally.record(capability, micros);
  } else {
    Result result{};
    std::int64_t micros = 0;
    try {
      micros = clock.measure(capability, media_kind, [&] { result = fn(); });
    } catch (...) {
      tally.record(capability, 0);
      throw;
    }
    tally.record(capability, micros);
    return result;
  }
}

// ---------------------------------------------------------------------------

struct BackendSet {
  std::shared_ptr<Generator> generator;
  std::shared_ptr<Captioner> captioner;
  std::shared_ptr<Prober> prober;
  std::shared_ptr<NliModel> nli;
  std::shared_ptr<Decomposer> decomposer;
  std::shared_ptr<Rewriter> rewriter;
  std::shared_ptr<RewardModel> reward;
  std::shared_ptr<StageClock> clock = std::make_shared<SteadyStageClock>();

  void validate() const {
    require(generator && captioner && prober && nli && decomposer && rewriter && reward && clock,
            ErrorKind::invalid_argument, "backend set must bind all seven capabilities");
  }

  std::string fingerprint() const {
    validate();
    Json j{{"generator", generator->fingerprint()}, {"captioner", captioner->fingerprint()},
           {"prober", prober->fingerprint()},       {"nli", nli->fingerprint()},
           {"decomposer", decomposer->fingerprint()}, {"rewriter", rewriter->fingerprint()},
           {"reward", reward->fingerprint()}};
    return sha256_hex(canonical(j)).substr(0, 16);
  }
};

}  // namespace pris
