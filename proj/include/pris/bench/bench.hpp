#pragma once

// Verifier benchmark: each entry is a prompt with a pool of visuals and
// annotator votes. A strategy scores every item; the entry is a hit when the
// top-scored item's majority label is aligned.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pris/backends/simulated.hpp"
#include "pris/orchestrator/engine.hpp"
#include "pris/verifier/efc.hpp"

namespace pris::bench {

enum class BenchCategory { motion, physics, dynamic_attributes, motion_rationality, motion_order, other };

inline constexpr std::array<BenchCategory, 6> all_categories = {
    BenchCategory::motion,           BenchCategory::physics,      BenchCategory::dynamic_attributes,
    BenchCategory::motion_rationality, BenchCategory::motion_order, BenchCategory::other};

inline std::string_view to_string(BenchCategory c) {
  switch (c) {
    case BenchCategory::motion: return "motion";
    case BenchCategory::physics: return "physics";
    case BenchCategory::dynamic_attributes: return "dynamic_attributes";
    case BenchCategory::motion_rationality: return "motion_rationality";
    case BenchCategory::motion_order: return "motion_order";
    case BenchCategory::other: return "other";
  }
  return "?";
}

inline BenchCategory parse_bench_category(std::string_view s) {
  for (auto c : all_categories)
    if (to_string(c) == s) return c;
  fail(ErrorKind::invalid_argument, "unknown benchmark category '" + std::string(s) + "'");
}

struct Vote {
  bool aligned = true;
  std::string reason;  // set for misaligned votes

  bool operator==(const Vote&) const = default;
};

enum class MajorityLabel { aligned, misaligned };

inline MajorityLabel majority_label(const std::vector<Vote>& votes) {
  require(votes.size() % 2 == 1, ErrorKind::even_vote_count,
          "majority needs an odd number of votes, got " + std::to_string(votes.size()));
  std::size_t yes = 0;
  for (const auto& v : votes) yes += v.aligned ? 1 : 0;
  return 2 * yes > votes.size() ? MajorityLabel::aligned : MajorityLabel::misaligned;
}

struct PoolItem {
  VisualHandle visual;
  std::vector<Vote> votes;

  bool operator==(const PoolItem&) const = default;
};

struct BenchmarkEntry {
  PromptRecord prompt;
  std::vector<PoolItem> pool;

  BenchCategory category() const {
    return prompt.category ? parse_bench_category(*prompt.category) : BenchCategory::other;
  }

  void validate() const {
    prompt.validate();
    category();
    const std::string ctx = "entry '" + prompt.prompt_id + "': ";
    require(pool.size() >= 2, ErrorKind::invalid_argument, ctx + "pool needs at least two items");
    bool any_aligned = false;
    for (const auto& item : pool) {
      require(item.votes.size() >= 3, ErrorKind::invalid_argument, ctx + "each item needs at least three votes");
      any_aligned = any_aligned || majority_label(item.votes) == MajorityLabel::aligned;
    }
    require(any_aligned, ErrorKind::invalid_argument, ctx + "no item is aligned by majority");
  }

  bool operator==(const BenchmarkEntry&) const = default;
};

inline void to_json(Json& j, const Vote& v) {
  j = v.aligned ? Json{{"label", "aligned"}} : Json{{"label", "misaligned"}, {"reason", v.reason}};
}
inline void from_json(const Json& j, Vote& v) {
  const std::string label = field<std::string>(j, "label");
  require(label == "aligned" || label == "misaligned", ErrorKind::invalid_argument, "bad vote label '" + label + "'");
  v.aligned = label == "aligned";
  v.reason = j.value("reason", std::string());
}
inline void to_json(Json& j, const PoolItem& p) { j = Json{{"visual", p.visual}, {"votes", p.votes}}; }
inline void from_json(const Json& j, PoolItem& p) {
  p.visual = field<VisualHandle>(j, "visual");
  p.votes = field<std::vector<Vote>>(j, "votes");
}
inline void to_json(Json& j, const BenchmarkEntry& e) {
  j = make_record("benchmark_entry", Json{{"prompt", e.prompt}, {"pool", e.pool}});
}
inline void from_json(const Json& j, BenchmarkEntry& e) {
  e.prompt = field<PromptRecord>(j, "prompt");
  e.pool = field<std::vector<PoolItem>>(j, "pool");
}

// One canonical record per line.
inline std::vector<BenchmarkEntry> read_manifest(std::istream& in) {
  std::vector<BenchmarkEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const Json j = parse_record(line);
      require(j.value("type", "") == "benchmark_entry", ErrorKind::invalid_argument, "not a benchmark_entry record");
      out.push_back(j.get<BenchmarkEntry>());
      out.back().validate();
    } catch (const Error& e) {
      fail(e.kind(), "manifest line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<BenchmarkEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::invalid_argument, "cannot read manifest " + path.string());
  return read_manifest(in);
}

inline std::string write_manifest(const std::vector<BenchmarkEntry>& entries) {
  std::string s;
  for (const auto& e : entries) s += canonical(Json(e)) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyKind { efc, caption_nli, decomposed_binary_vqa, scalar_reward, oracle, random };

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::efc: return "efc";
    case StrategyKind::caption_nli: return "caption_nli";
    case StrategyKind::decomposed_binary_vqa: return "decomposed_binary_vqa";
    case StrategyKind::scalar_reward: return "scalar_reward";
    case StrategyKind::oracle: return "oracle";
    case StrategyKind::random: return "random";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view s) {
  for (auto k : {StrategyKind::efc, StrategyKind::caption_nli, StrategyKind::decomposed_binary_vqa,
                 StrategyKind::scalar_reward, StrategyKind::oracle, StrategyKind::random})
    if (to_string(k) == s) return k;
  if (s == "binary_vqa" || s == "decomposed-binary-vqa") return StrategyKind::decomposed_binary_vqa;
  fail(ErrorKind::invalid_argument, "unknown strategy '" + std::string(s) + "'");
}

struct ItemScore {
  std::optional<AlignmentScore> alignment;
  std::optional<double> scalar;
};

inline void to_json(Json& j, const ItemScore& s) {
  j = Json::object();
  if (s.alignment) j["alignment"] = *s.alignment;
  if (s.scalar) j["scalar"] = *s.scalar;
}

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual StrategyKind kind() const = 0;
  virtual ItemScore score(const BenchmarkEntry& entry, std::size_t item, CallTally& tally) = 0;
};

// "yes"/"no" leading word of a binary answer.
inline bool parse_yes_no(const std::string& answer) {
  std::string a = ascii_lower(trim(answer));
  std::size_t e = 0;
  while (e < a.size() && std::isalpha(static_cast<unsigned char>(a[e]))) ++e;
  const std::string w = a.substr(0, e);
  if (w == "yes") return true;
  if (w == "no") return false;
  fail(ErrorKind::degenerate_answer, "binary question answered with '" + answer + "'");
}

inline std::string binary_question(const SemanticElement& e) { return "Is it true that " + e.text + "?"; }

// Covers efc, caption_nli and decomposed_binary_vqa: all share the EFC
// decomposition and differ in how an element is judged.
class ElementStrategy final : public Strategy {
 public:
  ElementStrategy(StrategyKind kind, BackendSet backends)
      : kind_(kind), verifier_(std::move(backends), VerifierOptions{kind != StrategyKind::caption_nli}) {}

  StrategyKind kind() const override { return kind_; }

  ItemScore score(const BenchmarkEntry& entry, std::size_t item, CallTally& tally) override {
    const VisualHandle& visual = entry.pool.at(item).visual;
    const auto decomp = verifier_.decompose(entry.prompt, visual.media_kind, tally);
    ItemScore s;
    if (kind_ == StrategyKind::decomposed_binary_vqa) {
      AlignmentScore a;
      for (const auto& e : decomp.elements) {
        const std::string answer = timed(*verifier_.backends().clock, tally, "prober", visual.media_kind, [&] {
          return pris::detail::guard_backend(
              "prober", [&] { return verifier_.backends().prober->ask_binary(visual, binary_question(e)); });
        });
        const bool yes = parse_yes_no(answer);
        (e.importance == Importance::core ? a.core_total : a.extra_total) += 1;
        (e.importance == Importance::core ? a.core_hits : a.extra_hits) += yes ? 1 : 0;
      }
      s.alignment = a;
      return s;
    }
    const auto report = verifier_.verify(decomp, entry.prompt.prompt_id + "#" + std::to_string(item), visual, tally);
    s.alignment = score_report(report, decomp.elements);
    if (kind_ == StrategyKind::efc) s.scalar = reward(entry, visual, tally);
    return s;
  }

  EfcVerifier& verifier() { return verifier_; }

 private:
  double reward(const BenchmarkEntry& entry, const VisualHandle& visual, CallTally& tally) {
    return timed(*verifier_.backends().clock, tally, "reward", visual.media_kind, [&] {
      return pris::detail::guard_backend("reward",
                                         [&] { return verifier_.backends().reward->reward(entry.prompt, visual); });
    });
  }

  StrategyKind kind_;
  EfcVerifier verifier_;
};

class ScalarRewardStrategy final : public Strategy {
 public:
  explicit ScalarRewardStrategy(std::shared_ptr<RewardModel> reward, std::shared_ptr<StageClock> clock)
      : reward_(std::move(reward)), clock_(std::move(clock)) {}
  StrategyKind kind() const override { return StrategyKind::scalar_reward; }
  ItemScore score(const BenchmarkEntry& entry, std::size_t item, CallTally& tally) override {
    const VisualHandle& v = entry.pool.at(item).visual;
    ItemScore s;
    s.scalar = timed(*clock_, tally, "reward", v.media_kind, [&] {
      return pris::detail::guard_backend("reward", [&] { return reward_->reward(entry.prompt, v); });
    });
    require(std::isfinite(*s.scalar), ErrorKind::backend_error, "reward is not finite");
    return s;
  }

 private:
  std::shared_ptr<RewardModel> reward_;
  std::shared_ptr<StageClock> clock_;
};

// Reads the ground truth; a sanity ceiling.
class OracleStrategy final : public Strategy {
 public:
  StrategyKind kind() const override { return StrategyKind::oracle; }
  ItemScore score(const BenchmarkEntry& entry, std::size_t item, CallTally&) override {
    ItemScore s;
    s.scalar = majority_label(entry.pool.at(item).votes) == MajorityLabel::aligned ? 1.0 : 0.0;
    return s;
  }
};

// Keyed uniform draws; a sanity floor.
class RandomStrategy final : public Strategy {
 public:
  explicit RandomStrategy(std::uint64_t seed) : seed_(seed) {}
  StrategyKind kind() const override { return StrategyKind::random; }
  ItemScore score(const BenchmarkEntry& entry, std::size_t item, CallTally&) override {
    ItemScore s;
    s.scalar = KeyedRng::uniform({seed_, stable_hash64(entry.prompt.prompt_id), item, key(Stream::bench)});
    return s;
  }

 private:
  std::uint64_t seed_;
};

inline std::unique_ptr<Strategy> make_strategy(StrategyKind kind, const BackendSet& backends,
                                               std::uint64_t seed = 0) {
  switch (kind) {
    case StrategyKind::efc:
    case StrategyKind::caption_nli:
    case StrategyKind::decomposed_binary_vqa: return std::make_unique<ElementStrategy>(kind, backends);
    case StrategyKind::scalar_reward: return std::make_unique<ScalarRewardStrategy>(backends.reward, backends.clock);
    case StrategyKind::oracle: return std::make_unique<OracleStrategy>();
    case StrategyKind::random: return std::make_unique<RandomStrategy>(seed);
  }
  fail(ErrorKind::invalid_argument, "unknown strategy");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

enum class TieBreak { none, scalar, item_order };

inline std::string_view to_string(TieBreak t) {
  switch (t) {
    case TieBreak::none: return "none";
    case TieBreak::scalar: return "scalar";
    case TieBreak::item_order: return "item_order";
  }
  return "?";
}

struct EntryTrace {
  std::string prompt_id;
  BenchCategory category = BenchCategory::other;
  bool failed = false;
  std::string error;
  std::vector<ItemScore> scores;
  std::size_t chosen = 0;
  bool hit = false;
  TieBreak tie_break = TieBreak::none;
};

inline void to_json(Json& j, const EntryTrace& t) {
  j = Json{{"prompt_id", t.prompt_id}, {"category", to_string(t.category)}, {"failed", t.failed}};
  if (t.failed) {
    j["error"] = t.error;
    return;
  }
  j["scores"] = t.scores;
  j["chosen"] = t.chosen;
  j["hit"] = t.hit;
  j["tie_break"] = to_string(t.tie_break);
}

struct Tally {
  int hits = 0;
  int count = 0;
  double accuracy() const { return count == 0 ? 0.0 : double(hits) / double(count); }
  bool operator==(const Tally&) const = default;
};

struct EvalResult {
  StrategyKind strategy = StrategyKind::efc;
  Tally overall;
  std::map<BenchCategory, Tally> per_category;
  int failed_entries = 0;
  std::vector<EntryTrace> traces;
  CallTally calls;
};

// Index of the top item and the rule that settled it. Alignment first, then
// the scalar, then the earlier item.
inline std::pair<std::size_t, TieBreak> arg_top(const std::vector<ItemScore>& scores) {
  // 1 if a outranks b, -1 if b outranks a, 0 on a full tie; `by` gets the rule used.
  auto rank = [](const ItemScore& a, const ItemScore& b, TieBreak& by) {
    by = TieBreak::none;
    if (a.alignment && b.alignment) {
      const Ordering o = compare_scores(*a.alignment, *b.alignment);
      if (o != Ordering::tie) return o == Ordering::a_wins ? 1 : -1;
      by = TieBreak::scalar;
    }
    if (a.scalar && b.scalar && *a.scalar != *b.scalar) return *a.scalar > *b.scalar ? 1 : -1;
    by = TieBreak::item_order;
    return 0;
  };
  std::size_t best = 0;
  TieBreak by = TieBreak::none;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (rank(scores[i], scores[best], by) > 0) best = i;
  // The strongest rule needed to separate the winner from any rival.
  TieBreak how = TieBreak::none;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == best) continue;
    rank(scores[best], scores[i], by);
    how = std::max(how, by);
  }
  return {best, how};
}

inline EvalResult evaluate(Strategy& strategy, const std::vector<BenchmarkEntry>& entries, int parallelism = 1) {
  for (const auto& e : entries) e.validate();
  struct Work {
    EntryTrace trace;
    CallTally calls;
  };
  auto work = parallel_map<Work>(entries.size(), parallelism, [&](std::size_t n) {
    const auto& entry = entries[n];
    Work w;
    w.trace.prompt_id = entry.prompt.prompt_id;
    w.trace.category = entry.category();
    try {
      for (std::size_t i = 0; i < entry.pool.size(); ++i) w.trace.scores.push_back(strategy.score(entry, i, w.calls));
    } catch (const Error& e) {
      w.trace.failed = true;
      w.trace.error = e.what();
      w.trace.scores.clear();
      return w;
    }
    auto [chosen, how] = arg_top(w.trace.scores);
    w.trace.chosen = chosen;
    w.trace.tie_break = how;
    w.trace.hit = majority_label(entry.pool[chosen].votes) == MajorityLabel::aligned;
    return w;
  });

  EvalResult r;
  r.strategy = strategy.kind();
  for (auto& w : work) {
    r.calls.merge(w.calls);
    if (w.trace.failed) {
      ++r.failed_entries;
    } else {
      auto& cat = r.per_category[w.trace.category];
      ++cat.count;
      ++r.overall.count;
      if (w.trace.hit) {
        ++cat.hits;
        ++r.overall.hits;
      }
    }
    r.traces.push_back(std::move(w.trace));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark over simulated worlds
// ---------------------------------------------------------------------------

struct SynthOptions {
  int entries = 100;
  int pool_size = 4;
  int aligned_per_pool = 1;      // exactly this many fully satisfied items
  int votes = 3;
  double dissent_prob = 0.2;     // chance one annotator disagrees with the truth
  std::uint64_t seed = 0;
  std::vector<BenchCategory> categories = {BenchCategory::motion, BenchCategory::physics,
                                           BenchCategory::dynamic_attributes, BenchCategory::motion_rationality,
                                           BenchCategory::motion_order};
};

// Entries cycle through the universe's worlds. Distractors violate at least
// one element; dissent never flips a majority.
inline std::vector<BenchmarkEntry> synthesize(const sim::SimUniverse& universe, const std::vector<std::string>& world_ids,
                                              const SynthOptions& o) {
  require(!world_ids.empty(), ErrorKind::invalid_argument, "need at least one world");
  require(o.pool_size >= 2 && o.aligned_per_pool >= 1 && o.aligned_per_pool <= o.pool_size,
          ErrorKind::invalid_argument, "need pool_size >= 2 and 1 <= aligned_per_pool <= pool_size");
  require(o.votes >= 3 && o.votes % 2 == 1, ErrorKind::invalid_argument, "votes must be odd and at least 3");
  require(!o.categories.empty(), ErrorKind::invalid_argument, "need at least one category");
  std::vector<BenchmarkEntry> out;
  for (int n = 0; n < o.entries; ++n) {
    const sim::SimWorld& w = universe.world(world_ids[static_cast<std::size_t>(n) % world_ids.size()]);
    const std::size_t ne = w.elements.size();
    auto u = [&](std::uint64_t a, std::uint64_t b, std::uint64_t c) {
      return KeyedRng::uniform({o.seed, static_cast<std::uint64_t>(n), a, b, c, key(Stream::bench)});
    };
    BenchmarkEntry e;
    e.prompt = w.prompt_record();
    e.prompt.prompt_id = w.world_id + "-" + std::to_string(n);
    e.prompt.category = std::string(to_string(o.categories[static_cast<std::size_t>(n) % o.categories.size()]));
    // Aligned slots are placed at keyed positions.
    std::vector<bool> aligned(static_cast<std::size_t>(o.pool_size), false);
    for (int placed = 0, attempt = 0; placed < o.aligned_per_pool; ++attempt) {
      const auto pos = static_cast<std::size_t>(u(1, static_cast<std::uint64_t>(attempt), 0) * o.pool_size);
      if (!aligned[pos]) {
        aligned[pos] = true;
        ++placed;
      }
    }
    for (int i = 0; i < o.pool_size; ++i) {
      const auto ii = static_cast<std::uint64_t>(i);
      std::vector<bool> sat(ne, true);
      if (!aligned[static_cast<std::size_t>(i)]) {
        bool any = false;
        for (std::size_t k = 0; k < ne; ++k) {
          sat[k] = u(2, ii, k) < 0.5;
          any = any || !sat[k];
        }
        if (!any) sat[static_cast<std::size_t>(u(3, ii, 0) * double(ne))] = false;
      }
      const std::uint64_t seed = KeyedRng::bits({o.seed, static_cast<std::uint64_t>(n), ii, key(Stream::fresh_seed)}) >> 32;
      PoolItem item;
      item.visual = universe.make_visual(w, seed, stable_hash64(e.prompt.text), 50, true, sat);
      const bool truth = aligned[static_cast<std::size_t>(i)];
      for (int v = 0; v < o.votes; ++v) item.votes.push_back(Vote{truth, truth ? "" : "element violated"});
      if (u(4, ii, 0) < o.dissent_prob) {
        item.votes.back().aligned = !truth;
        item.votes.back().reason = truth ? "annotator disagreed" : "";
      }
      e.pool.push_back(std::move(item));
    }
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReferenceRow {
  std::string method;
  std::array<double, 5> per_category;  // motion, physics, dynamic attributes, motion rationality, motion order
  double average;
};

// Published figures for real models on a 410-prompt video benchmark. Shown
// for comparison; they are not reproduced by the simulated backend.
inline const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"VisionReward", {0.650, 0.569, 0.319, 0.662, 0.452}, 0.571},
      {"UnifiedReward", {0.492, 0.507, 0.298, 0.588, 0.581}, 0.498},
      {"VideoAlign", {0.792, 0.660, 0.511, 0.794, 0.516}, 0.693},
      {"Decomposed binary VQA", {0.733, 0.667, 0.617, 0.809, 0.613}, 0.700},
      {"EFC", {0.792, 0.764, 0.638, 0.838, 0.677}, 0.763},
  };
  return rows;
}

// Prompts per reference column; the published averages are weighted by these.
inline constexpr std::array<int, 5> reference_category_sizes = {120, 144, 47, 68, 31};

inline std::string render_report(const std::vector<EvalResult>& results) {
  auto f3 = [](double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", x);
    return std::string(b);
  };
  const std::array<BenchCategory, 5> cols = {BenchCategory::motion, BenchCategory::physics,
                                             BenchCategory::dynamic_attributes, BenchCategory::motion_rationality,
                                             BenchCategory::motion_order};
  std::ostringstream md;
  md << "# Verifier benchmark\n\nTop-1 selection accuracy: the share of prompts whose top-scored item is aligned by "
        "majority vote.\n\n";
  md << "| method | motion | physics | dynamic attributes | motion rationality | motion order | average |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : reference_rows()) {
    md << "| " << row.method << " (reference) |";
    for (double x : row.per_category) md << " " << f3(x) << " |";
    md << " " << f3(row.average) << " |\n";
  }
  for (const auto& r : results) {
    md << "| " << to_string(r.strategy) << " (this run) |";
    for (auto c : cols) {
      auto it = r.per_category.find(c);
      md << " " << (it == r.per_category.end() || it->second.count == 0 ? std::string("-") : f3(it->second.accuracy()))
         << " |";
    }
    md << " " << f3(r.overall.accuracy()) << " |\n";
  }
  md << "\nReference rows are published results for real models and are not reproduced by this run.\n\n";
  for (const auto& r : results) {
    int scalar_ties = 0, order_ties = 0;
    for (const auto& t : r.traces) {
      scalar_ties += t.tie_break == TieBreak::scalar;
      order_ties += t.tie_break == TieBreak::item_order;
    }
    md << "## " << to_string(r.strategy) << "\n\n";
    md << "- entries evaluated: " << r.overall.count << " (" << r.overall.hits << " hits)\n";
    md << "- failed entries (excluded): " << r.failed_entries << "\n";
    md << "- top item settled by scalar tie-break: " << scalar_ties << "\n";
    md << "- top item settled by item order: " << order_ties << "\n";
    auto other = r.per_category.find(BenchCategory::other);
    if (other != r.per_category.end())
      md << "- other category: " << other->second.hits << "/" << other->second.count << "\n";
    md << "\n";
  }
  return md.str();
}

inline Json result_record(const EvalResult& r) {
  Json cats = Json::object();
  for (const auto& [c, t] : r.per_category) cats[std::string(to_string(c))] = Json{{"hits", t.hits}, {"count", t.count}};
  return make_record("benchmark_result", Json{{"strategy", to_string(r.strategy)},
                                              {"hits", r.overall.hits},
                                              {"count", r.overall.count},
                                              {"accuracy", r.overall.accuracy()},
                                              {"failed_entries", r.failed_entries},
                                              {"per_category", cats},
                                              {"calls", r.calls}});
}

}  // namespace pris::bench
