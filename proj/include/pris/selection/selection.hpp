#pragma once

// Coverage-maximizing top-k selection and common-failure diagnosis.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pris/core/records.hpp"
#include "pris/core/types.hpp"

namespace pris {

enum class SelectionMethod { exhaustive, greedy };

inline std::string_view to_string(SelectionMethod m) {
  return m == SelectionMethod::exhaustive ? "exhaustive" : "greedy";
}

struct TopKSelection {
  std::vector<std::string> chosen;   // ascending candidate-id order
  std::vector<int> covered_elements; // ascending
  bool tie_broken = false;
  SelectionMethod method = SelectionMethod::exhaustive;

  bool operator==(const TopKSelection&) const = default;
};

struct SelectionOptions {
  // Exhaustive search while C(M, k) stays at or below this many subsets.
  std::uint64_t exhaustive_limit = 10'000;
  // When false only core elements count toward coverage.
  bool count_extra = true;
};

inline void to_json(Json& j, const TopKSelection& s) {
  j = Json{{"chosen", s.chosen},
           {"covered_elements", s.covered_elements},
           {"tie_broken", s.tie_broken},
           {"method", to_string(s.method)}};
}

// C(n, k) saturating at `cap + 1`.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(r + 0.5L);
}

namespace detail {

struct Pool {
  std::vector<const Candidate*> items;  // ascending id
  std::vector<std::vector<bool>> entailed;
  std::vector<int> element_ids;
};

inline Pool build_pool(const std::vector<Candidate>& candidates, const std::vector<SemanticElement>* elements,
                       bool count_extra) {
  Pool pool;
  for (const auto& c : candidates) pool.items.push_back(&c);
  std::sort(pool.items.begin(), pool.items.end(),
            [](const Candidate* a, const Candidate* b) { return a->candidate_id < b->candidate_id; });
  for (std::size_t i = 1; i < pool.items.size(); ++i)
    require(pool.items[i]->candidate_id != pool.items[i - 1]->candidate_id, ErrorKind::invalid_argument,
            "duplicate candidate id '" + pool.items[i]->candidate_id + "'");

  std::optional<std::set<int>> ids;
  for (const Candidate* c : pool.items) {
    require(c->report.has_value(), ErrorKind::unverified_candidate, "candidate '" + c->candidate_id + "' has no report");
    std::set<int> mine;
    for (const auto& ev : c->report->per_element) mine.insert(ev.element_id);
    if (!ids) ids = mine;
    require(*ids == mine, ErrorKind::mismatched_element_sets,
            "candidate '" + c->candidate_id + "' was verified against a different element set");
  }
  std::set<int> counted = ids.value_or(std::set<int>{});
  if (elements) {
    std::set<int> declared;
    for (const auto& e : *elements) declared.insert(e.element_id);
    require(pool.items.empty() || declared == counted, ErrorKind::mismatched_element_sets,
            "reports do not match the element list");
    if (!count_extra)
      for (const auto& e : *elements)
        if (e.importance == Importance::extra) counted.erase(e.element_id);
  }
  pool.element_ids.assign(counted.begin(), counted.end());
  for (const Candidate* c : pool.items) {
    std::vector<bool> row;
    for (int id : pool.element_ids) row.push_back(c->report->entailed(id));
    pool.entailed.push_back(std::move(row));
  }
  return pool;
}

inline int coverage(const Pool& pool, const std::vector<std::size_t>& subset) {
  int n = 0;
  for (std::size_t e = 0; e < pool.element_ids.size(); ++e)
    for (std::size_t i : subset)
      if (pool.entailed[i][e]) { ++n; break; }
  return n;
}

inline std::vector<int> covered_ids(const Pool& pool, const std::vector<std::size_t>& subset) {
  std::vector<int> out;
  for (std::size_t e = 0; e < pool.element_ids.size(); ++e)
    for (std::size_t i : subset)
      if (pool.entailed[i][e]) { out.push_back(pool.element_ids[e]); break; }
  return out;
}

inline double reward_of(const Pool& pool, std::size_t i) {
  const auto& r = pool.items[i]->scalar_reward;
  require(r.has_value(), ErrorKind::missing_scalar_reward,
          "tie-break needs a scalar reward for '" + pool.items[i]->candidate_id + "'");
  return *r;
}

}  // namespace detail

// Picks min(k, M) candidates maximizing the number of elements entailed by at
// least one of them. Coverage ties go to the larger reward sum, then to the
// lexicographically smallest id list.
inline TopKSelection select_top_k(const std::vector<Candidate>& candidates, int k,
                                  const SelectionOptions& options = {},
                                  const std::vector<SemanticElement>* elements = nullptr) {
  require(k >= 1, ErrorKind::invalid_argument, "k must be positive");
  require(!candidates.empty(), ErrorKind::empty_selection, "no candidates to select from");
  const detail::Pool pool = detail::build_pool(candidates, elements, options.count_extra);
  const std::size_t m = pool.items.size();
  const std::size_t size = std::min<std::size_t>(static_cast<std::size_t>(k), m);

  TopKSelection out;
  std::vector<std::size_t> best;

  if (binomial_capped(m, size, options.exhaustive_limit) <= options.exhaustive_limit) {
    out.method = SelectionMethod::exhaustive;
    // Lexicographic enumeration of index combinations; indices follow id order
    // so the first subset found at a given key is the id-smallest.
    std::vector<std::vector<std::size_t>> maximal;
    int best_cov = -1;
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      const int cov = detail::coverage(pool, idx);
      if (cov > best_cov) {
        best_cov = cov;
        maximal.clear();
      }
      if (cov == best_cov) maximal.push_back(idx);
      // next combination
      std::size_t pos = size;
      while (pos > 0 && idx[pos - 1] == m - size + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
    best = maximal.front();
    if (maximal.size() > 1) {
      out.tie_broken = true;
      double best_sum = 0.0;
      bool first = true;
      for (const auto& s : maximal) {
        double sum = 0.0;
        for (std::size_t i : s) sum += detail::reward_of(pool, i);
        if (first || sum > best_sum) {
          best_sum = sum;
          best = s;
          first = false;
        }
      }
    }
  } else {
    out.method = SelectionMethod::greedy;
    std::vector<bool> taken(m, false);
    std::vector<bool> covered(pool.element_ids.size(), false);
    for (std::size_t pick = 0; pick < size; ++pick) {
      std::vector<std::size_t> top;
      int top_gain = -1;
      for (std::size_t i = 0; i < m; ++i) {
        if (taken[i]) continue;
        int gain = 0;
        for (std::size_t e = 0; e < covered.size(); ++e)
          if (!covered[e] && pool.entailed[i][e]) ++gain;
        if (gain > top_gain) {
          top_gain = gain;
          top.clear();
        }
        if (gain == top_gain) top.push_back(i);
      }
      std::size_t chosen = top.front();
      if (top.size() > 1) {
        out.tie_broken = true;
        double best_r = detail::reward_of(pool, chosen);
        for (std::size_t i : top) {
          const double r = detail::reward_of(pool, i);
          if (r > best_r) best_r = r, chosen = i;
        }
      }
      taken[chosen] = true;
      best.push_back(chosen);
      for (std::size_t e = 0; e < covered.size(); ++e)
        if (pool.entailed[chosen][e]) covered[e] = true;
    }
    std::sort(best.begin(), best.end());
  }

  for (std::size_t i : best) out.chosen.push_back(pool.items[i]->candidate_id);
  out.covered_elements = detail::covered_ids(pool, best);
  return out;
}

// ---------------------------------------------------------------------------

struct ElementSuccess {
  int hits = 0;
  int k = 0;

  bool operator==(const ElementSuccess&) const = default;
};

struct FailureDiagnosis {
  std::vector<int> common_failures;
  std::map<int, ElementSuccess> per_element_success;
  bool exploration_mode = false;

  bool operator==(const FailureDiagnosis&) const = default;
};

inline void to_json(Json& j, const FailureDiagnosis& d) {
  Json table = Json::array();
  for (const auto& [id, s] : d.per_element_success)
    table.push_back(Json{{"element_id", id}, {"hits", s.hits}, {"k", s.k}});
  j = Json{{"common_failures", d.common_failures},
           {"per_element_success", table},
           {"exploration_mode", d.exploration_mode}};
}

// An element is a common failure when hits/k is strictly below the threshold
// (num/den, default 1/2).
struct FailureThreshold {
  int num = 1;
  int den = 2;
};

inline FailureDiagnosis diagnose(const TopKSelection& selection, const std::vector<VerificationReport>& chosen_reports,
                                 const std::vector<SemanticElement>& elements, FailureThreshold threshold = {}) {
  require(threshold.den > 0 && threshold.num >= 0 && threshold.num <= threshold.den, ErrorKind::invalid_argument,
          "threshold must lie in [0, 1]");
  require(!selection.chosen.empty(), ErrorKind::empty_selection, "nothing selected");
  std::map<std::string, const VerificationReport*> by_id;
  for (const auto& r : chosen_reports) by_id[r.candidate_id] = &r;

  FailureDiagnosis d;
  const int k = static_cast<int>(selection.chosen.size());
  for (const auto& e : elements) d.per_element_success[e.element_id] = ElementSuccess{0, k};
  for (const auto& id : selection.chosen) {
    auto it = by_id.find(id);
    require(it != by_id.end(), ErrorKind::unverified_candidate, "no report for chosen candidate '" + id + "'");
    for (const auto& e : elements) {
      require(it->second->find(e.element_id) != nullptr, ErrorKind::missing_element,
              "report '" + id + "' lacks element " + std::to_string(e.element_id));
      if (it->second->entailed(e.element_id)) ++d.per_element_success[e.element_id].hits;
    }
  }
  for (const auto& [id, s] : d.per_element_success)
    if (static_cast<long long>(s.hits) * threshold.den < static_cast<long long>(threshold.num) * s.k)
      d.common_failures.push_back(id);
  d.exploration_mode = d.common_failures.empty();
  return d;
}

}  // namespace pris
