#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pris/core/types.hpp"

namespace pris {

enum class Ordering { a_wins, b_wins, tie };

// Counts entailed elements per importance class. The report must cover
// exactly the given elements and carry only final (non-neutral) labels.
inline AlignmentScore score_report(const VerificationReport& report,
                                   const std::vector<SemanticElement>& elements) {
  std::set<int> expected;
  for (const auto& e : elements) expected.insert(e.element_id);

  std::set<int> seen;
  for (const auto& ev : report.per_element) {
    require(expected.count(ev.element_id) == 1, ErrorKind::dangling_element,
            "report '" + report.candidate_id + "' has verdict for unknown element " +
                std::to_string(ev.element_id));
    require(seen.insert(ev.element_id).second, ErrorKind::dangling_element,
            "report '" + report.candidate_id + "' judges element " + std::to_string(ev.element_id) + " twice");
    require(ev.verdict.label != NliLabel::neutral, ErrorKind::neutral_final_label,
            "element " + std::to_string(ev.element_id) + " of '" + report.candidate_id + "' is still neutral");
  }
  for (int id : expected) {
    require(seen.count(id) == 1, ErrorKind::missing_element,
            "report '" + report.candidate_id + "' lacks element " + std::to_string(id));
  }

  AlignmentScore score;
  for (const auto& e : elements) {
    const bool hit = report.entailed(e.element_id);
    if (e.importance == Importance::core) {
      ++score.core_total;
      score.core_hits += hit ? 1 : 0;
    } else {
      ++score.extra_total;
      score.extra_hits += hit ? 1 : 0;
    }
  }
  return score;
}

namespace detail {

// Sign of (a_num/a_den - b_num/b_den) with 0/0 read as 0.
inline int compare_ratio(std::int64_t a_num, std::int64_t a_den, std::int64_t b_num, std::int64_t b_den) {
  if (a_den == 0) a_num = 0, a_den = 1;
  if (b_den == 0) b_num = 0, b_den = 1;
  const std::int64_t lhs = a_num * b_den;
  const std::int64_t rhs = b_num * a_den;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

}  // namespace detail

// Lexicographic on (core accuracy, extra accuracy), exact rational comparison.
inline Ordering compare_scores(const AlignmentScore& a, const AlignmentScore& b) {
  int c = detail::compare_ratio(a.core_hits, a.core_total, b.core_hits, b.core_total);
  if (c == 0) c = detail::compare_ratio(a.extra_hits, a.extra_total, b.extra_hits, b.extra_total);
  if (c > 0) return Ordering::a_wins;
  if (c < 0) return Ordering::b_wins;
  return Ordering::tie;
}

inline std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::a_wins: return "a_wins";
    case Ordering::b_wins: return "b_wins";
    case Ordering::tie: return "tie";
  }
  return "tie";
}

}  // namespace pris
