#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pris {

enum class ErrorKind {
  invalid_argument,
  missing_element,
  dangling_element,
  neutral_final_label,
  backend_error,
  empty_decomposition,
  empty_caption,
  invalid_label,
  degenerate_answer,
  unverified_candidate,
  mismatched_element_sets,
  missing_scalar_reward,
  unfaithful_revision,
  empty_selection,
  budget_exceeded,
  even_vote_count,
  corrupt_log,
};

// Transport-level cause attached to a backend_error.
enum class WireFailure { none, timeout, malformed, remote_failure };

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::missing_element: return "MissingElement";
    case ErrorKind::dangling_element: return "DanglingElement";
    case ErrorKind::neutral_final_label: return "NeutralFinalLabel";
    case ErrorKind::backend_error: return "BackendError";
    case ErrorKind::empty_decomposition: return "EmptyDecomposition";
    case ErrorKind::empty_caption: return "EmptyCaption";
    case ErrorKind::invalid_label: return "InvalidLabel";
    case ErrorKind::degenerate_answer: return "DegenerateAnswer";
    case ErrorKind::unverified_candidate: return "UnverifiedCandidate";
    case ErrorKind::mismatched_element_sets: return "MismatchedElementSets";
    case ErrorKind::missing_scalar_reward: return "MissingScalarReward";
    case ErrorKind::unfaithful_revision: return "UnfaithfulRevision";
    case ErrorKind::empty_selection: return "EmptySelection";
    case ErrorKind::budget_exceeded: return "BudgetExceeded";
    case ErrorKind::even_vote_count: return "EvenVoteCount";
    case ErrorKind::corrupt_log: return "CorruptLog";
  }
  return "Unknown";
}

constexpr std::string_view to_string(WireFailure failure) {
  switch (failure) {
    case WireFailure::none: return "none";
    case WireFailure::timeout: return "Timeout";
    case WireFailure::malformed: return "Malformed";
    case WireFailure::remote_failure: return "RemoteFailure";
  }
  return "none";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, WireFailure wire = WireFailure::none)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        wire_(wire) {}

  ErrorKind kind() const noexcept { return kind_; }
  WireFailure wire_failure() const noexcept { return wire_; }

 private:
  ErrorKind kind_;
  WireFailure wire_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace pris
