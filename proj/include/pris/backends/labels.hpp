#pragma once

#include <map>
#include <string>

#include "pris/core/types.hpp"

namespace pris {

// Closed synonym table. Anything outside it is an InvalidLabel, never a guess.
inline NliLabel normalize_nli_label(std::string_view raw) {
  static const std::map<std::string, NliLabel> table = {
      {"entailment", NliLabel::entailment},       {"entails", NliLabel::entailment},
      {"entail", NliLabel::entailment},           {"entailed", NliLabel::entailment},
      {"supports", NliLabel::entailment},         {"supported", NliLabel::entailment},
      {"yes supports", NliLabel::entailment},     {"yes", NliLabel::entailment},
      {"true", NliLabel::entailment},             {"neutral", NliLabel::neutral},
      {"unknown", NliLabel::neutral},             {"undetermined", NliLabel::neutral},
      {"not enough info", NliLabel::neutral},     {"not enough information", NliLabel::neutral},
      {"insufficient information", NliLabel::neutral}, {"nei", NliLabel::neutral},
      {"contradiction", NliLabel::contradiction}, {"contradicts", NliLabel::contradiction},
      {"contradict", NliLabel::contradiction},    {"contradicted", NliLabel::contradiction},
      {"refutes", NliLabel::contradiction},       {"refuted", NliLabel::contradiction},
      {"no refutes", NliLabel::contradiction},    {"no", NliLabel::contradiction},
      {"false", NliLabel::contradiction},
  };
  std::string s;
  for (char c : ascii_lower(trim(raw))) {
    if (c == '_' || c == '-') c = ' ';
    if (c == '"' || c == '\'' || c == '.' || c == '!' || c == '`' || c == '*') continue;
    if (c == ' ' && (s.empty() || s.back() == ' ')) continue;
    s.push_back(c);
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  auto it = table.find(s);
  if (it == table.end()) fail(ErrorKind::invalid_label, "unrecognized NLI label '" + std::string(raw) + "'");
  return it->second;
}

// True when an answer is only "yes" or "no" after normalization.
inline bool is_bare_yes_no(std::string_view answer) {
  std::string s;
  for (char c : ascii_lower(trim(answer)))
    if (std::isalpha(static_cast<unsigned char>(c))) s.push_back(c);
  return s == "yes" || s == "no";
}

}  // namespace pris
