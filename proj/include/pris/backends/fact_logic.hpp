#pragma once

// Controlled-English fact extraction and an exact three-way entailment
// oracle over the extracted facts. Used by the simulated backends: captions,
// probe answers, prompts and element texts are all written in this subset.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pris/core/types.hpp"

namespace pris::sim {

enum class FactKind { present, attr, neg_attr, has, rel, literal };

struct Fact {
  FactKind kind = FactKind::literal;
  std::string subject;
  std::string key;     // attribute class, part noun or relation axis
  std::string value;   // attribute value, relation name or literal text
  std::string object;  // relation target
  bool positive = true;

  auto tie() const { return std::tie(kind, subject, key, value, object, positive); }
  bool operator<(const Fact& o) const { return tie() < o.tie(); }
  bool operator==(const Fact& o) const { return tie() == o.tie(); }
};

using FactSet = std::set<Fact>;

namespace lexicon {

inline const std::map<std::string, std::pair<std::string, std::string>>& adjectives() {
  // word -> (class, canonical value)
  static const std::map<std::string, std::pair<std::string, std::string>> table = [] {
    std::map<std::string, std::pair<std::string, std::string>> t;
    for (const char* c : {"red", "blue", "green", "yellow", "black", "white", "orange", "purple", "pink",
                          "brown", "gray", "beige", "teal"})
      t[c] = {"color", c};
    t["grey"] = {"color", "gray"};
    for (const char* m : {"wooden", "metal", "silver", "golden", "plastic", "glass", "stone", "steel",
                          "leather", "paper", "ceramic", "rubber", "woolen"})
      t[m] = {"material", m};
    t["wood"] = {"material", "wooden"};
    t["metallic"] = {"material", "metal"};
    t["gold"] = {"material", "golden"};
    t["wool"] = {"material", "woolen"};
    for (const char* s : {"small", "large", "tiny", "huge"}) t[s] = {"size", s};
    t["big"] = {"size", "large"};
    for (const char* s : {"round", "square", "triangular", "rectangular"}) t[s] = {"shape", s};
    for (const char* s : {"open", "closed", "empty", "full", "broken", "lit", "wet", "dry"}) t[s] = {"state", s};
    for (const char* s : {"one", "two", "three", "four", "five", "six"}) t[s] = {"count", s};
    return t;
  }();
  return table;
}

inline bool is_determiner(std::string_view w) {
  return w == "a" || w == "an" || w == "the" || w == "some" || w == "its" || w == "their";
}

inline const std::map<std::string, std::string>& motion_verbs() {
  static const std::map<std::string, std::string> table = {
      {"moves", "move"},   {"move", "move"},     {"moving", "move"},   {"runs", "run"},
      {"run", "run"},      {"running", "run"},   {"walks", "walk"},    {"walk", "walk"},
      {"walking", "walk"}, {"flies", "fly"},     {"fly", "fly"},       {"flying", "fly"},
      {"falls", "fall"},   {"fall", "fall"},     {"falling", "fall"},  {"rolls", "roll"},
      {"roll", "roll"},    {"rolling", "roll"},  {"jumps", "jump"},    {"jump", "jump"},
      {"spins", "spin"},   {"spin", "spin"},     {"rotates", "rotate"}, {"pans", "pan"},
      {"pan", "pan"},      {"panning", "pan"},   {"zooms", "zoom"},    {"zoom", "zoom"},
      {"zooming", "zoom"}, {"tilts", "tilt"},    {"tilt", "tilt"},     {"swims", "swim"},
      {"drives", "drive"}, {"drive", "drive"},   {"melts", "melt"},    {"grows", "grow"},
      {"transitions", "transition"}, {"turns", "turn"}, {"stops", "stop"}, {"rises", "rise"},
  };
  return table;
}

inline bool is_direction(std::string_view w) {
  static const std::set<std::string_view> dirs = {"left",  "right", "up",     "down",    "forward",
                                                  "backward", "in", "out",   "away",    "toward",
                                                  "towards", "around", "upward", "downward", "over"};
  return dirs.count(w) > 0;
}

inline bool is_linking(std::string_view w) {
  static const std::set<std::string_view> words = {
      "is",      "are",   "sits",     "sit",     "stands",  "stand",     "standing", "sitting",
      "placed",  "located", "positioned", "lies", "lying",   "rests",     "resting",  "to",
      "the",     "directly", "appears", "hangs", "hanging", "floats",    "floating", "set",
      "that",    "which", "who"};
  return words.count(w) > 0;
}

}  // namespace lexicon

inline std::string lemma(std::string w) {
  if (w.size() > 2 && w.ends_with("'s")) w.resize(w.size() - 2);
  if (w.size() > 4 && w.ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
  for (const char* suf : {"ches", "shes", "sses", "xes"})
    if (w.size() > 4 && w.ends_with(suf)) return w.substr(0, w.size() - 2);
  if (w.size() > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us")) return w.substr(0, w.size() - 1);
  return w;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || raw == '\'' || raw == '-') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::size_t b, std::size_t e,
                        std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = b; i < e && i < words.size(); ++i) {
    if (!out.empty()) out += sep;
    out += words[i];
  }
  return out;
}

// Splits text into clause token lists on punctuation and clause conjunctions.
inline std::vector<std::vector<std::string>> split_clauses(std::string_view text) {
  std::vector<std::vector<std::string>> clauses;
  std::string chunk;
  auto flush = [&] {
    std::vector<std::string> cur;
    for (auto& w : tokenize(chunk)) {
      if (w == "and" || w == "then" || w == "while" || w == "but" || w == "afterwards") {
        if (!cur.empty()) clauses.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(std::move(w));
      }
    }
    if (!cur.empty()) clauses.push_back(std::move(cur));
    chunk.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ';' || c == '.' || c == '!' || c == '?' || c == ':' || c == '(' || c == ')') flush();
    else chunk.push_back(c);
  }
  flush();
  return clauses;
}

namespace detail {

inline bool starts_with(const std::vector<std::string>& t, std::initializer_list<std::string_view> p,
                        std::size_t at = 0) {
  if (t.size() < at + p.size()) return false;
  std::size_t i = at;
  for (auto w : p)
    if (t[i++] != w) return false;
  return true;
}

inline void strip_hedges(std::vector<std::string>& t) {
  static const std::vector<std::vector<std::string_view>> prefixes = {
      {"make", "sure", "that"}, {"ensure", "that"}, {"clearly", "show", "that"}, {"it", "is", "clear", "that"},
      {"at", "first"},          {"first"},          {"finally"},                 {"next"},
      {"after", "that"},        {"in", "the", "end"}, {"the", "image", "shows"}, {"the", "video", "shows"},
      {"the", "scene", "shows"}, {"it", "shows"},   {"we", "see"},              {"you", "can", "see"},
      {"importantly"}};
  bool changed = true;
  while (changed && !t.empty()) {
    changed = false;
    for (const auto& p : prefixes) {
      if (t.size() > p.size() && std::equal(p.begin(), p.end(), t.begin())) {
        t.erase(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(p.size()));
        changed = true;
        break;
      }
    }
  }
}

struct NounPhrase {
  std::string head;
  std::vector<std::pair<std::string, std::string>> attrs;  // class, value
};

inline std::optional<NounPhrase> parse_np(std::vector<std::string> t) {
  while (!t.empty() && (lexicon::is_determiner(t.front()) || t.front() == "there")) t.erase(t.begin());
  while (!t.empty() && (lexicon::is_linking(t.back()) || lexicon::is_determiner(t.back()))) t.pop_back();
  if (t.empty()) return std::nullopt;
  NounPhrase np;
  const auto& adj = lexicon::adjectives();
  const std::string& last = t.back();
  if (adj.count(last) && adj.at(last).first != "count") return std::nullopt;  // dangling adjective
  if (lexicon::motion_verbs().count(last)) return std::nullopt;
  np.head = lemma(last);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (lexicon::is_determiner(t[i])) continue;
    auto it = adj.find(t[i]);
    if (it != adj.end()) np.attrs.push_back(it->second);
    else if (t[i] == "is" || t[i] == "are" || lexicon::motion_verbs().count(t[i])) return std::nullopt;
  }
  return np;
}

inline void add_np(FactSet& out, const NounPhrase& np) {
  out.insert(Fact{FactKind::present, np.head, "", "", "", true});
  for (const auto& [cls, val] : np.attrs) out.insert(Fact{FactKind::attr, np.head, cls, val, "", true});
}

struct Relation {
  std::size_t begin, end;  // token span of the relation phrase
  std::string axis, name;
  bool reversed;  // normalized by swapping subject and object
};

inline std::optional<Relation> find_relation(const std::vector<std::string>& t) {
  struct Pattern {
    std::vector<std::string_view> words;
    const char* axis;
    const char* name;
    bool reversed;
  };
  static const std::vector<Pattern> patterns = {
      {{"to", "the", "left", "of"}, "horizontal", "left_of", false},
      {{"to", "the", "right", "of"}, "horizontal", "left_of", true},
      {{"on", "the", "left", "of"}, "horizontal", "left_of", false},
      {{"on", "the", "right", "of"}, "horizontal", "left_of", true},
      {{"left", "of"}, "horizontal", "left_of", false},
      {{"right", "of"}, "horizontal", "left_of", true},
      {{"in", "front", "of"}, "depth", "behind", true},
      {{"on", "top", "of"}, "vertical", "on", false},
      {{"next", "to"}, "adjacent", "next_to", false},
      {{"beside"}, "adjacent", "next_to", false},
      {{"behind"}, "depth", "behind", false},
      {{"above"}, "vertical", "above", false},
      {{"below"}, "vertical", "above", true},
      {{"beneath"}, "vertical", "under", false},
      {{"under"}, "vertical", "under", false},
      {{"on"}, "vertical", "on", false},
      {{"inside"}, "containment", "inside", false},
      {{"in"}, "containment", "inside", false},
  };
  for (std::size_t i = 1; i < t.size(); ++i) {
    for (const auto& p : patterns) {
      if (i + p.words.size() >= t.size()) continue;
      if (std::equal(p.words.begin(), p.words.end(), t.begin() + static_cast<std::ptrdiff_t>(i)))
        return Relation{i, i + p.words.size(), p.axis, p.name, p.reversed};
    }
  }
  return std::nullopt;
}

inline std::string canonical_adj_value(const std::string& w) {
  auto it = lexicon::adjectives().find(w);
  return it == lexicon::adjectives().end() ? w : it->second.second;
}

inline std::string adj_class(const std::string& w) {
  auto it = lexicon::adjectives().find(w);
  return it == lexicon::adjectives().end() ? std::string{} : it->second.first;
}

inline std::optional<std::size_t> find_word(const std::vector<std::string>& t, std::string_view w,
                                            std::size_t from = 0) {
  for (std::size_t i = from; i < t.size(); ++i)
    if (t[i] == w) return i;
  return std::nullopt;
}

inline std::vector<std::string> slice(const std::vector<std::string>& t, std::size_t b, std::size_t e) {
  return {t.begin() + static_cast<std::ptrdiff_t>(std::min(b, t.size())),
          t.begin() + static_cast<std::ptrdiff_t>(std::min(e, t.size()))};
}

inline bool parse_structured(std::vector<std::string> t, FactSet& out) {
  // Style: "in watercolor style"
  if (auto s = find_word(t, "style"); s && *s > 0) {
    std::size_t b = 0;
    if (auto in = find_word(t, "in"); in && *in < *s) b = *in + 1;
    while (b < *s && lexicon::is_determiner(t[b])) ++b;
    if (b < *s) {
      out.insert(Fact{FactKind::attr, "image", "style", join(t, b, *s, "_"), "", true});
      return true;
    }
  }

  // Absence.
  if (starts_with(t, {"there", "is", "no"}) || starts_with(t, {"there", "are", "no"})) {
    if (auto np = parse_np(slice(t, 3, t.size()))) {
      out.insert(Fact{FactKind::present, np->head, "", "", "", false});
      return true;
    }
  }
  if (starts_with(t, {"no"})) {
    std::size_t e = t.size();
    for (std::size_t i = 1; i < t.size(); ++i)
      if (t[i] == "is" || t[i] == "are" || t[i] == "appears" || t[i] == "can") { e = i; break; }
    if (auto np = parse_np(slice(t, 1, e))) {
      out.insert(Fact{FactKind::present, np->head, "", "", "", false});
      return true;
    }
  }
  for (std::string_view tail : {"absent", "missing"}) {
    if (t.size() >= 3 && t.back() == tail && (t[t.size() - 2] == "is" || t[t.size() - 2] == "are")) {
      if (auto np = parse_np(slice(t, 0, t.size() - 2))) {
        out.insert(Fact{FactKind::present, np->head, "", "", "", false});
        return true;
      }
    }
  }
  if (t.size() >= 4 && t.back() == "present" && t[t.size() - 2] == "not") {
    if (auto np = parse_np(slice(t, 0, t.size() - 3))) {
      out.insert(Fact{FactKind::present, np->head, "", "", "", false});
      return true;
    }
  }

  // Presence.
  if (starts_with(t, {"there", "is"}) || starts_with(t, {"there", "are"})) {
    if (auto np = parse_np(slice(t, 2, t.size()))) {
      add_np(out, *np);
      return true;
    }
  }
  for (std::string_view tail : {"present", "visible", "shown"}) {
    if (t.size() >= 3 && t.back() == tail && (t[t.size() - 2] == "is" || t[t.size() - 2] == "are")) {
      if (auto np = parse_np(slice(t, 0, t.size() - 2))) {
        add_np(out, *np);
        return true;
      }
    }
  }
  if (t.size() >= 2 && t.back() == "appears") {
    if (auto np = parse_np(slice(t, 0, t.size() - 1))) {
      add_np(out, *np);
      return true;
    }
  }

  // Possession: "X has no Y", "X with no Y", "X without Y", "X has Y", "X with Y".
  for (std::size_t i = 1; i < t.size(); ++i) {
    const bool has_verb = t[i] == "has" || t[i] == "have";
    const bool with = t[i] == "with";
    const bool without = t[i] == "without";
    if (!has_verb && !with && !without) continue;
    std::size_t obj = i + 1;
    bool positive = !without;
    if ((has_verb || with) && obj < t.size() && t[obj] == "no") {
      positive = false;
      ++obj;
    }
    auto subject = parse_np(slice(t, 0, i));
    auto part = parse_np(slice(t, obj, t.size()));
    if (subject && part) {
      add_np(out, *subject);
      out.insert(Fact{FactKind::has, subject->head, part->head, "", "", positive});
      if (positive)
        for (const auto& [cls, val] : part->attrs)
          out.insert(Fact{FactKind::attr, part->head, cls, val, "", true});
      return true;
    }
  }

  // Material: "X is (not) made of Y", "X made of Y".
  if (auto m = find_word(t, "made"); m && *m + 2 <= t.size() && *m + 1 < t.size() && t[*m + 1] == "of") {
    std::size_t subj_end = *m;
    bool positive = true;
    if (subj_end > 0 && t[subj_end - 1] == "not") {
      positive = false;
      --subj_end;
    }
    auto subject = parse_np(slice(t, 0, subj_end));
    if (subject && *m + 2 < t.size()) {
      const std::string value = canonical_adj_value(t.back());
      add_np(out, *subject);
      out.insert(Fact{positive ? FactKind::attr : FactKind::neg_attr, subject->head, "material", value, "", true});
      return true;
    }
  }

  // Copula with adjectives: "X is red", "X is not wooden".
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (t[i] != "is" && t[i] != "are") continue;
    std::size_t a = i + 1;
    bool positive = true;
    if (t[a] == "not") {
      positive = false;
      ++a;
    }
    if (a >= t.size()) break;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool all_known = true;
    for (std::size_t j = a; j < t.size(); ++j) {
      if (t[j] == "very" || t[j] == "bright" || t[j] == "dark") continue;
      const std::string cls = adj_class(t[j]);
      if (cls.empty()) { all_known = false; break; }
      attrs.emplace_back(cls, canonical_adj_value(t[j]));
    }
    auto subject = parse_np(slice(t, 0, i));
    if (all_known && !attrs.empty() && subject) {
      add_np(out, *subject);
      for (const auto& [cls, val] : attrs)
        out.insert(Fact{positive ? FactKind::attr : FactKind::neg_attr, subject->head, cls, val, "", true});
      return true;
    }
    break;
  }

  // Spatial relation.
  if (auto rel = find_relation(t)) {
    auto lhs = parse_np(slice(t, 0, rel->begin));
    auto rhs = parse_np(slice(t, rel->end, t.size()));
    if (lhs && rhs) {
      add_np(out, *lhs);
      add_np(out, *rhs);
      const std::string& s = rel->reversed ? rhs->head : lhs->head;
      const std::string& o = rel->reversed ? lhs->head : rhs->head;
      out.insert(Fact{FactKind::rel, s, rel->axis, rel->name, o, true});
      return true;
    }
  }

  // Motion: "the car moves left", "the camera pans right".
  for (std::size_t i = 1; i < t.size(); ++i) {
    auto it = lexicon::motion_verbs().find(t[i]);
    if (it == lexicon::motion_verbs().end()) continue;
    auto subject = parse_np(slice(t, 0, i));
    if (!subject) break;
    std::string value = it->second;
    for (std::size_t j = i + 1; j < t.size(); ++j)
      if (lexicon::is_direction(t[j])) { value += "_" + t[j]; break; }
    add_np(out, *subject);
    out.insert(Fact{FactKind::attr, subject->head, "motion", value, "", true});
    return true;
  }

  // Bare noun phrase: "a red cube".
  if (auto np = parse_np(t)) {
    bool plain = true;
    for (const auto& w : t)
      if (w == "is" || w == "are" || w == "not" || w == "no") plain = false;
    if (plain) {
      add_np(out, *np);
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline FactSet extract_facts(std::string_view text) {
  FactSet out;
  for (auto clause : split_clauses(text)) {
    detail::strip_hedges(clause);
    if (clause.empty()) continue;
    if (!detail::parse_structured(clause, out))
      out.insert(Fact{FactKind::literal, "", "", join(clause, 0, clause.size()), "", true});
  }
  return out;
}

namespace detail {

enum class FactStatus { entailed, contradicted, unknown };

inline FactStatus judge_fact(const Fact& h, const FactSet& premise) {
  auto any = [&](auto pred) { return std::any_of(premise.begin(), premise.end(), pred); };
  switch (h.kind) {
    case FactKind::present: {
      const bool affirmed = any([&](const Fact& p) {
        return (p.kind == FactKind::present && p.subject == h.subject && p.positive) ||
               (p.kind == FactKind::rel && p.object == h.subject);
      });
      const bool denied = any([&](const Fact& p) {
        return p.kind == FactKind::present && p.subject == h.subject && !p.positive;
      });
      if (h.positive) return denied ? FactStatus::contradicted : affirmed ? FactStatus::entailed : FactStatus::unknown;
      return affirmed ? FactStatus::contradicted : denied ? FactStatus::entailed : FactStatus::unknown;
    }
    case FactKind::attr: {
      if (any([&](const Fact& p) {
            return (p.kind == FactKind::attr && p.subject == h.subject && p.key == h.key && p.value != h.value) ||
                   (p.kind == FactKind::neg_attr && p.subject == h.subject && p.key == h.key &&
                    p.value == h.value) ||
                   (p.kind == FactKind::present && p.subject == h.subject && !p.positive);
          }))
        return FactStatus::contradicted;
      if (any([&](const Fact& p) { return p.kind == FactKind::attr && p.subject == h.subject && p.key == h.key && p.value == h.value; }))
        return FactStatus::entailed;
      return FactStatus::unknown;
    }
    case FactKind::neg_attr: {
      if (any([&](const Fact& p) { return p.kind == FactKind::attr && p.subject == h.subject && p.key == h.key && p.value == h.value; }))
        return FactStatus::contradicted;
      if (any([&](const Fact& p) {
            return (p.kind == FactKind::attr && p.subject == h.subject && p.key == h.key && p.value != h.value) ||
                   (p.kind == FactKind::neg_attr && p.subject == h.subject && p.key == h.key && p.value == h.value);
          }))
        return FactStatus::entailed;
      return FactStatus::unknown;
    }
    case FactKind::has: {
      if (any([&](const Fact& p) { return p.kind == FactKind::has && p.subject == h.subject && p.key == h.key && p.positive != h.positive; }))
        return FactStatus::contradicted;
      if (any([&](const Fact& p) { return p.kind == FactKind::has && p.subject == h.subject && p.key == h.key && p.positive == h.positive; }))
        return FactStatus::entailed;
      return FactStatus::unknown;
    }
    case FactKind::rel: {
      const bool directional = h.key != "adjacent";
      if (any([&](const Fact& p) {
            if (p.kind != FactKind::rel || p.key != h.key) return false;
            if (p.subject == h.subject && p.object == h.object) return p.value != h.value;
            return directional && p.subject == h.object && p.object == h.subject && p.value == h.value;
          }))
        return FactStatus::contradicted;
      if (any([&](const Fact& p) {
            if (p.kind != FactKind::rel || p.key != h.key || p.value != h.value) return false;
            if (p.subject == h.subject && p.object == h.object) return true;
            return !directional && p.subject == h.object && p.object == h.subject;
          }))
        return FactStatus::entailed;
      return FactStatus::unknown;
    }
    case FactKind::literal:
      return premise.count(h) ? FactStatus::entailed : FactStatus::unknown;
  }
  return FactStatus::unknown;
}

}  // namespace detail

// Exact oracle: contradiction if any hypothesis fact conflicts with the
// premise, entailment if all are supported, neutral otherwise.
inline NliLabel entail(std::string_view premise, std::string_view hypothesis) {
  const FactSet p = extract_facts(premise);
  const FactSet h = extract_facts(hypothesis);
  if (h.empty()) return NliLabel::neutral;
  bool all = true;
  for (const auto& f : h) {
    const auto s = detail::judge_fact(f, p);
    if (s == detail::FactStatus::contradicted) return NliLabel::contradiction;
    if (s != detail::FactStatus::entailed) all = false;
  }
  return all ? NliLabel::entailment : NliLabel::neutral;
}

}  // namespace pris::sim
