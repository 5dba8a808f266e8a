#pragma once

// Backends that forward each capability over the wire protocol.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pris/backends/interfaces.hpp"
#include "pris/backends/wire.hpp"

namespace pris {

// Versioned instruction texts, read from one directory and fingerprinted.
class InstructionSet {
 public:
  InstructionSet() = default;

  static InstructionSet load(const std::filesystem::path& dir) {
    InstructionSet set;
    std::ifstream vf(dir / "VERSION");
    require(vf.good(), ErrorKind::invalid_argument, "instruction directory lacks VERSION: " + dir.string());
    std::getline(vf, set.version_);
    set.version_ = trim(set.version_);
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      set.texts_[entry.path().stem().string()] = ss.str();
    }
    return set;
  }

  const std::string& version() const { return version_; }

  std::string id(const std::string& name) const {
    require(texts_.count(name) == 1, ErrorKind::invalid_argument, "no instruction '" + name + "'");
    return name + "@" + version_;
  }

  std::string fingerprint() const {
    Json j{{"version", version_}, {"texts", Json::object()}};
    for (const auto& [k, v] : texts_) j["texts"][k] = sha256_hex(v).substr(0, 16);
    return version_ + ":" + sha256_hex(canonical(j)).substr(0, 12);
  }

  bool empty() const { return texts_.empty(); }

 private:
  std::string version_;
  std::map<std::string, std::string> texts_;
};

namespace remote {

inline Json media_ref(const VisualHandle& v) {
  return Json{{"uri", v.uri}, {"media_kind", to_string(v.media_kind)}, {"frame_count", v.frame_count}};
}

class RemoteBase {
 public:
  RemoteBase(std::shared_ptr<wire::WireClient> client, std::string endpoint, std::string instruction_id,
             std::string instructions_fp)
      : client_(std::move(client)),
        endpoint_(std::move(endpoint)),
        instruction_id_(std::move(instruction_id)),
        instructions_fp_(std::move(instructions_fp)) {}

 protected:
  wire::WireResponse call(std::string_view capability, Json payload, const std::string& instruction = {}) {
    return client_->call(capability, instruction.empty() ? instruction_id_ : instruction, std::move(payload));
  }

  std::string fp(std::string_view capability) const {
    return "remote:" + std::string(capability) + "@" + endpoint_ + "|" + instruction_id_ + "|" + instructions_fp_;
  }

  std::shared_ptr<wire::WireClient> client_;
  std::string endpoint_;
  std::string instruction_id_;
  std::string instructions_fp_;
};

class Generator final : public pris::Generator, RemoteBase {
 public:
  using RemoteBase::RemoteBase;
  VisualHandle generate(const PromptRecord& prompt, std::uint64_t seed, int steps, bool cfg, MediaKind kind,
                        const Json& sampler_options) override {
    auto r = call("generator", Json{{"prompt", prompt.text},
                                    {"seed", seed},
                                    {"steps", steps},
                                    {"cfg", cfg},
                                    {"media_kind", to_string(kind)},
                                    {"sampler_options", sampler_options.is_null() ? Json::object() : sampler_options}});
    VisualHandle v;
    v.uri = wire::response_field<std::string>(r.payload, "visual_uri", "generator");
    try {
      v.media_kind = parse_media_kind(wire::response_field<std::string>(r.payload, "media_kind", "generator"));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::backend_error) throw;
      throw Error(ErrorKind::backend_error, "generator returned bad media_kind", WireFailure::malformed);
    }
    v.frame_count = r.payload.value("frame_count", v.media_kind == MediaKind::video ? 81 : 1);
    if (v.uri.empty()) throw Error(ErrorKind::backend_error, "generator returned empty uri", WireFailure::malformed);
    return v;
  }
  std::string fingerprint() const override { return fp("generator"); }
};

class Captioner final : public pris::Captioner, RemoteBase {
 public:
  using RemoteBase::RemoteBase;
  std::string caption(const VisualHandle& v) override {
    auto r = call("captioner", Json{{"media", media_ref(v)}});
    return wire::response_field<std::string>(r.payload, "caption", "captioner");
  }
  std::string fingerprint() const override { return fp("captioner"); }
};

class Prober final : public pris::Prober, RemoteBase {
 public:
  Prober(std::shared_ptr<wire::WireClient> client, std::string endpoint, const InstructionSet& ins)
      : RemoteBase(std::move(client), std::move(endpoint), ins.id("prober"), ins.fingerprint()),
        elaborate_id_(ins.id("prober_elaborate")),
        binary_id_(ins.id("prober_binary")) {}

  std::string probe(const VisualHandle& v, const std::string& question, bool elaborate) override {
    auto r = call("prober", Json{{"media", media_ref(v)}, {"question", question}, {"mode", "open"}},
                  elaborate ? elaborate_id_ : std::string{});
    return wire::response_field<std::string>(r.payload, "answer", "prober");
  }
  std::string ask_binary(const VisualHandle& v, const std::string& question) override {
    auto r = call("prober", Json{{"media", media_ref(v)}, {"question", question}, {"mode", "binary"}}, binary_id_);
    return wire::response_field<std::string>(r.payload, "answer", "prober");
  }
  std::string fingerprint() const override { return fp("prober"); }

 private:
  std::string elaborate_id_;
  std::string binary_id_;
};

class Nli final : public NliModel, RemoteBase {
 public:
  using RemoteBase::RemoteBase;
  std::string judge(const std::string& premise, const std::string& hypothesis, VerdictStage stage) override {
    auto r = call("nli", Json{{"premise", premise}, {"hypothesis", hypothesis}, {"stage", to_string(stage)}});
    return wire::response_field<std::string>(r.payload, "label", "nli");
  }
  std::string fingerprint() const override { return fp("nli"); }
};

class Decomposer final : public pris::Decomposer, RemoteBase {
 public:
  using RemoteBase::RemoteBase;
  std::vector<SemanticElement> decompose(const PromptRecord& prompt, MediaKind kind) override {
    auto r = call("decomposer", Json{{"prompt", prompt.text}, {"media_kind", to_string(kind)}});
    const Json list = wire::response_field<Json>(r.payload, "elements", "decomposer");
    if (!list.is_array()) throw Error(ErrorKind::backend_error, "decomposer elements is not a list", WireFailure::malformed);
    std::vector<SemanticElement> out;
    for (const auto& ej : list) {
      try {
        SemanticElement e;
        e.element_id = static_cast<int>(out.size());
        e.text = ej.at("text").get<std::string>();
        e.importance = parse_importance(ej.value("importance", std::string("core")));
        e.semantic_category = parse_category(ej.value("category", std::string("other")));
        if (ej.contains("probe_question")) e.probe_question = ej.at("probe_question").get<std::string>();
        out.push_back(std::move(e));
      } catch (const std::exception& ex) {
        throw Error(ErrorKind::backend_error, std::string("decomposer element malformed: ") + ex.what(),
                    WireFailure::malformed);
      }
    }
    return out;
  }
  std::string fingerprint() const override { return fp("decomposer"); }
};

class Rewriter final : public pris::Rewriter, RemoteBase {
 public:
  Rewriter(std::shared_ptr<wire::WireClient> client, std::string endpoint, const InstructionSet& ins)
      : RemoteBase(std::move(client), std::move(endpoint), ins.id("rewriter_failure_targeted"), ins.fingerprint()) {
    for (auto m : {RevisionMode::failure_targeted, RevisionMode::exploration, RevisionMode::standard_expansion,
                   RevisionMode::per_sample})
      ids_[m] = ins.id("rewriter_" + std::string(to_string(m)));
  }

  std::vector<std::string> rewrite(const RewriteRequest& req) override {
    auto r = call("rewriter",
                  Json{{"mode", to_string(req.mode)},
                       {"parent", req.parent_text},
                       {"failures", req.failures},
                       {"satisfied", req.satisfied},
                       {"captions", req.caption_excerpts},
                       {"variant_count", req.variant_count},
                       {"attempt", req.attempt}},
                  ids_.at(req.mode));
    return wire::response_field<std::vector<std::string>>(r.payload, "variants", "rewriter");
  }
  std::string fingerprint() const override { return fp("rewriter"); }

 private:
  std::map<RevisionMode, std::string> ids_;
};

class Reward final : public RewardModel, RemoteBase {
 public:
  using RemoteBase::RemoteBase;
  double reward(const PromptRecord& original, const VisualHandle& v) override {
    auto r = call("reward", Json{{"prompt", original.text}, {"media", media_ref(v)}});
    const Json& value = r.payload.contains("reward") ? r.payload["reward"] : Json();
    if (!value.is_number()) throw Error(ErrorKind::backend_error, "reward is not a number", WireFailure::malformed);
    const double x = value.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorKind::backend_error, "reward is not finite", WireFailure::malformed);
    return x;
  }
  std::string fingerprint() const override { return fp("reward"); }
};

}  // namespace remote
}  // namespace pris
