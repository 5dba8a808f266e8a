#pragma once

// Backend profiles: which implementation serves each capability.
//
//   {"schema": "pris/1", "type": "backend_profile", "name": "sim-hard-element",
//    "capabilities": {"generator": "simulated", "nli": "http://127.0.0.1:8080", ...},
//    "worlds": ["../worlds/hard_element.json"], "instructions": "../instructions/v1",
//    "clock": "modeled", "wire": {"max_attempts": 3, "timeout_ms": 60000, ...}}
//
// Relative paths resolve against the profile's directory. `resolved()` inlines
// worlds so a run directory can be replayed without the original files.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pris/backends/remote.hpp"
#include "pris/backends/simulated.hpp"

namespace pris {

inline constexpr std::array<std::string_view, 7> capability_names = {
    "generator", "captioner", "prober", "nli", "decomposer", "rewriter", "reward"};

struct BackendProfile {
  std::string name;
  std::map<std::string, std::string> capabilities;  // capability -> "simulated" | endpoint URL
  std::vector<sim::SimWorld> worlds;
  std::filesystem::path instructions_dir;
  std::string clock = "modeled";
  wire::WireOptions wire;

  bool uses_remote() const {
    for (const auto& [k, v] : capabilities)
      if (v != "simulated") return true;
    return false;
  }

  void validate() const {
    for (auto cap : capability_names) {
      auto it = capabilities.find(std::string(cap));
      require(it != capabilities.end() && !it->second.empty(), ErrorKind::invalid_argument,
              "profile '" + name + "' does not bind capability '" + std::string(cap) + "'");
      require(it->second == "simulated" || it->second.rfind("http://", 0) == 0 || it->second.rfind("https://", 0) == 0,
              ErrorKind::invalid_argument, "capability '" + std::string(cap) + "' has bad binding '" + it->second + "'");
    }
    for (const auto& [k, v] : capabilities)
      require(std::find(capability_names.begin(), capability_names.end(), k) != capability_names.end(),
              ErrorKind::invalid_argument, "unknown capability '" + k + "'");
    require(clock == "modeled" || clock == "steady", ErrorKind::invalid_argument, "clock must be modeled|steady");
  }

  Json resolved() const {
    Json j = make_record("backend_profile");
    j["name"] = name;
    j["capabilities"] = capabilities;
    j["worlds"] = worlds;
    j["clock"] = clock;
    if (!instructions_dir.empty()) j["instructions"] = std::filesystem::absolute(instructions_dir).lexically_normal().string();
    j["wire"] = Json{{"max_attempts", wire.max_attempts},
                     {"initial_backoff_ms", wire.initial_backoff.count()},
                     {"backoff_factor", wire.backoff_factor},
                     {"timeout_ms", wire.timeout.count()},
                     {"max_in_flight", wire.max_in_flight}};
    return j;
  }
};

inline BackendProfile parse_profile(const Json& j, const std::filesystem::path& base_dir = ".") {
  BackendProfile p;
  p.name = j.value("name", std::string("unnamed"));
  p.capabilities = field<std::map<std::string, std::string>>(j, "capabilities");
  p.clock = j.value("clock", std::string("modeled"));
  if (j.contains("instructions")) {
    std::filesystem::path dir = j.at("instructions").get<std::string>();
    p.instructions_dir = dir.is_absolute() ? dir : base_dir / dir;
  }
  if (j.contains("worlds")) {
    for (const auto& w : j.at("worlds")) {
      if (w.is_string()) {
        std::filesystem::path path = w.get<std::string>();
        if (!path.is_absolute()) path = base_dir / path;
        std::ifstream in(path);
        require(in.good(), ErrorKind::invalid_argument, "cannot read world file " + path.string());
        Json wj;
        try {
          wj = Json::parse(in);
        } catch (const Json::exception& e) {
          fail(ErrorKind::invalid_argument, "world file " + path.string() + ": " + e.what());
        }
        p.worlds.push_back(wj.get<sim::SimWorld>());
      } else {
        p.worlds.push_back(w.get<sim::SimWorld>());
      }
    }
  }
  if (j.contains("wire")) {
    const Json& w = j.at("wire");
    p.wire.max_attempts = w.value("max_attempts", p.wire.max_attempts);
    p.wire.initial_backoff = std::chrono::milliseconds(w.value("initial_backoff_ms", 200));
    p.wire.backoff_factor = w.value("backoff_factor", p.wire.backoff_factor);
    p.wire.timeout = std::chrono::milliseconds(w.value("timeout_ms", 60000));
    p.wire.max_in_flight = w.value("max_in_flight", p.wire.max_in_flight);
  }
  p.validate();
  return p;
}

inline BackendProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::invalid_argument, "cannot read profile " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorKind::invalid_argument, "profile " + path.string() + ": " + e.what());
  }
  return parse_profile(j, path.parent_path());
}

struct BuiltBackends {
  BackendSet set;
  std::shared_ptr<const sim::SimUniverse> universe;  // null when no simulated capability
  std::string fingerprint;
};

inline BuiltBackends build_backends(const BackendProfile& profile) {
  profile.validate();
  BuiltBackends out;
  auto universe = std::make_shared<sim::SimUniverse>(profile.worlds);
  out.universe = universe;
  BackendSet sim_set = sim::make_simulated_backends(universe);

  InstructionSet instructions;
  if (profile.uses_remote()) {
    require(!profile.instructions_dir.empty(), ErrorKind::invalid_argument,
            "profile with remote capabilities needs an instruction directory");
    instructions = InstructionSet::load(profile.instructions_dir);
  }

  std::map<std::string, std::shared_ptr<wire::WireClient>> clients;
  auto client_for = [&](const std::string& endpoint) {
    auto& c = clients[endpoint];
    if (!c) c = std::make_shared<wire::WireClient>(std::make_shared<wire::HttpTransport>(endpoint, profile.wire.timeout),
                                                   profile.wire);
    return c;
  };
  auto bind = [&](const std::string& cap) -> std::string { return profile.capabilities.at(cap); };

  BackendSet& s = out.set;
  auto assign_slot = [&]<typename T>(std::shared_ptr<T>& slot, const std::shared_ptr<T>& simulated, const std::string& cap,
                                auto make) {
    slot = bind(cap) == "simulated" ? simulated : make(client_for(bind(cap)), bind(cap));
  };
  const std::string ifp = instructions.empty() ? std::string() : instructions.fingerprint();
  auto id = [&](const std::string& name) { return instructions.id(name); };
  assign_slot(s.generator, sim_set.generator, "generator", [&](auto c, const std::string& e) -> std::shared_ptr<Generator> {
    return std::make_shared<remote::Generator>(c, e, id("generator"), ifp);
  });
  assign_slot(s.captioner, sim_set.captioner, "captioner", [&](auto c, const std::string& e) -> std::shared_ptr<Captioner> {
    return std::make_shared<remote::Captioner>(c, e, id("captioner"), ifp);
  });
  assign_slot(s.prober, sim_set.prober, "prober", [&](auto c, const std::string& e) -> std::shared_ptr<Prober> {
    return std::make_shared<remote::Prober>(c, e, instructions);
  });
  assign_slot(s.nli, sim_set.nli, "nli", [&](auto c, const std::string& e) -> std::shared_ptr<NliModel> {
    return std::make_shared<remote::Nli>(c, e, id("nli"), ifp);
  });
  assign_slot(s.decomposer, sim_set.decomposer, "decomposer", [&](auto c, const std::string& e) -> std::shared_ptr<Decomposer> {
    return std::make_shared<remote::Decomposer>(c, e, id("decomposer"), ifp);
  });
  assign_slot(s.rewriter, sim_set.rewriter, "rewriter", [&](auto c, const std::string& e) -> std::shared_ptr<Rewriter> {
    return std::make_shared<remote::Rewriter>(c, e, instructions);
  });
  assign_slot(s.reward, sim_set.reward, "reward", [&](auto c, const std::string& e) -> std::shared_ptr<RewardModel> {
    return std::make_shared<remote::Reward>(c, e, id("reward"), ifp);
  });
  if (profile.clock == "modeled") s.clock = std::make_shared<ModeledStageClock>();
  else s.clock = std::make_shared<SteadyStageClock>();

  Json fp{{"backends", s.fingerprint()}, {"instructions", instructions.empty() ? "none" : instructions.fingerprint()}};
  out.fingerprint = sha256_hex(canonical(fp)).substr(0, 16);
  return out;
}

}  // namespace pris
