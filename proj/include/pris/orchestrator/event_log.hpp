#pragma once

// Append-only event log. Each line is one canonical record carrying the hash
// of its predecessor:
//
//   {"body":{...},"event":"selection","hash":"<64 hex>","prev":"<64 hex>","schema":"pris/1","seq":7,"type":"event"}
//
// hash = sha256(prev + "\n" + canonical(record without "hash")).

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "pris/core/hash.hpp"
#include "pris/core/records.hpp"

namespace pris {

inline const std::string genesis_hash(64, '0');

inline std::string event_hash(const Json& record_without_hash) {
  return sha256_hex(record_without_hash.at("prev").get<std::string>() + "\n" + canonical(record_without_hash));
}

class EventLog {
 public:
  EventLog() = default;
  // Lines are also appended to `path` as they are written.
  explicit EventLog(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    require(out_.good(), ErrorKind::invalid_argument, "cannot open event log " + path.string());
  }

  const Json& append(std::string_view event, Json body) {
    std::lock_guard lock(mu_);
    Json rec = make_record("event");
    rec["event"] = event;
    rec["seq"] = records_.size();
    rec["prev"] = records_.empty() ? genesis_hash : records_.back().at("hash").get<std::string>();
    rec["body"] = std::move(body);
    rec["hash"] = event_hash(rec);
    lines_.push_back(canonical(rec));
    if (out_.is_open()) {
      out_ << lines_.back() << '\n';
      out_.flush();
    }
    records_.push_back(std::move(rec));
    return records_.back();
  }

  const std::vector<Json>& records() const { return records_; }
  const std::vector<std::string>& lines() const { return lines_; }

  std::string text() const {
    std::string s;
    for (const auto& l : lines_) s += l + "\n";
    return s;
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::vector<Json> records_;
  std::vector<std::string> lines_;
};

// Parses and checks a log; throws CorruptLog on any break in the chain.
inline std::vector<Json> read_event_log(std::istream& in) {
  std::vector<Json> out;
  std::string prev = genesis_hash;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto corrupt = [&](const std::string& why) {
      fail(ErrorKind::corrupt_log, "line " + std::to_string(lineno) + ": " + why);
    };
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception&) {
      corrupt("not valid JSON");
    }
    if (!rec.is_object() || !rec.contains("hash") || !rec.contains("prev") || !rec.contains("body") ||
        !rec.contains("event") || !rec.contains("seq"))
      corrupt("missing event fields");
    if (rec.value("schema", "") != record_schema || rec.value("type", "") != "event") corrupt("not a pris/1 event");
    if (rec["seq"] != out.size()) corrupt("sequence gap");
    if (rec["prev"] != prev) corrupt("chain broken");
    const std::string hash = rec["hash"].get<std::string>();
    Json bare = rec;
    bare.erase("hash");
    if (event_hash(bare) != hash) corrupt("hash mismatch");
    if (canonical(rec) != line) corrupt("non-canonical encoding");
    prev = hash;
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<Json> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::corrupt_log, "cannot read event log " + path.string());
  return read_event_log(in);
}

}  // namespace pris
