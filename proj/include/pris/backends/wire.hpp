#pragma once

// Request/response adapter for remote model servers.
//
// One POST per call to `<endpoint>/v1/call` with a canonical JSON body:
//
//   {"capability": "...", "idempotency_key": "...", "instruction_id": "...",
//    "payload": {...}, "schema": "pris-wire/1", "version": "1"}
//
// and a response {"status": "ok"|"error", "payload": {...}, "usage": {...}}.
// Media always travels by reference (a URI into the shared artifact store).

#include <httplib.h>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include "pris/core/errors.hpp"
#include "pris/core/hash.hpp"
#include "pris/core/records.hpp"

namespace pris::wire {

inline constexpr std::string_view wire_schema = "pris-wire/1";
inline constexpr std::string_view wire_version = "1";
inline constexpr std::string_view call_path = "/v1/call";

struct TransportResult {
  bool delivered = false;  // false on connection/transport failure
  bool timed_out = false;
  int status = 0;
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult post(const std::string& path, const std::string& body,
                               const std::map<std::string, std::string>& headers) = 0;
};

struct WireOptions {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_factor = 2.0;
  std::chrono::milliseconds timeout{60000};
  int max_in_flight = 4;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {}

  TransportResult post(const std::string& path, const std::string& body,
                       const std::map<std::string, std::string>& headers) override {
    httplib::Client client(base_url_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    TransportResult out;
    if (!res) {
      out.error = httplib::to_string(res.error());
      out.timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                      res.error() == httplib::Error::ConnectionTimeout;
      return out;
    }
    out.delivered = true;
    out.status = res->status;
    out.body = res->body;
    return out;
  }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

struct WireResponse {
  Json payload;
  Json usage;
};

inline Json make_request(std::string_view capability, std::string_view instruction_id, Json payload) {
  Json req{{"schema", wire_schema},
           {"capability", capability},
           {"version", wire_version},
           {"instruction_id", instruction_id},
           {"payload", std::move(payload)}};
  req["idempotency_key"] = sha256_hex(canonical(req)).substr(0, 32);
  return req;
}

class WireClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  WireClient(std::shared_ptr<Transport> transport, WireOptions options = {},
             Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : transport_(std::move(transport)),
        options_(options),
        sleeper_(std::move(sleeper)),
        in_flight_(std::max(1, std::min(options.max_in_flight, 1024))) {}

  WireResponse call(std::string_view capability, std::string_view instruction_id, Json payload) {
    const Json request = make_request(capability, instruction_id, std::move(payload));
    const std::string body = canonical(request);
    const std::string key = request.at("idempotency_key").get<std::string>();
    const std::string context = std::string(capability) + " call";

    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{in_flight_};

    auto delay = options_.initial_backoff;
    TransportResult last;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
      last = transport_->post(std::string(call_path), body, {{"Idempotency-Key", key}});
      const bool retryable = !last.delivered || last.status >= 500 || last.status == 429;
      if (!retryable) break;
      if (attempt < options_.max_attempts) {
        sleeper_(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(delay.count() * options_.backoff_factor));
      }
    }

    if (!last.delivered) {
      throw Error(ErrorKind::backend_error, context + " failed after " + std::to_string(options_.max_attempts) +
                                                " attempts: " + last.error,
                  last.timed_out ? WireFailure::timeout : WireFailure::remote_failure);
    }
    if (last.status != 200) {
      throw Error(ErrorKind::backend_error, context + " returned HTTP " + std::to_string(last.status),
                  WireFailure::remote_failure);
    }
    Json response;
    try {
      response = Json::parse(last.body);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::backend_error, context + ": unparseable response: " + e.what(), WireFailure::malformed);
    }
    if (!response.is_object() || !response.contains("status") || !response["status"].is_string())
      throw Error(ErrorKind::backend_error, context + ": response lacks status", WireFailure::malformed);
    if (response["status"] != "ok") {
      std::string why = response.contains("payload") ? response["payload"].dump() : "no detail";
      throw Error(ErrorKind::backend_error, context + ": remote error " + why, WireFailure::remote_failure);
    }
    if (!response.contains("payload") || !response["payload"].is_object())
      throw Error(ErrorKind::backend_error, context + ": response lacks payload object", WireFailure::malformed);
    return WireResponse{response["payload"], response.value("usage", Json::object())};
  }

 private:
  std::shared_ptr<Transport> transport_;
  WireOptions options_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> in_flight_;
};

// Required field of a response payload, or a Malformed backend error.
template <typename T>
T response_field(const Json& payload, const char* name, std::string_view capability) {
  try {
    return payload.at(name).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorKind::backend_error,
                std::string(capability) + " response payload lacks valid '" + name + "'", WireFailure::malformed);
  }
}

}  // namespace pris::wire
