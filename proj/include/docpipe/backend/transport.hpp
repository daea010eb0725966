#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include "docpipe/backend/protocol.hpp"

namespace docpipe::backend {

/// Moves one wire request to a model and returns the raw wire response.
/// Implementations must be safe for concurrent calls.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual json post(Capability cap, const std::string& model_id, const json& request) = 0;
};

/// HTTP JSON transport. The model id travels in the `X-Model-Id` header so
/// one server may host several models. Transport failures, timeouts and 5xx
/// responses are retried with exponential backoff; 4xx responses and
/// unparsable bodies raise ProtocolError immediately.
class HttpTransport final : public Transport {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
  };

  HttpTransport(std::string base_url, Options opts);
  json post(Capability cap, const std::string& model_id, const json& request) override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  Options opts_;
};

/// Serves stored responses keyed by (capability, model_id, request_sha256).
/// Fixture format: JSONL of {capability, model_id, request_sha256, response}.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& fixture);
  json post(Capability cap, const std::string& model_id, const json& request) override;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, std::string>, json> entries_;
  std::filesystem::path path_;
};

/// Collects (request, response) pairs and writes them in replay fixture
/// format, sorted by key so the file is independent of call order.
class FixtureRecorder {
 public:
  void record(Capability cap, const std::string& model_id, const json& request,
              const json& response);
  /// Adds the entries of an existing fixture file; recorded entries win.
  void load(const std::filesystem::path& p);
  void write(const std::filesystem::path& p) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::string, std::string>, json> entries_;
};

class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<FixtureRecorder> sink)
      : inner_(std::move(inner)), sink_(std::move(sink)) {}
  json post(Capability cap, const std::string& model_id, const json& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::shared_ptr<FixtureRecorder> sink_;
};

}  // namespace docpipe::backend
