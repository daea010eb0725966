#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "docpipe/backend/protocol.hpp"
#include "docpipe/backend/transport.hpp"

namespace docpipe::backend {

struct Endpoint {
  enum class Kind { http, mock, mock_http, replay };
  Kind kind = Kind::mock;
  /// URL for http, fixture path for replay, empty otherwise.
  std::string target;

  /// Parses "http://host:port[/prefix]", "mock", "mock-http" or "replay:PATH".
  static Endpoint parse(std::string_view s);
  std::string to_string() const;
};

struct BackendDescriptor {
  std::string model_id;
  Capability capability = Capability::extractive_qa;
  Endpoint endpoint;
  std::chrono::milliseconds timeout{30000};
  /// Character budget per request payload; 0 disables the check.
  std::size_t max_context = 0;
  /// Maximum in-flight requests through one client.
  int concurrency = 4;
};

/// Throws ValidationError when ids are empty or timeout/concurrency are not positive.
void validate(const BackendDescriptor& d);

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dimension() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Typed, validating front end over a Transport for one model.
class BackendClient {
 public:
  BackendClient(BackendDescriptor d, std::shared_ptr<Transport> transport);

  const BackendDescriptor& descriptor() const noexcept { return desc_; }
  const std::string& model_id() const noexcept { return desc_.model_id; }

  /// At most top_k answers; empty means "no answer found". Every answer is
  /// checked: score in [0,1], scores non-increasing, offsets slice the
  /// context to exactly the returned text.
  ExtractiveResult extract_spans(std::string_view question, std::string_view context,
                                 int top_k) const;
  std::string generate(std::string_view prompt, int max_new, double temperature) const;
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const;

 private:
  void require(Capability c) const;
  void check_budget(std::string_view payload, const char* what) const;
  json call(const json& request) const;

  BackendDescriptor desc_;
  std::shared_ptr<Transport> transport_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
  mutable std::atomic<std::size_t> dimension_{0};
};

}  // namespace docpipe::backend
