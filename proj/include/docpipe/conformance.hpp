#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "docpipe/backend/transport.hpp"

namespace docpipe {

struct ConformanceOptions {
  std::string extractive_model = "deberta";
  std::string generate_model = "llama-3-8b";
  std::string embed_model = "e5-mistral-7b-instruct";
  /// Random contexts for the offset-fidelity check.
  std::size_t contexts = 100;
  std::uint64_t seed = 17;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Contract suite for a backend server: response schemas for all three
/// capabilities, offset-slice fidelity on random contexts (including
/// non-ASCII text), deterministic responses, and 4xx on malformed requests.
/// `transport` is usually an HttpTransport pointed at the server.
std::vector<CheckResult> run_conformance(backend::Transport& transport,
                                         const ConformanceOptions& opts = {});

}  // namespace docpipe
