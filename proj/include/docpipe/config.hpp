#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docpipe/backend/client.hpp"
#include "docpipe/ensemble.hpp"
#include "docpipe/evaluation.hpp"
#include "docpipe/extraction.hpp"
#include "docpipe/rag.hpp"
#include "docpipe/refinement.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct BackendConfig {
  std::string model_id;
  /// "http://host:port", "mock", "mock-http" or "replay:PATH".
  std::string endpoint = "mock";
  std::int64_t timeout_ms = 30000;
  std::size_t max_context = 0;
  int concurrency = 4;

  backend::BackendDescriptor descriptor(backend::Capability cap) const;
  friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

struct MockConfig {
  std::uint64_t seed = 0;
  /// Behavior table for mock endpoints; empty means an empty table.
  std::filesystem::path table;

  friend bool operator==(const MockConfig&, const MockConfig&) = default;
};

struct Q4Config {
  std::string subquestion_template = "What was {entity} used for?";
  /// Top-k per sub-question used for the F1 and EMat columns.
  int topk_per_sub = 1;
  std::vector<int> topk_sweep = {1, 3, 5};
  int baseline_topk = 10;
  std::optional<std::size_t> max_bridges;

  friend bool operator==(const Q4Config&, const Q4Config&) = default;
};

/// Parsed, validated configuration. Immutable once load_config returns.
struct PipelineConfig {
  std::vector<BackendConfig> extractive;
  BackendConfig generate;
  BackendConfig embed;
  MockConfig mock;
  std::map<Qid, QuestionSpec> questions;
  WindowingOptions windowing;
  MergePolicy merge;
  RagOptions rag;
  Q4Config q4;
  std::map<Qid, EnsembleSpec> ensembles;
  MetricConfig metrics;
  std::size_t workers = 1;

  std::vector<std::string> extractive_ids() const;
  const BackendConfig* find_extractive(const std::string& model_id) const;
};

/// The five extractive models, one generator and one embedder, all served
/// by a local HTTP backend at 127.0.0.1:8000.
PipelineConfig default_config();

/// Overlays `j` onto the defaults. Relative paths (mock table, replay
/// fixtures) resolve against `base_dir`. Unknown keys and invalid values
/// throw ValidationError listing every problem found.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Reads `path`, or $DOCPIPE_CONFIG when `path` is empty; falls back to
/// default_config() when neither is given.
PipelineConfig load_config(const std::filesystem::path& path = {});

void validate(const PipelineConfig& cfg);

/// The effective configuration with every default filled in. Feeding it back
/// to parse_config yields an equal config.
nlohmann::json to_json(const PipelineConfig& cfg);
/// Digest of the effective config plus the mock table contents. Worker count
/// is excluded: it never changes outputs.
std::string config_digest(const PipelineConfig& cfg);

}  // namespace docpipe
