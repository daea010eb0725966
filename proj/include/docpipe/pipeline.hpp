#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docpipe/backend/client.hpp"
#include "docpipe/backend/mock.hpp"
#include "docpipe/backend/transport.hpp"
#include "docpipe/config.hpp"
#include "docpipe/evaluation.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

// ---------------------------------------------------------------------------
// Backends

/// Lets callers interpose on every transport (tests count calls this way).
using TransportWrapper = std::function<std::shared_ptr<backend::Transport>(
    const backend::BackendDescriptor&, std::shared_ptr<backend::Transport>)>;

struct RegistryOptions {
  /// When set, every response is also recorded in replay fixture format.
  std::shared_ptr<backend::FixtureRecorder> recorder;
  TransportWrapper wrap;
};

/// Clients for the configured roster. Mock endpoints share one MockModel;
/// mock-http endpoints share one in-process server around it.
struct BackendRegistry {
  std::vector<std::shared_ptr<backend::BackendClient>> extractive;
  std::shared_ptr<backend::BackendClient> generator;
  std::shared_ptr<backend::BackendClient> embedder;
  std::vector<std::shared_ptr<backend::TransportServer>> servers;

  std::shared_ptr<backend::BackendClient> find_extractive(const std::string& model_id) const;
};

BackendRegistry build_backends(const PipelineConfig& cfg, const RegistryOptions& opts = {});

// ---------------------------------------------------------------------------
// Run directory

/// Execution stages as they appear under stages/<qid>/. Q1 and Q2 use
/// extract, refine, rag, ensemble, final; Q3 drops rag; Q4 uses baseline
/// (single-hop), multihop and final.
std::vector<std::string> stage_plan(const QuestionSpec& q, bool has_ensemble);

struct StageFailure {
  Qid qid = Qid::Q1;
  std::string stage;
  std::string doc_id;
  std::string error;

  friend bool operator==(const StageFailure&, const StageFailure&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string corpus_digest;
  std::string config_digest;
  std::string corpus_path;
  nlohmann::json effective_config = nlohmann::json::object();
  /// "<capability>:<model_id>@<endpoint>".
  std::vector<std::string> backends;
  std::vector<Qid> qids;
  /// "<qid>/<stage>" -> "complete" or "pending".
  std::map<std::string, std::string> stages;
  std::vector<StageFailure> failures;
  std::string created_at;
  std::string updated_at;
  /// "complete", "incomplete" (stopped early) or "failed" (failures recorded).
  std::string status = "incomplete";
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& run_dir);

/// stages/<qid>/<stage>/<doc_id>.json under `run_dir`.
std::filesystem::path stage_file(const std::filesystem::path& run_dir, Qid q,
                                 const std::string& stage, const std::string& doc_id);

/// UTC ISO-8601 time; $SOURCE_DATE_EPOCH, when set, pins it.
std::string timestamp_now();

struct RunOptions {
  std::vector<Qid> qids;
  /// Record per-document failures and continue instead of aborting.
  bool keep_going = false;
  /// Stop the run right after this stage completes for some question.
  std::optional<std::string> stop_after;
};

/// Runs questions over a corpus and persists every intermediate result.
/// Completed document-stage outputs found on disk are reused, so the same
/// object also implements resume.
class Orchestrator {
 public:
  Orchestrator(Corpus corpus, std::filesystem::path corpus_dir, PipelineConfig cfg,
               std::filesystem::path run_dir, std::shared_ptr<BackendRegistry> backends);

  /// Throws StaleRunError when `run_dir` holds a manifest with different
  /// digests, PreconditionError when Q4 is requested without Q1 outputs.
  RunManifest run(const RunOptions& opts);

  const RunManifest& manifest() const noexcept { return manifest_; }
  const PipelineConfig& config() const noexcept { return cfg_; }
  const Corpus& corpus() const noexcept { return corpus_; }

 private:
  void open_manifest(const std::vector<Qid>& qids);
  void run_question(const QuestionSpec& q, const RunOptions& opts, bool& stopped);
  bool run_stage(const QuestionSpec& q, const std::string& stage, const RunOptions& opts);
  nlohmann::json compute(const QuestionSpec& q, const std::string& stage, const Document& doc);
  nlohmann::json read_stage(Qid q, const std::string& stage, const std::string& doc_id) const;
  void write_stage(Qid q, const std::string& stage, const std::string& doc_id,
                   const nlohmann::json& j);
  void save_manifest();

  Corpus corpus_;
  std::filesystem::path corpus_dir_;
  PipelineConfig cfg_;
  std::filesystem::path run_dir_;
  std::shared_ptr<BackendRegistry> backends_;
  RunManifest manifest_;
  std::mutex write_mu_;
};

/// Re-runs pending stages of an existing run. The stored effective config is
/// used unless `cfg` is given; either way digests must match.
RunManifest resume_run(const std::filesystem::path& run_dir,
                       const std::optional<PipelineConfig>& cfg = std::nullopt,
                       const RegistryOptions& registry = {}, const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Reading results back

/// Per-document AnswerSets for every scored system of one question, keyed by
/// system label ("raw/<m>", "rag/<m>", "<ensemble label>", Q4:
/// "single_hop/<m>", "multi_hop_k<k>/<m>"), in table order.
std::vector<std::pair<std::string, std::map<std::string, AnswerSet>>> load_systems(
    const std::filesystem::path& run_dir, const RunManifest& m, Qid q);

/// Final per-document output of a question.
std::map<std::string, AnswerSet> load_final(const std::filesystem::path& run_dir,
                                            const RunManifest& m, Qid q);

/// Per-model sets that feed the ensemble (post-RAG when RAG ran).
std::map<std::string, std::map<std::string, AnswerSet>> load_member_sets(
    const std::filesystem::path& run_dir, const RunManifest& m, Qid q);

/// The corpus and config recorded in a run's manifest.
Corpus load_run_corpus(const RunManifest& m);
PipelineConfig load_run_config(const RunManifest& m);

/// Scores every system of every question in the run. Documents without gold
/// for a question or without output are skipped and listed in metadata.
MetricReport evaluate_run(const std::filesystem::path& run_dir, const MetricConfig& metrics,
                          const BackendRegistry& backends);

struct PairScore {
  std::string first;
  std::string second;
  DocScores scores;
};

/// Scores every unordered pair of models by combining their sets per
/// document, ranked by SMat, then F1, then names. Throws PreconditionError
/// with fewer than two models.
std::vector<PairScore> sweep_ensemble_pairs(
    const Corpus& corpus, Qid q,
    const std::map<std::string, std::map<std::string, AnswerSet>>& per_model,
    EmbeddingCache& cache, const MetricConfig& metrics);

}  // namespace docpipe
