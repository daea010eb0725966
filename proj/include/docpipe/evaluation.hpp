#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "docpipe/backend/client.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct MetricConfig {
  /// Similar Match threshold.
  double tau = 0.80;
  bool mentions_case_sensitive = true;
  /// Texts per embed request. 1 keeps replay keys independent of which
  /// other strings happen to need embedding.
  std::size_t embed_batch_size = 1;

  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

/// Throws ValidationError unless 0 < tau <= 1 and embed_batch_size >= 1.
void validate(const MetricConfig& cfg);

/// squad_normalize followed by a whitespace split.
std::vector<std::string> squad_tokens(std::string_view s);

/// Token-multiset F1 with precision over the prediction and recall over the
/// gold. Both empty scores 1, exactly one empty scores 0.
double f1_token(std::string_view gold, std::string_view pred);
bool exact_match(std::string_view gold, std::string_view pred);

/// True when some prediction contains the gold string; or the gold ends in a
/// parenthesized part and a prediction equals the text before or inside the
/// parentheses; or the whitespace-free prediction contains the
/// whitespace-free gold. Comparisons ignore case only when
/// `mentions_case_sensitive` is false.
bool mentions_match(std::string_view gold, std::span<const std::string> preds,
                    const MetricConfig& cfg = {});

/// Embeddings by exact string, computed once per instance. Safe for
/// concurrent use. Backend failures surface as EvaluationError.
class EmbeddingCache {
 public:
  EmbeddingCache(std::shared_ptr<const backend::BackendClient> backend, std::size_t batch_size = 1);

  const backend::EmbeddingVector& get(const std::string& text);
  /// Embeds every missing text, `batch_size` per request, in input order.
  void prefetch(std::span<const std::string> texts);
  std::size_t size() const;
  const std::string& model_id() const noexcept { return backend_->model_id(); }

 private:
  std::shared_ptr<const backend::BackendClient> backend_;
  std::size_t batch_size_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<backend::EmbeddingVector>> cache_;
};

/// Highest cosine between the gold and any prediction; -1 without predictions.
double max_similarity(const std::string& gold, std::span<const std::string> preds,
                      EmbeddingCache& cache);
bool similar_match(const std::string& gold, std::span<const std::string> preds,
                   EmbeddingCache& cache, const MetricConfig& cfg);

struct DocScores {
  double f1 = 0.0;
  double em = 0.0;
  double smat = 0.0;
  double mentions = 0.0;

  friend bool operator==(const DocScores&, const DocScores&) = default;
};

/// Scores one document. EM, SMat and Mentions are the fraction of gold
/// answers matched by some prediction; F1 is the mean over gold answers of
/// the best prediction F1. With empty gold every metric is 1 when there are
/// no predictions and 0 otherwise. Predictions are the answer texts plus
/// their folded variants. `cache` may be null only when SMat is not needed
/// (the gold or the prediction list is empty).
DocScores score_document(std::span<const std::string> gold, const AnswerSet& preds,
                         EmbeddingCache* cache, const MetricConfig& cfg);
/// Throws PreconditionError when gold and preds disagree on doc or qid.
DocScores score_document(const GoldAnnotation& gold, const AnswerSet& preds, EmbeddingCache* cache,
                         const MetricConfig& cfg);

struct SystemScores {
  std::string label;
  std::map<std::string, DocScores> per_doc;
  DocScores corpus;
};

struct QuestionScores {
  Qid qid = Qid::Q1;
  /// Table row order.
  std::vector<SystemScores> systems;

  const SystemScores* find(std::string_view label) const;
};

struct MetricReport {
  std::vector<QuestionScores> questions;
  nlohmann::json metadata = nlohmann::json::object();

  const QuestionScores* find(Qid q) const;
};

struct ScoredDoc {
  Qid qid = Qid::Q1;
  std::string system;
  std::string doc_id;
  DocScores scores;
};

/// Arithmetic mean per (qid, system). Questions come out in Q1..Q4 order and
/// systems in order of first appearance. Throws EvaluationError on empty
/// input or a repeated (qid, system, doc) entry.
MetricReport aggregate(std::span<const ScoredDoc> docs, nlohmann::json metadata = nlohmann::json::object());

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace docpipe
