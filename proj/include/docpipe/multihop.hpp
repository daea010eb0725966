#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docpipe/backend/client.hpp"
#include "docpipe/extraction.hpp"
#include "docpipe/refinement.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct SubQuestion {
  Qid parent_qid = Qid::Q4;
  std::string bridge_entity;
  std::string text;
  std::string subquestion_id;

  friend bool operator==(const SubQuestion&, const SubQuestion&) = default;
};

inline constexpr std::string_view kDefaultSubquestionTemplate = "What was {entity} used for?";

/// "sq-" followed by the first 12 hex digits of sha256(entity).
std::string subquestion_id(std::string_view entity);

/// One sub-question per bridge, in input order. Throws PreconditionError
/// when the template lacks `{entity}` or the bridges contain duplicates.
std::vector<SubQuestion> make_subquestions(std::string_view tmpl,
                                           std::span<const std::string> bridges);

struct MultihopOptions {
  std::string subquestion_template{kDefaultSubquestionTemplate};
  int topk_per_sub = 1;
  int baseline_topk = 10;
  /// Keeps only the first N bridges when set.
  std::optional<std::size_t> max_bridges;
  WindowingOptions windowing;
  MergePolicy merge;
  std::size_t workers = 1;
};

struct MultihopResult {
  AnswerSet answers;
  /// Concatenation of the per-sub-question spans in sub-question order.
  std::vector<Span> pre_merge;
  std::vector<SubQuestion> subquestions;
  /// No bridges were available and the single-hop baseline was used.
  bool fallback = false;
};

/// Bridge entities from Q1's final answers: answer texts in rank order,
/// exact duplicates removed, capped at `max_bridges`.
std::vector<std::string> bridges_from(const AnswerSet& q1,
                                      std::optional<std::size_t> max_bridges = std::nullopt);

/// Runs one extraction per sub-question keeping topk_per_sub spans each,
/// tags spans with their subquestion_id, then refines the union. Zero
/// bridges fall back to single_hop_baseline.
MultihopResult answer_multihop(const Document& doc, const QuestionSpec& q4,
                               std::span<const std::string> bridges,
                               const backend::BackendClient& backend, const MultihopOptions& opts);

/// Q4 as one ordinary question, keeping baseline_topk spans.
MultihopResult single_hop_baseline(const Document& doc, const QuestionSpec& q4,
                                   const backend::BackendClient& backend,
                                   const MultihopOptions& opts);

}  // namespace docpipe
