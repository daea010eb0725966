#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "docpipe/text.hpp"

namespace docpipe {

enum class Qid { Q1, Q2, Q3, Q4 };
inline constexpr Qid kAllQids[] = {Qid::Q1, Qid::Q2, Qid::Q3, Qid::Q4};

std::string_view to_string(Qid q) noexcept;
/// Accepts "Q1".."Q4" (case-insensitive); throws ValidationError otherwise.
Qid parse_qid(std::string_view s);

enum class AnswerType { entity, phrase };
std::string_view to_string(AnswerType t) noexcept;
AnswerType parse_answer_type(std::string_view s);

enum class Stage { extract, refine, rag, multihop, ensemble };
std::string_view to_string(Stage s) noexcept;
Stage parse_stage(std::string_view s);

/// One full-text document. Immutable once loaded.
struct Document {
  std::string doc_id;
  text::Utf8Text text;
  std::map<std::string, std::string> meta;

  friend bool operator==(const Document&, const Document&) = default;
};

struct QuestionSpec {
  Qid qid = Qid::Q1;
  std::string text;
  AnswerType answer_type = AnswerType::entity;
  bool nullable = false;
  int topk = 1;
  bool merge_enabled = true;
  std::vector<Stage> stages;

  bool has_stage(Stage s) const noexcept;
  friend bool operator==(const QuestionSpec&, const QuestionSpec&) = default;
};

/// The four predetermined questions with their retention and stage defaults.
QuestionSpec default_question_spec(Qid q);
std::map<Qid, QuestionSpec> default_question_specs();
/// Throws ValidationError when topk < 1 or the stage list is inconsistent.
void validate(const QuestionSpec& spec);

/// An extracted fragment in document coordinates: text == doc.text[start, end).
struct Span {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
  std::string model_id;
  std::optional<int> window_id;
  std::optional<std::string> subquestion_id;

  friend bool operator==(const Span&, const Span&) = default;
};

struct Provenance {
  std::vector<Span> spans;
  std::vector<std::string> generation_ids;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Answer {
  std::string text;
  /// Best contributing span score, or 0 when only a generation backs it.
  double score = 0.0;
  /// Other surface strings folded into this answer by normalization dedup.
  std::vector<std::string> variants;
  Provenance provenance;

  friend bool operator==(const Answer&, const Answer&) = default;
};

struct AnswerSet {
  std::string doc_id;
  Qid qid = Qid::Q1;
  std::vector<Answer> answers;
  bool empty_means_unanswerable = false;
  /// Set when a non-nullable question produced nothing.
  bool forced_empty = false;

  std::vector<std::string> texts() const;
  /// Answer texts followed by their variants, in answer order.
  std::vector<std::string> surface_forms() const;
  friend bool operator==(const AnswerSet&, const AnswerSet&) = default;
};

struct GoldAnnotation {
  std::string doc_id;
  Qid qid = Qid::Q1;
  std::vector<std::string> gold_answers;

  friend bool operator==(const GoldAnnotation&, const GoldAnnotation&) = default;
};

using GoldKey = std::pair<std::string, Qid>;

struct Corpus {
  std::vector<Document> documents;
  std::map<GoldKey, GoldAnnotation> gold;
  std::map<Qid, QuestionSpec> question_specs;

  const Document* find(std::string_view doc_id) const noexcept;
  const Document& document(std::string_view doc_id) const;
  const GoldAnnotation* find_gold(std::string_view doc_id, Qid q) const;
  const QuestionSpec& spec(Qid q) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

}  // namespace docpipe
