#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docpipe/types.hpp"

namespace docpipe {

struct MergePolicy {
  bool enabled = true;
  /// Spans whose gap is at most this many characters are joined.
  int allow_adjacent_gap = 1;
  /// When false, a span nested inside the running merged extent is dropped
  /// instead of joining it (and does not lift its score).
  bool containment_merge = true;
};

struct MergedGroup {
  Span span;
  /// Indices into the input of the spans folded into `span`.
  std::vector<std::size_t> members;
};

/// Positional merge: overlapping spans and spans separated by at most
/// `allow_adjacent_gap` characters become one span over the document slice,
/// scored with the best member score. Output is ordered by start and
/// pairwise non-overlapping. With `enabled == false` every span is its own
/// group, in input order.
std::vector<MergedGroup> merge_span_groups(std::span<const Span> spans, const Document& doc,
                                           const MergePolicy& policy);
std::vector<Span> merge_spans(std::span<const Span> spans, const Document& doc,
                              const MergePolicy& policy);

/// Drops leading and trailing characters other than letters and digits,
/// keeping a trailing closing bracket whose opener occurs inside the text.
std::string trim_special(std::string_view text);

/// SQuAD answer normalization: lower case, ASCII punctuation removal,
/// article removal (a, an, the), whitespace collapse.
std::string squad_normalize(std::string_view text);

/// Keeps the first of every group of strings equal under squad_normalize.
std::vector<std::string> dedup_answers(std::span<const std::string> answers);

/// Orders answers by score descending, then best span (start, end)
/// ascending, then text.
void sort_answers(std::vector<Answer>& answers);

/// Normalization dedup over answers: the first answer of each class is kept
/// and absorbs the later ones' text (as a variant), variants and provenance.
void dedup_answer_list(std::vector<Answer>& answers);

/// Merge, trim, order and dedup one model's spans into an AnswerSet.
AnswerSet refine_spans(const Document& doc, Qid qid, bool nullable, std::span<const Span> spans,
                       const MergePolicy& policy);

}  // namespace docpipe
