#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docpipe/backend/client.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

enum class EntityKind { techniques, software };
std::string_view to_string(EntityKind k) noexcept;
EntityKind parse_entity_kind(std::string_view s);
/// Q1 asks for techniques, Q2 for software; other questions have no kind.
EntityKind entity_kind_for(Qid q);

struct RagPrompt {
  EntityKind kind = EntityKind::techniques;
  std::string instruction;
  /// Evidence strings in rank order, internal whitespace collapsed.
  std::vector<std::string> evidence;
  std::string rendered;
};

struct RagOptions {
  /// Full template overrides per kind. A template must contain `{evidence}`
  /// (the numbered evidence list) and may contain `{instruction}`.
  std::map<EntityKind, std::string> templates;
  int max_new_tokens = 256;
  double temperature = 0.0;
};

/// Throws ValidationError when a template lacks `{evidence}`.
void validate(const RagOptions& opts);

std::string default_instruction(EntityKind kind);

/// Renders the instruction followed by the numbered evidence. Throws
/// PreconditionError when `raw_answers` is empty.
RagPrompt build_entity_prompt(EntityKind kind, std::span<const std::string> raw_answers,
                              const RagOptions& opts = {});

/// True for generations meaning "nothing found", e.g. "None." or "N/A".
bool is_none_marker(std::string_view s);

/// Parses a line-oriented, numbered or bulleted list. List markers and
/// surrounding special characters are removed, none-entries and empties are
/// dropped, then entries are deduplicated. Returns [] for an explicit
/// none-marker when `nullable`; any other empty outcome throws StageError.
std::vector<std::string> parse_entity_list(std::string_view generation, bool nullable);

struct RagResult {
  std::optional<RagPrompt> prompt;
  std::string generation;
  std::string generation_id;
  AnswerSet answers;
};

/// Second-stage generation over first-stage evidence. Answers keep the
/// generation order; each is linked to the evidence spans it matches by
/// case-insensitive containment (either direction), or to the generation.
/// Empty evidence skips the backend call.
RagResult rag_enhance(const Document& doc, const QuestionSpec& q, std::span<const Span> raw,
                      const backend::BackendClient& generator, const RagOptions& opts = {});
/// Same, with evidence = the refined answer texts and their provenance spans.
RagResult rag_enhance(const Document& doc, const QuestionSpec& q, const AnswerSet& refined,
                      const backend::BackendClient& generator, const RagOptions& opts = {});

}  // namespace docpipe
