#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "docpipe/citations.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct LoadOptions {
  /// Require gold entries for all four questions on every document.
  bool fully_annotated = false;
};

/// Reads `documents.jsonl`, `gold.jsonl` and the optional `questions.json`
/// (defaults apply when absent). Throws LoadError for missing or unparsable
/// files and ValidationError listing every offending doc_id/qid.
Corpus load_corpus(const std::filesystem::path& dir, const LoadOptions& opts = {});
void write_corpus(const Corpus& c, const std::filesystem::path& dir);
/// Throws ValidationError on any corpus invariant violation.
void validate_corpus(const Corpus& c, const LoadOptions& opts = {});
std::string corpus_digest(const Corpus& c);
/// Copy of `c` with every document's text passed through `stripper`.
Corpus strip_corpus_citations(const Corpus& c, const CitationStripper& stripper);

struct Finding {
  enum class Kind { duplicate_answer, empty_non_nullable, dangling_provenance, unknown_document };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const noexcept { return findings.empty(); }
  std::size_t count(Finding::Kind k) const noexcept;
};

ValidationReport validate_answer_set(const AnswerSet& a, const Corpus& c);

}  // namespace docpipe
