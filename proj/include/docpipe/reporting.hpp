#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "docpipe/evaluation.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct TableRow {
  /// Group heading ("Raw extracted", "RAG-enhanced", ...); empty for
  /// top-level rows such as the ensemble.
  std::string section;
  std::string label;
  /// One value per column; nullopt renders as a blank cell.
  std::vector<std::optional<double>> values;
};

struct Table {
  Qid qid = Qid::Q1;
  std::string title;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  std::vector<std::string> notes;
};

struct EmittedTables {
  std::vector<Table> tables;
  /// One line per question without scored systems.
  std::vector<std::string> notices;
};

/// Tables for every question in the report, in Q1..Q4 order. Q1-Q3 use
/// F1, EMat, SMat and Ment columns; Q4 uses F1, EMat and one SMat column per
/// multi-hop top-k, with the single-hop SMat in the first of those.
EmittedTables emit_tables(const MetricReport& report);

/// Fixed-width text with three decimals per cell.
std::string render_text(const Table& t);
std::string render_text(const EmittedTables& e);
/// Full-precision machine-readable form of the same cells.
nlohmann::json to_json(const EmittedTables& e);

struct DescriptiveRow {
  std::string label;
  std::size_t n_docs = 0;
  /// Mean answers per document; over non-empty documents when nullable.
  double mean_spans = 0.0;
  /// Per-document mean words per answer, averaged over non-empty documents.
  double words_per_span = 0.0;
  /// Mean total answer words per document, same denominator as mean_spans.
  double total_words = 0.0;
  double pct_empty = 0.0;

  friend bool operator==(const DescriptiveRow&, const DescriptiveRow&) = default;
};

/// Statistics for one system from per-document answer strings.
DescriptiveRow describe_answers(const std::string& label,
                                std::span<const std::vector<std::string>> per_doc, bool nullable);

/// Gold row first, then one row per system. Only documents with gold for
/// `q` are counted.
std::vector<DescriptiveRow> emit_descriptives(
    const Corpus& corpus, Qid q,
    const std::vector<std::pair<std::string, std::map<std::string, AnswerSet>>>& systems);

std::string render_descriptives(Qid q, std::span<const DescriptiveRow> rows, bool nullable);
nlohmann::json to_json(const DescriptiveRow& r);

}  // namespace docpipe
