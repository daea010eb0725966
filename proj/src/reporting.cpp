#include "docpipe/reporting.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "docpipe/error.hpp"
#include "docpipe/text.hpp"

namespace docpipe {

namespace {

const char* title_for(Qid q) {
  switch (q) {
    case Qid::Q1: return "Q1 ML/NLP techniques";
    case Qid::Q2: return "Q2 ML/NLP software";
    case Qid::Q3: return "Q3 research questions";
    case Qid::Q4: return "Q4 technical purpose";
  }
  return "";
}

std::pair<std::string, std::string> split_label(const std::string& label) {
  static const std::pair<const char*, const char*> sections[] = {
      {"raw/", "Raw extracted"},
      {"rag/", "RAG-enhanced"},
      {"single_hop/", "Single-hop"},
  };
  for (const auto& [prefix, section] : sections) {
    if (label.starts_with(prefix)) return {section, label.substr(std::string_view(prefix).size())};
  }
  return {"", label};
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : ""; }

Table standard_table(const QuestionScores& q) {
  Table t;
  t.qid = q.qid;
  t.title = title_for(q.qid);
  t.columns = {"F1", "EMat", "SMat", "Ment"};
  for (const auto& s : q.systems) {
    auto [section, label] = split_label(s.label);
    t.rows.push_back({section, label, {s.corpus.f1, s.corpus.em, s.corpus.smat, s.corpus.mentions}});
  }
  return t;
}

Table q4_table(const QuestionScores& q, const nlohmann::json& meta) {
  Table t;
  t.qid = q.qid;
  t.title = title_for(q.qid);
  std::vector<int> sweep = meta.value("q4_topk_sweep", std::vector<int>{1, 3, 5});
  const int primary = meta.value("q4_primary_topk", sweep.empty() ? 1 : sweep.front());
  const int baseline = meta.value("q4_baseline_topk", 10);
  t.columns = {"F1", "EMat"};
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    t.columns.push_back((i == 0 ? "SMat topk=" : "topk=") + std::to_string(sweep[i]));
  }

  std::vector<std::string> models;
  for (const auto& s : q.systems) {
    if (s.label.starts_with("single_hop/")) {
      const std::string m = s.label.substr(11);
      std::vector<std::optional<double>> v(t.columns.size());
      v[0] = s.corpus.f1;
      v[1] = s.corpus.em;
      if (v.size() > 2) v[2] = s.corpus.smat;
      t.rows.push_back({"Single-hop", m, std::move(v)});
    }
    if (s.label.starts_with("multi_hop_k")) {
      const std::string m = s.label.substr(s.label.find('/') + 1);
      if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
    }
  }
  for (const auto& m : models) {
    std::vector<std::optional<double>> v(t.columns.size());
    if (const SystemScores* p = q.find("multi_hop_k" + std::to_string(primary) + "/" + m)) {
      v[0] = p->corpus.f1;
      v[1] = p->corpus.em;
    }
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      if (const SystemScores* s = q.find("multi_hop_k" + std::to_string(sweep[i]) + "/" + m)) {
        v[2 + i] = s->corpus.smat;
      }
    }
    t.rows.push_back({"Multiple single-hop", m, std::move(v)});
  }
  t.notes.push_back(fmt::format(
      "Single-hop SMat keeps the top {} answers of the whole question; multiple single-hop F1 and "
      "EMat use topk={} per sub-question.",
      baseline, primary));
  return t;
}

}  // namespace

EmittedTables emit_tables(const MetricReport& report) {
  if (report.questions.empty()) throw EvaluationError("report has no scored questions");
  EmittedTables out;
  for (Qid q : kAllQids) {
    const QuestionScores* qs = report.find(q);
    if (!qs || qs->systems.empty()) {
      out.notices.push_back(std::string(to_string(q)) + ": no scored systems, table omitted");
      continue;
    }
    out.tables.push_back(q == Qid::Q4 ? q4_table(*qs, report.metadata) : standard_table(*qs));
  }
  if (const auto tau = report.metadata.find("tau"); tau != report.metadata.end()) {
    for (auto& t : out.tables) t.notes.push_back(fmt::format("SMat threshold tau = {:.3f}.", tau->get<double>()));
  }
  return out;
}

std::string render_text(const Table& t) {
  std::size_t label_w = 6;
  for (const auto& r : t.rows) {
    label_w = std::max(label_w, (r.section.empty() ? 0 : 2) + text::length(r.label));
    label_w = std::max(label_w, text::length(r.section));
  }
  std::vector<std::size_t> widths;
  for (const auto& c : t.columns) widths.push_back(std::max<std::size_t>(c.size(), 5));

  auto pad_right = [](const std::string& s, std::size_t w) {
    const std::size_t n = text::length(s);
    return s + std::string(w > n ? w - n : 0, ' ');
  };
  auto pad_left = [](const std::string& s, std::size_t w) {
    return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
  };

  std::string out = t.title + "\n";
  std::string header = pad_right("", label_w);
  for (std::size_t i = 0; i < t.columns.size(); ++i) header += "  " + pad_left(t.columns[i], widths[i]);
  out += header + "\n" + std::string(header.size(), '-') + "\n";
  std::string current;
  for (const auto& r : t.rows) {
    if (r.section != current) {
      current = r.section;
      if (!current.empty()) out += current + "\n";
    }
    std::string line = pad_right((r.section.empty() ? "" : "  ") + r.label, label_w);
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      line += "  " + pad_left(i < r.values.size() ? cell(r.values[i]) : "", widths[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  for (const auto& n : t.notes) out += "note: " + n + "\n";
  return out;
}

std::string render_text(const EmittedTables& e) {
  std::string out;
  for (const auto& t : e.tables) {
    if (!out.empty()) out += "\n";
    out += render_text(t);
  }
  for (const auto& n : e.notices) out += (out.empty() ? "" : "\n") + n + "\n";
  return out;
}

nlohmann::json to_json(const EmittedTables& e) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : e.tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
      nlohmann::json values = nlohmann::json::array();
      for (const auto& v : r.values) values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      rows.push_back({{"section", r.section}, {"label", r.label}, {"values", values}});
    }
    tables.push_back({{"qid", to_string(t.qid)},
                      {"title", t.title},
                      {"columns", t.columns},
                      {"rows", rows},
                      {"notes", t.notes}});
  }
  return {{"tables", tables}, {"notices", e.notices}};
}

DescriptiveRow describe_answers(const std::string& label,
                                std::span<const std::vector<std::string>> per_doc, bool nullable) {
  DescriptiveRow r;
  r.label = label;
  r.n_docs = per_doc.size();
  if (per_doc.empty()) return r;
  std::size_t nonempty = 0, spans = 0, words = 0;
  double wps_sum = 0.0;
  for (const auto& answers : per_doc) {
    if (answers.empty()) continue;
    ++nonempty;
    std::size_t doc_words = 0;
    for (const auto& a : answers) doc_words += text::split_whitespace(a).size();
    spans += answers.size();
    words += doc_words;
    wps_sum += static_cast<double>(doc_words) / static_cast<double>(answers.size());
  }
  const double denom = static_cast<double>(nullable ? nonempty : per_doc.size());
  if (denom > 0) {
    r.mean_spans = static_cast<double>(spans) / denom;
    r.total_words = static_cast<double>(words) / denom;
  }
  if (nonempty > 0) r.words_per_span = wps_sum / static_cast<double>(nonempty);
  r.pct_empty = 100.0 * static_cast<double>(per_doc.size() - nonempty) / static_cast<double>(per_doc.size());
  return r;
}

std::vector<DescriptiveRow> emit_descriptives(
    const Corpus& corpus, Qid q,
    const std::vector<std::pair<std::string, std::map<std::string, AnswerSet>>>& systems) {
  const bool nullable = corpus.spec(q).nullable;
  std::vector<std::string> docs;
  std::vector<std::vector<std::string>> gold;
  for (const auto& d : corpus.documents) {
    if (const GoldAnnotation* g = corpus.find_gold(d.doc_id, q)) {
      docs.push_back(d.doc_id);
      gold.push_back(g->gold_answers);
    }
  }
  std::vector<DescriptiveRow> rows{describe_answers("Gold", gold, nullable)};
  for (const auto& [label, sets] : systems) {
    std::vector<std::vector<std::string>> per_doc;
    for (const auto& id : docs) {
      const auto it = sets.find(id);
      per_doc.push_back(it == sets.end() ? std::vector<std::string>{} : it->second.texts());
    }
    rows.push_back(describe_answers(label, per_doc, nullable));
  }
  return rows;
}

std::string render_descriptives(Qid q, std::span<const DescriptiveRow> rows, bool nullable) {
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, text::length(r.label));
  std::string out = fmt::format("{} descriptives\n", to_string(q));
  std::string header = fmt::format("{:<{}}  {:>6}  {:>8}  {:>14}  {:>7}", "system", w, "# Docs",
                                   "# Spans", "# Words/Span", "# Words");
  if (nullable) header += fmt::format("  {:>7}", "% Empty");
  out += header + "\n" + std::string(header.size(), '-') + "\n";
  for (const auto& r : rows) {
    std::string line = fmt::format("{}{}  {:>6}  {:>8.3f}  {:>14.3f}  {:>7.3f}", r.label,
                                   std::string(w - std::min(w, text::length(r.label)), ' '),
                                   r.n_docs, r.mean_spans, r.words_per_span, r.total_words);
    if (nullable) line += fmt::format("  {:>7.1f}", r.pct_empty);
    out += line + "\n";
  }
  return out;
}

nlohmann::json to_json(const DescriptiveRow& r) {
  return {{"label", r.label},           {"n_docs", r.n_docs},
          {"mean_spans", r.mean_spans}, {"words_per_span", r.words_per_span},
          {"total_words", r.total_words}, {"pct_empty", r.pct_empty}};
}

}  // namespace docpipe
