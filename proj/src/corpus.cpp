#include "docpipe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/refinement.hpp"

namespace docpipe {

namespace fs = std::filesystem;

namespace {

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot open " + p.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw LoadError(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += dump_canonical(r) + "\n";
  return out;
}

}  // namespace

Corpus load_corpus(const fs::path& dir, const LoadOptions& opts) {
  Corpus c;
  const fs::path docs = dir / "documents.jsonl";
  const fs::path gold = dir / "gold.jsonl";
  const fs::path questions = dir / "questions.json";

  auto wrap = [](const fs::path& p, auto&& fn) {
    try {
      fn();
    } catch (const json::exception& e) {
      throw LoadError(p.string() + ": " + e.what());
    } catch (const ValidationError&) {
      throw;
    } catch (const LoadError&) {
      throw;
    } catch (const Error& e) {
      throw LoadError(p.string() + ": " + e.what());
    }
  };

  wrap(docs, [&] {
    for (const auto& row : read_jsonl(docs)) c.documents.push_back(row.get<Document>());
  });

  std::vector<std::string> findings;
  wrap(gold, [&] {
    for (const auto& row : read_jsonl(gold)) {
      auto g = row.get<GoldAnnotation>();
      GoldKey key{g.doc_id, g.qid};
      if (c.gold.contains(key)) {
        findings.push_back("duplicate gold record for doc_id '" + g.doc_id + "' qid " +
                           std::string(to_string(g.qid)));
        continue;
      }
      c.gold.emplace(std::move(key), std::move(g));
    }
  });

  if (fs::exists(questions)) {
    wrap(questions, [&] {
      const json j = read_json_file(questions);
      const json& list = j.is_object() ? j.at("questions") : j;
      c.question_specs = default_question_specs();
      for (const auto& q : list) {
        auto spec = q.get<QuestionSpec>();
        c.question_specs[spec.qid] = spec;
      }
    });
  } else {
    c.question_specs = default_question_specs();
  }

  if (!findings.empty()) throw ValidationError("invalid corpus " + dir.string(), findings);
  validate_corpus(c, opts);
  return c;
}

void validate_corpus(const Corpus& c, const LoadOptions& opts) {
  std::vector<std::string> findings;
  std::set<std::string> ids;
  for (const auto& d : c.documents) {
    if (d.doc_id.empty()) findings.push_back("document with empty doc_id");
    if (!ids.insert(d.doc_id).second) findings.push_back("duplicate doc_id '" + d.doc_id + "'");
    if (d.text.empty()) findings.push_back("doc_id '" + d.doc_id + "': empty text");
  }
  for (const auto& [key, g] : c.gold) {
    const std::string tag = "doc_id '" + g.doc_id + "' qid " + std::string(to_string(g.qid));
    if (!ids.contains(g.doc_id)) findings.push_back("gold record references unknown " + tag);
    if (g.qid != Qid::Q2 && g.gold_answers.empty()) {
      findings.push_back(tag + ": empty gold answers for a non-nullable question");
    }
    std::set<std::string> seen;
    for (const auto& a : g.gold_answers) {
      if (!seen.insert(a).second) findings.push_back(tag + ": duplicate gold answer '" + a + "'");
    }
  }
  if (opts.fully_annotated) {
    for (const auto& d : c.documents) {
      for (Qid q : kAllQids) {
        if (!c.gold.contains({d.doc_id, q})) {
          findings.push_back("doc_id '" + d.doc_id + "' missing gold for " +
                             std::string(to_string(q)));
        }
      }
    }
  }
  for (const auto& [qid, spec] : c.question_specs) {
    try {
      validate(spec);
    } catch (const ValidationError& e) {
      findings.insert(findings.end(), e.findings().begin(), e.findings().end());
    }
  }
  if (!findings.empty()) {
    std::string what = "corpus validation failed:";
    for (const auto& f : findings) what += "\n  " + f;
    throw ValidationError(what, findings);
  }
}

void write_corpus(const Corpus& c, const fs::path& dir) {
  std::vector<json> docs;
  for (const auto& d : c.documents) docs.emplace_back(d);
  std::vector<json> gold;
  for (const auto& [key, g] : c.gold) gold.emplace_back(g);
  json questions = json::array();
  for (const auto& [qid, spec] : c.question_specs) questions.push_back(spec);
  write_text_file(dir / "documents.jsonl", jsonl(docs));
  write_text_file(dir / "gold.jsonl", jsonl(gold));
  write_text_file(dir / "questions.json", dump_pretty(questions));
}

std::string corpus_digest(const Corpus& c) {
  json j;
  j["documents"] = c.documents;
  json gold = json::array();
  for (const auto& [key, g] : c.gold) gold.push_back(g);
  j["gold"] = gold;
  json questions = json::array();
  for (const auto& [qid, spec] : c.question_specs) questions.push_back(spec);
  j["questions"] = questions;
  return sha256_hex(dump_canonical(j));
}

Corpus strip_corpus_citations(const Corpus& c, const CitationStripper& stripper) {
  Corpus out = c;
  for (auto& d : out.documents) d.text = text::Utf8Text(stripper.strip(d.text.str()));
  validate_corpus(out);
  return out;
}

std::size_t ValidationReport::count(Finding::Kind k) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [k](const Finding& f) { return f.kind == k; }));
}

ValidationReport validate_answer_set(const AnswerSet& a, const Corpus& c) {
  ValidationReport r;
  using K = Finding::Kind;
  const Document* doc = c.find(a.doc_id);
  if (doc == nullptr) r.findings.push_back({K::unknown_document, "unknown doc_id '" + a.doc_id + "'"});

  std::set<std::string> seen;
  for (const auto& ans : a.answers) {
    const std::string key = squad_normalize(ans.text);
    if (!seen.insert(key).second) {
      r.findings.push_back({K::duplicate_answer, "duplicate answer '" + ans.text + "'"});
    }
  }

  const auto spec_it = c.question_specs.find(a.qid);
  const bool nullable = spec_it != c.question_specs.end() ? spec_it->second.nullable
                                                          : default_question_spec(a.qid).nullable;
  if (!nullable && a.answers.empty()) {
    r.findings.push_back({K::empty_non_nullable, std::string(to_string(a.qid)) +
                                                     " is not nullable but has no answers"});
  }

  if (doc != nullptr) {
    for (const auto& ans : a.answers) {
      for (const auto& s : ans.provenance.spans) {
        const bool in_range = s.start < s.end && s.end <= doc->text.size();
        if (!in_range || doc->text.slice(s.start, s.end) != s.text) {
          r.findings.push_back({K::dangling_provenance,
                                "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                    ") '" + s.text + "' does not slice doc '" + a.doc_id + "'"});
        }
      }
    }
  }
  return r;
}

}  // namespace docpipe
