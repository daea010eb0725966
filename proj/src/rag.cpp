#include "docpipe/rag.hpp"

#include <algorithm>
#include <sstream>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/refinement.hpp"

namespace docpipe {

std::string_view to_string(EntityKind k) noexcept {
  return k == EntityKind::techniques ? "techniques" : "software";
}

EntityKind parse_entity_kind(std::string_view s) {
  if (s == "techniques") return EntityKind::techniques;
  if (s == "software") return EntityKind::software;
  throw ValidationError("unknown entity kind '" + std::string(s) + "'");
}

EntityKind entity_kind_for(Qid q) {
  if (q == Qid::Q1) return EntityKind::techniques;
  if (q == Qid::Q2) return EntityKind::software;
  throw PreconditionError("rag is defined for Q1 and Q2 only, not " + std::string(to_string(q)));
}

std::string default_instruction(EntityKind kind) {
  if (kind == EntityKind::techniques) {
    return "The evidence below was extracted automatically from a research paper. List each "
           "distinct machine learning or natural language processing technique mentioned in the "
           "evidence, one per line, using its standard name.";
  }
  return "The evidence below was extracted automatically from a research paper. List each "
         "distinct software package, library or tool used for machine learning or natural "
         "language processing that is mentioned in the evidence, one per line, using its standard "
         "name. Answer 'none' if no software is mentioned.";
}

namespace {

constexpr std::string_view kDefaultTemplate = "{instruction}\n\nEvidence:\n{evidence}\n\nAnswer:\n";

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string strip_list_marker(const std::string& line) {
  std::size_t i = 0;
  if (i < line.size() && line[i] == '(') {
    std::size_t j = i + 1;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i + 1 && j < line.size() && line[j] == ')') return line.substr(j + 1);
  }
  std::size_t j = 0;
  while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
  if (j > 0 && j < line.size() && (line[j] == '.' || line[j] == ')') &&
      (j + 1 == line.size() || line[j + 1] == ' ' || line[j + 1] == '\t')) {
    return line.substr(j + 1);
  }
  for (std::string_view bullet : {"-", "*", "+", "•", "–"}) {
    if (line.starts_with(bullet) &&
        (line.size() == bullet.size() || line[bullet.size()] == ' ' || line[bullet.size()] == '\t')) {
      return line.substr(bullet.size());
    }
  }
  return line;
}

bool contains_ci(const std::string& hay, const std::string& needle) {
  return text::to_lower(hay).find(text::to_lower(needle)) != std::string::npos;
}

RagResult run(const Document& doc, const QuestionSpec& q, std::vector<std::string> evidence,
              std::span<const Span> pool, const backend::BackendClient& generator,
              const RagOptions& opts) {
  const EntityKind kind = entity_kind_for(q.qid);
  RagResult r;
  r.answers.doc_id = doc.doc_id;
  r.answers.qid = q.qid;
  std::erase_if(evidence, [](const std::string& e) { return text::trim(e).empty(); });
  if (evidence.empty()) {
    r.answers.empty_means_unanswerable = q.nullable;
    r.answers.forced_empty = !q.nullable;
    return r;
  }
  r.prompt = build_entity_prompt(kind, evidence, opts);
  try {
    r.generation = generator.generate(r.prompt->rendered, opts.max_new_tokens, opts.temperature);
  } catch (const Error& e) {
    throw StageError("rag generation failed on doc '" + doc.doc_id + "' (" + generator.model_id() +
                         "): " + e.what(),
                     std::current_exception());
  }
  r.generation_id = "gen:" + sha256_hex(generator.model_id() + "\n" + r.prompt->rendered).substr(0, 16);

  std::vector<std::string> parsed;
  try {
    parsed = parse_entity_list(r.generation, q.nullable);
  } catch (const StageError& e) {
    throw StageError("doc '" + doc.doc_id + "' " + std::string(to_string(q.qid)) + ": " + e.what());
  }
  for (auto& text : parsed) {
    Answer a;
    a.text = std::move(text);
    for (const auto& s : pool) {
      if (contains_ci(s.text, a.text) || contains_ci(a.text, s.text)) {
        if (std::find(a.provenance.spans.begin(), a.provenance.spans.end(), s) ==
            a.provenance.spans.end()) {
          a.provenance.spans.push_back(s);
          a.score = std::max(a.score, s.score);
        }
      }
    }
    if (a.provenance.spans.empty()) a.provenance.generation_ids.push_back(r.generation_id);
    r.answers.answers.push_back(std::move(a));
  }
  r.answers.empty_means_unanswerable = r.answers.answers.empty();
  return r;
}

}  // namespace

void validate(const RagOptions& opts) {
  for (const auto& [kind, tmpl] : opts.templates) {
    if (tmpl.find("{evidence}") == std::string::npos) {
      throw ValidationError("rag.template." + std::string(to_string(kind)) +
                            " must contain the {evidence} placeholder");
    }
  }
  if (opts.max_new_tokens < 1) throw ValidationError("rag.max_new_tokens must be >= 1");
  if (!(opts.temperature >= 0.0)) throw ValidationError("rag.temperature must be >= 0");
}

RagPrompt build_entity_prompt(EntityKind kind, std::span<const std::string> raw_answers,
                              const RagOptions& opts) {
  if (raw_answers.empty()) throw PreconditionError("build_entity_prompt needs at least one answer");
  RagPrompt p;
  p.kind = kind;
  p.instruction = default_instruction(kind);
  std::string numbered;
  for (const auto& raw : raw_answers) {
    p.evidence.push_back(text::collapse_whitespace(raw));
    if (!numbered.empty()) numbered += "\n";
    numbered += std::to_string(p.evidence.size()) + ". " + p.evidence.back();
  }
  const auto it = opts.templates.find(kind);
  std::string rendered(it != opts.templates.end() ? it->second : std::string(kDefaultTemplate));
  replace_all(rendered, "{instruction}", p.instruction);
  replace_all(rendered, "{evidence}", numbered);
  p.rendered = std::move(rendered);
  return p;
}

bool is_none_marker(std::string_view s) {
  std::string t = text::to_lower(text::trim(s));
  while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '\'' || t.back() == '"')) {
    t.pop_back();
  }
  while (!t.empty() && (t.front() == '\'' || t.front() == '"')) t.erase(t.begin());
  static const std::vector<std::string> markers = {
      "none", "n/a", "null", "nothing", "no software", "no software mentioned",
      "no software is mentioned", "none mentioned", "not mentioned", "no answer"};
  return std::find(markers.begin(), markers.end(), t) != markers.end();
}

std::vector<std::string> parse_entity_list(std::string_view generation, bool nullable) {
  std::vector<std::string> entries;
  bool saw_none = is_none_marker(generation);
  if (!saw_none) {
    std::istringstream in{std::string(generation)};
    std::string line;
    while (std::getline(in, line)) {
      const std::string body = text::trim(strip_list_marker(text::trim(line)));
      if (body.empty()) continue;
      if (is_none_marker(body)) {
        saw_none = true;
        continue;
      }
      std::string cleaned = trim_special(body);
      if (!cleaned.empty()) entries.push_back(std::move(cleaned));
    }
  }
  entries = dedup_answers(entries);
  if (entries.empty()) {
    if (nullable && saw_none) return {};
    throw StageError("empty categorized answer");
  }
  return entries;
}

RagResult rag_enhance(const Document& doc, const QuestionSpec& q, std::span<const Span> raw,
                      const backend::BackendClient& generator, const RagOptions& opts) {
  std::vector<std::string> evidence;
  for (const auto& s : raw) evidence.push_back(s.text);
  return run(doc, q, std::move(evidence), raw, generator, opts);
}

RagResult rag_enhance(const Document& doc, const QuestionSpec& q, const AnswerSet& refined,
                      const backend::BackendClient& generator, const RagOptions& opts) {
  std::vector<Span> pool;
  for (const auto& a : refined.answers) {
    pool.insert(pool.end(), a.provenance.spans.begin(), a.provenance.spans.end());
  }
  return run(doc, q, refined.texts(), pool, generator, opts);
}

}  // namespace docpipe
