#include "docpipe/types.hpp"

#include <algorithm>

#include "docpipe/error.hpp"

namespace docpipe {

std::string_view to_string(Qid q) noexcept {
  switch (q) {
    case Qid::Q1: return "Q1";
    case Qid::Q2: return "Q2";
    case Qid::Q3: return "Q3";
    case Qid::Q4: return "Q4";
  }
  return "?";
}

Qid parse_qid(std::string_view s) {
  if (s.size() == 2 && (s[0] == 'Q' || s[0] == 'q')) {
    switch (s[1]) {
      case '1': return Qid::Q1;
      case '2': return Qid::Q2;
      case '3': return Qid::Q3;
      case '4': return Qid::Q4;
      default: break;
    }
  }
  throw ValidationError("unknown question id '" + std::string(s) + "'");
}

std::string_view to_string(AnswerType t) noexcept {
  return t == AnswerType::entity ? "entity" : "phrase";
}

AnswerType parse_answer_type(std::string_view s) {
  if (s == "entity") return AnswerType::entity;
  if (s == "phrase") return AnswerType::phrase;
  throw ValidationError("unknown answer_type '" + std::string(s) + "'");
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::extract: return "extract";
    case Stage::refine: return "refine";
    case Stage::rag: return "rag";
    case Stage::multihop: return "multihop";
    case Stage::ensemble: return "ensemble";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::extract, Stage::refine, Stage::rag, Stage::multihop, Stage::ensemble}) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage '" + std::string(s) + "'");
}

bool QuestionSpec::has_stage(Stage s) const noexcept {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

QuestionSpec default_question_spec(Qid q) {
  using enum Stage;
  switch (q) {
    case Qid::Q1:
      return {Qid::Q1, "What machine learning or natural language processing techniques were used?",
              AnswerType::entity, false, 20, true, {extract, refine, rag, ensemble}};
    case Qid::Q2:
      return {Qid::Q2,
              "What software was used to perform machine learning or natural language processing "
              "techniques?",
              AnswerType::entity, true, 5, false, {extract, refine, rag, ensemble}};
    case Qid::Q3:
      return {Qid::Q3,
              "What was the research question that machine learning or natural language processing "
              "techniques were used to answer?",
              AnswerType::phrase, false, 5, true, {extract, refine, ensemble}};
    case Qid::Q4:
      return {Qid::Q4,
              "What were machine learning or natural language processing techniques used for?",
              AnswerType::phrase, false, 10, true, {multihop, refine}};
  }
  throw PreconditionError("unreachable qid");
}

std::map<Qid, QuestionSpec> default_question_specs() {
  std::map<Qid, QuestionSpec> out;
  for (Qid q : kAllQids) out.emplace(q, default_question_spec(q));
  return out;
}

void validate(const QuestionSpec& spec) {
  std::vector<std::string> findings;
  const std::string qid(to_string(spec.qid));
  if (spec.topk < 1) findings.push_back(qid + ": topk must be >= 1");
  if (spec.text.empty()) findings.push_back(qid + ": question text is empty");
  if (spec.stages.empty()) findings.push_back(qid + ": stage list is empty");
  if (spec.qid == Qid::Q4 && !spec.has_stage(Stage::multihop)) {
    findings.push_back("Q4: stage list must contain multihop");
  }
  if (spec.qid != Qid::Q4 && spec.has_stage(Stage::multihop)) {
    findings.push_back(qid + ": multihop is only defined for Q4");
  }
  if (spec.has_stage(Stage::rag) && spec.answer_type != AnswerType::entity) {
    findings.push_back(qid + ": rag requires an entity answer type");
  }
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.stages.size(); ++j) {
      if (spec.stages[i] == spec.stages[j]) {
        findings.push_back(qid + ": duplicate stage " + std::string(to_string(spec.stages[i])));
      }
    }
  }
  if (!findings.empty()) throw ValidationError("invalid question spec " + qid, findings);
}

std::vector<std::string> AnswerSet::texts() const {
  std::vector<std::string> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.push_back(a.text);
  return out;
}

std::vector<std::string> AnswerSet::surface_forms() const {
  std::vector<std::string> out = texts();
  for (const auto& a : answers) out.insert(out.end(), a.variants.begin(), a.variants.end());
  return out;
}

const Document* Corpus::find(std::string_view doc_id) const noexcept {
  for (const auto& d : documents) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

const Document& Corpus::document(std::string_view doc_id) const {
  if (const auto* d = find(doc_id)) return *d;
  throw PreconditionError("unknown document '" + std::string(doc_id) + "'");
}

const GoldAnnotation* Corpus::find_gold(std::string_view doc_id, Qid q) const {
  const auto it = gold.find({std::string(doc_id), q});
  return it == gold.end() ? nullptr : &it->second;
}

const QuestionSpec& Corpus::spec(Qid q) const {
  const auto it = question_specs.find(q);
  if (it == question_specs.end()) {
    throw PreconditionError("corpus has no question spec for " + std::string(to_string(q)));
  }
  return it->second;
}

}  // namespace docpipe
