#include "docpipe/ensemble.hpp"

#include <algorithm>
#include <set>

#include "docpipe/error.hpp"
#include "docpipe/refinement.hpp"

namespace docpipe {

EnsembleSpec default_ensemble_spec(Qid q) {
  switch (q) {
    case Qid::Q1: return {q, {"deberta", "albert"}, "Combined"};
    case Qid::Q2: return {q, {"electra", "roberta"}, "Combined"};
    case Qid::Q3: return {q, {"deberta", "albert"}, "Combined"};
    case Qid::Q4: break;
  }
  return {q, {}, "Combined"};
}

void validate(const EnsembleSpec& spec) {
  const std::string where = "ensemble." + std::string(to_string(spec.qid));
  if (spec.member_model_ids.size() < 2) throw ValidationError(where + " needs at least two members");
  std::set<std::string> seen;
  for (const auto& m : spec.member_model_ids) {
    if (m.empty()) throw ValidationError(where + " has an empty member id");
    if (!seen.insert(m).second) throw ValidationError(where + " repeats member '" + m + "'");
  }
  if (spec.label.empty()) throw ValidationError(where + " needs a label");
}

AnswerSet combine(std::span<const AnswerSet> sets) {
  if (sets.empty()) throw PreconditionError("combine needs at least one answer set");
  AnswerSet out;
  out.doc_id = sets.front().doc_id;
  out.qid = sets.front().qid;
  struct Ranked {
    std::size_t member;
    Answer answer;
  };
  std::vector<Ranked> pool;
  for (std::size_t m = 0; m < sets.size(); ++m) {
    if (sets[m].doc_id != out.doc_id || sets[m].qid != out.qid) {
      throw PreconditionError("combine: set " + std::to_string(m) + " is (" + sets[m].doc_id + ", " +
                              std::string(to_string(sets[m].qid)) + "), expected (" + out.doc_id +
                              ", " + std::string(to_string(out.qid)) + ")");
    }
    for (const auto& a : sets[m].answers) pool.push_back({m, a});
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
    if (a.answer.score != b.answer.score) return a.answer.score > b.answer.score;
    if (a.member != b.member) return a.member < b.member;
    return a.answer.text < b.answer.text;
  });
  for (auto& r : pool) out.answers.push_back(std::move(r.answer));
  dedup_answer_list(out.answers);

  const bool all_unanswerable = std::all_of(sets.begin(), sets.end(), [](const AnswerSet& s) {
    return s.empty_means_unanswerable;
  });
  out.empty_means_unanswerable = out.answers.empty() && all_unanswerable;
  out.forced_empty = out.answers.empty() && !all_unanswerable;
  return out;
}

}  // namespace docpipe
