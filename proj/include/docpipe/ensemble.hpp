#pragma once

#include <span>
#include <string>
#include <vector>

#include "docpipe/types.hpp"

namespace docpipe {

struct EnsembleSpec {
  Qid qid = Qid::Q1;
  std::vector<std::string> member_model_ids;
  std::string label = "Combined";

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// Q1 = {deberta, albert}, Q2 = {electra, roberta}, Q3 = {deberta, albert}.
/// Q4 has no default ensemble and yields an empty member list.
EnsembleSpec default_ensemble_spec(Qid q);
/// Throws ValidationError when there are fewer than two or repeated members.
void validate(const EnsembleSpec& spec);

/// Union of the members' answers, ordered by score descending, then member
/// order, then text, and deduplicated under squad_normalize (folded
/// duplicates keep their surface form as a variant and their provenance).
/// Throws PreconditionError when the sets disagree on (doc_id, qid).
AnswerSet combine(std::span<const AnswerSet> sets);

}  // namespace docpipe
