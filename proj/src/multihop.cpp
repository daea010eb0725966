#include "docpipe/multihop.hpp"

#include <algorithm>
#include <set>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/parallel.hpp"

namespace docpipe {

std::string subquestion_id(std::string_view entity) {
  return "sq-" + sha256_hex(entity).substr(0, 12);
}

std::vector<SubQuestion> make_subquestions(std::string_view tmpl,
                                           std::span<const std::string> bridges) {
  constexpr std::string_view placeholder = "{entity}";
  if (tmpl.find(placeholder) == std::string_view::npos) {
    throw PreconditionError("sub-question template must contain {entity}: '" + std::string(tmpl) +
                            "'");
  }
  std::set<std::string_view> seen;
  std::vector<SubQuestion> out;
  out.reserve(bridges.size());
  for (const auto& b : bridges) {
    if (!seen.insert(b).second) throw PreconditionError("duplicate bridge entity '" + b + "'");
    SubQuestion sq;
    sq.bridge_entity = b;
    sq.subquestion_id = subquestion_id(b);
    std::string text(tmpl);
    for (auto pos = text.find(placeholder); pos != std::string::npos;
         pos = text.find(placeholder, pos + b.size())) {
      text.replace(pos, placeholder.size(), b);
    }
    sq.text = std::move(text);
    out.push_back(std::move(sq));
  }
  return out;
}

std::vector<std::string> bridges_from(const AnswerSet& q1, std::optional<std::size_t> max_bridges) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& a : q1.answers) {
    if (max_bridges && out.size() >= *max_bridges) break;
    if (seen.insert(a.text).second) out.push_back(a.text);
  }
  return out;
}

MultihopResult answer_multihop(const Document& doc, const QuestionSpec& q4,
                               std::span<const std::string> bridges,
                               const backend::BackendClient& backend, const MultihopOptions& opts) {
  if (opts.topk_per_sub < 1) throw PreconditionError("topk_per_sub must be >= 1");
  std::vector<std::string> used(bridges.begin(), bridges.end());
  if (opts.max_bridges && used.size() > *opts.max_bridges) used.resize(*opts.max_bridges);
  if (used.empty()) {
    auto r = single_hop_baseline(doc, q4, backend, opts);
    r.fallback = true;
    return r;
  }

  MultihopResult r;
  r.subquestions = make_subquestions(opts.subquestion_template, used);
  std::vector<std::vector<Span>> per_sub(r.subquestions.size());
  parallel_for(r.subquestions.size(), opts.workers, [&](std::size_t i) {
    const SubQuestion& sq = r.subquestions[i];
    ExtractionResult ex;
    try {
      ex = extract_from_windows(doc, sq.text, false, backend, opts.topk_per_sub, opts.windowing);
    } catch (const Error& e) {
      throw StageError("multihop sub-question " + sq.subquestion_id + " ('" + sq.bridge_entity +
                           "') failed on doc '" + doc.doc_id + "': " + e.what(),
                       std::current_exception());
    }
    for (auto& s : ex.spans) s.subquestion_id = sq.subquestion_id;
    per_sub[i] = std::move(ex.spans);
  });
  for (auto& spans : per_sub) {
    r.pre_merge.insert(r.pre_merge.end(), std::make_move_iterator(spans.begin()),
                       std::make_move_iterator(spans.end()));
  }
  r.answers = refine_spans(doc, Qid::Q4, q4.nullable, r.pre_merge, opts.merge);
  return r;
}

MultihopResult single_hop_baseline(const Document& doc, const QuestionSpec& q4,
                                   const backend::BackendClient& backend,
                                   const MultihopOptions& opts) {
  MultihopResult r;
  ExtractionResult ex;
  try {
    ex = extract_from_windows(doc, q4.text, q4.nullable, backend, opts.baseline_topk, opts.windowing,
                              opts.workers);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("single-hop Q4 failed on doc '" + doc.doc_id + "': " + e.what(),
                     std::current_exception());
  }
  r.pre_merge = std::move(ex.spans);
  r.answers = refine_spans(doc, Qid::Q4, q4.nullable, r.pre_merge, opts.merge);
  return r;
}

}  // namespace docpipe
