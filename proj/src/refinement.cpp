#include "docpipe/refinement.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

namespace docpipe {

namespace {

Span fold_group(const Document& doc, std::span<const Span> spans,
                const std::vector<std::size_t>& members, std::size_t start, std::size_t end) {
  Span out;
  out.start = start;
  out.end = end;
  out.text = doc.text.slice(start, end);
  std::set<std::string> models;
  bool same_window = true;
  bool same_sub = true;
  const Span& first = spans[members.front()];
  for (std::size_t idx : members) {
    const Span& s = spans[idx];
    out.score = std::max(out.score, s.score);
    models.insert(s.model_id);
    same_window = same_window && s.window_id == first.window_id;
    same_sub = same_sub && s.subquestion_id == first.subquestion_id;
  }
  for (const auto& m : models) {
    if (!out.model_id.empty()) out.model_id += "+";
    out.model_id += m;
  }
  if (same_window) out.window_id = first.window_id;
  if (same_sub) out.subquestion_id = first.subquestion_id;
  return out;
}

std::pair<std::size_t, std::size_t> position_key(const Answer& a) {
  std::pair<std::size_t, std::size_t> best{SIZE_MAX, SIZE_MAX};
  for (const auto& s : a.provenance.spans) {
    if (s.score == a.score) best = std::min(best, std::pair{s.start, s.end});
  }
  return best;
}

}  // namespace

std::vector<MergedGroup> merge_span_groups(std::span<const Span> spans, const Document& doc,
                                           const MergePolicy& policy) {
  std::vector<MergedGroup> out;
  if (!policy.enabled) {
    for (std::size_t i = 0; i < spans.size(); ++i) out.push_back({spans[i], {i}});
    return out;
  }
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Span& x = spans[a];
    const Span& y = spans[b];
    return std::tuple(x.start, y.end, y.score) < std::tuple(y.start, x.end, x.score);
  });

  const auto gap = static_cast<long long>(std::max(policy.allow_adjacent_gap, 0));
  std::vector<std::size_t> members;
  std::size_t cur_start = 0;
  std::size_t cur_end = 0;
  auto flush = [&] {
    if (members.empty()) return;
    out.push_back({fold_group(doc, spans, members, cur_start, cur_end), members});
    members.clear();
  };
  for (std::size_t idx : order) {
    const Span& s = spans[idx];
    const bool joins = !members.empty() &&
                       static_cast<long long>(s.start) - static_cast<long long>(cur_end) <= gap;
    if (joins) {
      const bool nested = s.end <= cur_end;
      if (nested && !policy.containment_merge) continue;
      members.push_back(idx);
      cur_end = std::max(cur_end, s.end);
    } else {
      flush();
      members.push_back(idx);
      cur_start = s.start;
      cur_end = s.end;
    }
  }
  flush();
  return out;
}

std::vector<Span> merge_spans(std::span<const Span> spans, const Document& doc,
                              const MergePolicy& policy) {
  std::vector<Span> out;
  for (auto& g : merge_span_groups(spans, doc, policy)) out.push_back(std::move(g.span));
  return out;
}

std::string trim_special(std::string_view input) {
  const std::u32string cps = text::decode(input);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && !text::is_alnum(cps[b])) ++b;
  while (e > b) {
    const char32_t last = cps[e - 1];
    if (text::is_alnum(last)) break;
    char32_t opener = 0;
    if (last == U')') opener = U'(';
    if (last == U']') opener = U'[';
    if (last == U'}') opener = U'{';
    if (opener != 0) {
      int depth = 0;
      for (std::size_t i = b; i + 1 < e; ++i) {
        if (cps[i] == opener) ++depth;
        if (cps[i] == last && depth > 0) --depth;
      }
      if (depth > 0) break;
    }
    --e;
  }
  return text::encode(std::u32string_view(cps).substr(b, e - b));
}

std::string squad_normalize(std::string_view input) {
  std::u32string s = text::decode(input);
  for (auto& c : s) c = text::to_lower(c);
  std::erase_if(s, [](char32_t c) { return text::is_ascii_punct(c); });

  // Article removal with \b(a|an|the)\b semantics: a maximal word-character
  // run equal to an article becomes a single space.
  std::u32string no_articles;
  no_articles.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (!text::is_word_char(s[i])) {
      no_articles.push_back(s[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::is_word_char(s[j])) ++j;
    const std::u32string_view word(s.data() + i, j - i);
    if (word == U"a" || word == U"an" || word == U"the") {
      no_articles.push_back(U' ');
    } else {
      no_articles.append(word);
    }
    i = j;
  }
  return text::collapse_whitespace(text::encode(no_articles));
}

std::vector<std::string> dedup_answers(std::span<const std::string> answers) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& a : answers) {
    if (seen.insert(squad_normalize(a)).second) out.push_back(a);
  }
  return out;
}

void sort_answers(std::vector<Answer>& answers) {
  std::stable_sort(answers.begin(), answers.end(), [](const Answer& x, const Answer& y) {
    if (x.score != y.score) return x.score > y.score;
    const auto kx = position_key(x);
    const auto ky = position_key(y);
    if (kx != ky) return kx < ky;
    return x.text < y.text;
  });
}

void dedup_answer_list(std::vector<Answer>& answers) {
  std::vector<Answer> kept;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& a : answers) {
    const std::string key = squad_normalize(a.text);
    const auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, kept.size());
      kept.push_back(std::move(a));
      continue;
    }
    Answer& k = kept[it->second];
    auto add_variant = [&](const std::string& v) {
      if (v != k.text && std::find(k.variants.begin(), k.variants.end(), v) == k.variants.end()) {
        k.variants.push_back(v);
      }
    };
    add_variant(a.text);
    for (const auto& v : a.variants) add_variant(v);
    for (auto& s : a.provenance.spans) {
      if (std::find(k.provenance.spans.begin(), k.provenance.spans.end(), s) ==
          k.provenance.spans.end()) {
        k.provenance.spans.push_back(std::move(s));
      }
    }
    for (auto& g : a.provenance.generation_ids) {
      if (std::find(k.provenance.generation_ids.begin(), k.provenance.generation_ids.end(), g) ==
          k.provenance.generation_ids.end()) {
        k.provenance.generation_ids.push_back(std::move(g));
      }
    }
    k.score = std::max(k.score, a.score);
  }
  answers = std::move(kept);
}

AnswerSet refine_spans(const Document& doc, Qid qid, bool nullable, std::span<const Span> spans,
                       const MergePolicy& policy) {
  AnswerSet out;
  out.doc_id = doc.doc_id;
  out.qid = qid;
  for (const auto& g : merge_span_groups(spans, doc, policy)) {
    Answer a;
    a.text = trim_special(g.span.text);
    if (a.text.empty()) continue;
    a.score = g.span.score;
    for (std::size_t idx : g.members) a.provenance.spans.push_back(spans[idx]);
    out.answers.push_back(std::move(a));
  }
  sort_answers(out.answers);
  dedup_answer_list(out.answers);
  out.empty_means_unanswerable = nullable && out.answers.empty();
  out.forced_empty = !nullable && out.answers.empty();
  return out;
}

}  // namespace docpipe
