#include "docpipe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/refinement.hpp"
#include "docpipe/text.hpp"

namespace docpipe {

void validate(const MetricConfig& cfg) {
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) {
    throw ValidationError("metrics.tau must be in (0, 1], got " + std::to_string(cfg.tau));
  }
  if (cfg.embed_batch_size < 1) throw ValidationError("metrics.embed_batch_size must be >= 1");
}

std::vector<std::string> squad_tokens(std::string_view s) {
  return text::split_whitespace(squad_normalize(s));
}

double f1_token(std::string_view gold, std::string_view pred) {
  auto g = squad_tokens(gold);
  auto p = squad_tokens(pred);
  if (g.empty() && p.empty()) return 1.0;
  if (g.empty() || p.empty()) return 0.0;
  std::sort(g.begin(), g.end());
  std::sort(p.begin(), p.end());
  std::vector<std::string> common;
  std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double precision = static_cast<double>(common.size()) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common.size()) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

bool exact_match(std::string_view gold, std::string_view pred) {
  return squad_normalize(gold) == squad_normalize(pred);
}

bool mentions_match(std::string_view gold, std::span<const std::string> preds,
                    const MetricConfig& cfg) {
  auto fold = [&](std::string_view s) {
    return cfg.mentions_case_sensitive ? std::string(s) : text::to_lower(s);
  };
  const std::string g = fold(gold);
  const std::string g_compact = text::remove_whitespace(g);

  // Rule a: "long form (short form)".
  std::string before, inside;
  const std::string g_trim = text::trim(g);
  if (g_trim.size() >= 2 && g_trim.back() == ')') {
    const std::size_t open = g_trim.rfind('(');
    if (open != std::string::npos) {
      before = text::trim(std::string_view(g_trim).substr(0, open));
      inside = text::trim(std::string_view(g_trim).substr(open + 1, g_trim.size() - open - 2));
    }
  }

  for (const auto& raw : preds) {
    const std::string p = fold(raw);
    if (p.find(g) != std::string::npos) return true;
    const std::string p_trim = text::trim(p);
    if (!before.empty() && p_trim == before) return true;
    if (!inside.empty() && p_trim == inside) return true;
    if (text::remove_whitespace(p).find(g_compact) != std::string::npos) return true;
  }
  return false;
}

EmbeddingCache::EmbeddingCache(std::shared_ptr<const backend::BackendClient> backend,
                               std::size_t batch_size)
    : backend_(std::move(backend)), batch_size_(std::max<std::size_t>(1, batch_size)) {
  if (!backend_) throw PreconditionError("EmbeddingCache needs an embed backend");
}

void EmbeddingCache::prefetch(std::span<const std::string> texts) {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mu_);
    std::set<std::string> queued;
    for (const auto& t : texts) {
      if (!cache_.contains(t) && queued.insert(t).second) missing.push_back(t);
    }
  }
  for (std::size_t i = 0; i < missing.size(); i += batch_size_) {
    const std::size_t n = std::min(batch_size_, missing.size() - i);
    std::span<const std::string> batch(missing.data() + i, n);
    std::vector<backend::EmbeddingVector> vecs;
    try {
      vecs = backend_->embed(batch);
    } catch (const Error& e) {
      throw EvaluationError("embedding failed (" + backend_->model_id() + "): " + e.what());
    }
    std::lock_guard lock(mu_);
    for (std::size_t k = 0; k < n; ++k) {
      cache_.try_emplace(batch[k], std::make_unique<backend::EmbeddingVector>(std::move(vecs[k])));
    }
  }
}

const backend::EmbeddingVector& EmbeddingCache::get(const std::string& text) {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(text); it != cache_.end()) return *it->second;
  }
  prefetch(std::span<const std::string>(&text, 1));
  std::lock_guard lock(mu_);
  return *cache_.at(text);
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

double max_similarity(const std::string& gold, std::span<const std::string> preds,
                      EmbeddingCache& cache) {
  if (preds.empty()) return -1.0;
  std::vector<std::string> all{gold};
  all.insert(all.end(), preds.begin(), preds.end());
  cache.prefetch(all);
  const auto& g = cache.get(gold);
  double best = -1.0;
  for (const auto& p : preds) {
    try {
      best = std::max(best, backend::cosine(g, cache.get(p)));
    } catch (const EvaluationError&) {
      throw;
    } catch (const Error& e) {
      throw EvaluationError(e.what());
    }
  }
  return best;
}

bool similar_match(const std::string& gold, std::span<const std::string> preds,
                   EmbeddingCache& cache, const MetricConfig& cfg) {
  return max_similarity(gold, preds, cache) >= cfg.tau;
}

DocScores score_document(std::span<const std::string> gold, const AnswerSet& preds,
                         EmbeddingCache* cache, const MetricConfig& cfg) {
  const std::vector<std::string> forms = preds.surface_forms();
  if (gold.empty()) {
    const double v = preds.answers.empty() ? 1.0 : 0.0;
    return {v, v, v, v};
  }
  DocScores s;
  if (forms.empty()) return s;
  if (!cache) throw EvaluationError("Similar Match needs an embedding backend");
  double f1_sum = 0.0;
  std::size_t em = 0, smat = 0, ment = 0;
  for (const auto& g : gold) {
    double best = 0.0;
    bool exact = false;
    for (const auto& p : forms) {
      best = std::max(best, f1_token(g, p));
      exact = exact || exact_match(g, p);
    }
    f1_sum += best;
    em += exact;
    smat += similar_match(g, forms, *cache, cfg);
    ment += mentions_match(g, forms, cfg);
  }
  const double n = static_cast<double>(gold.size());
  s.f1 = f1_sum / n;
  s.em = static_cast<double>(em) / n;
  s.smat = static_cast<double>(smat) / n;
  s.mentions = static_cast<double>(ment) / n;
  return s;
}

DocScores score_document(const GoldAnnotation& gold, const AnswerSet& preds, EmbeddingCache* cache,
                         const MetricConfig& cfg) {
  if (gold.qid != preds.qid || gold.doc_id != preds.doc_id) {
    throw PreconditionError("score_document: gold is (" + gold.doc_id + ", " +
                            std::string(to_string(gold.qid)) + ") but predictions are (" +
                            preds.doc_id + ", " + std::string(to_string(preds.qid)) + ")");
  }
  return score_document(gold.gold_answers, preds, cache, cfg);
}

const SystemScores* QuestionScores::find(std::string_view label) const {
  for (const auto& s : systems) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

const QuestionScores* MetricReport::find(Qid q) const {
  for (const auto& s : questions) {
    if (s.qid == q) return &s;
  }
  return nullptr;
}

MetricReport aggregate(std::span<const ScoredDoc> docs, json metadata) {
  if (docs.empty()) throw EvaluationError("aggregate needs at least one scored document");
  MetricReport r;
  r.metadata = std::move(metadata);
  for (Qid q : kAllQids) {
    QuestionScores qs;
    qs.qid = q;
    for (const auto& d : docs) {
      if (d.qid != q) continue;
      auto it = std::find_if(qs.systems.begin(), qs.systems.end(),
                             [&](const SystemScores& s) { return s.label == d.system; });
      if (it == qs.systems.end()) {
        qs.systems.push_back(SystemScores{d.system, {}, {}});
        it = std::prev(qs.systems.end());
      }
      if (!it->per_doc.emplace(d.doc_id, d.scores).second) {
        throw EvaluationError("duplicate score for (" + std::string(to_string(q)) + ", " + d.system +
                              ", " + d.doc_id + ")");
      }
    }
    for (auto& s : qs.systems) {
      DocScores sum;
      for (const auto& [doc, v] : s.per_doc) {
        sum.f1 += v.f1;
        sum.em += v.em;
        sum.smat += v.smat;
        sum.mentions += v.mentions;
      }
      const double n = static_cast<double>(s.per_doc.size());
      s.corpus = {sum.f1 / n, sum.em / n, sum.smat / n, sum.mentions / n};
    }
    if (!qs.systems.empty()) r.questions.push_back(std::move(qs));
  }
  return r;
}

namespace {

json scores_json(const DocScores& s) {
  return {{"f1", s.f1}, {"em", s.em}, {"smat", s.smat}, {"mentions", s.mentions}};
}

DocScores scores_from(const json& j) {
  return {j.at("f1").get<double>(), j.at("em").get<double>(), j.at("smat").get<double>(),
          j.at("mentions").get<double>()};
}

}  // namespace

json to_json(const MetricReport& r) {
  json qs = json::array();
  for (const auto& q : r.questions) {
    json systems = json::array();
    for (const auto& s : q.systems) {
      json per_doc = json::object();
      for (const auto& [doc, v] : s.per_doc) per_doc[doc] = scores_json(v);
      systems.push_back({{"label", s.label},
                         {"n_docs", s.per_doc.size()},
                         {"corpus", scores_json(s.corpus)},
                         {"per_doc", per_doc}});
    }
    qs.push_back({{"qid", to_string(q.qid)}, {"systems", systems}});
  }
  return {{"metadata", r.metadata}, {"questions", qs}};
}

MetricReport metric_report_from_json(const json& j) {
  try {
    MetricReport r;
    r.metadata = j.value("metadata", json::object());
    for (const auto& qj : j.at("questions")) {
      QuestionScores q;
      q.qid = parse_qid(qj.at("qid").get<std::string>());
      for (const auto& sj : qj.at("systems")) {
        SystemScores s;
        s.label = sj.at("label").get<std::string>();
        s.corpus = scores_from(sj.at("corpus"));
        for (const auto& [doc, v] : sj.at("per_doc").items()) s.per_doc.emplace(doc, scores_from(v));
        q.systems.push_back(std::move(s));
      }
      r.questions.push_back(std::move(q));
    }
    return r;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed metric report: ") + e.what());
  }
}

}  // namespace docpipe
