#include "docpipe/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <set>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"

namespace docpipe {

namespace {

// Strict object reader: every key must be consumed, leftovers are findings.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& findings)
      : j_(j), path_(std::move(path)), findings_(findings) {
    if (!j_.is_object()) {
      findings_.push_back(path_ + ": expected an object");
      ok_ = false;
    }
  }
  ~Reader() {
    if (!ok_) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) findings_.push_back(path_ + key_sep() + k + ": unknown key");
    }
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    if (!ok_ || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      findings_.push_back(where(key) + ": wrong type (" + std::string(v->type_name()) + ")");
    }
  }

  std::string where(const std::string& key) const { return path_ + key_sep() + key; }

 private:
  std::string key_sep() const { return path_.empty() ? "" : "."; }
  const json& j_;
  std::string path_;
  std::vector<std::string>& findings_;
  std::set<std::string> used_;
  bool ok_ = true;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

std::string resolve_endpoint(const std::filesystem::path& base, const std::string& endpoint) {
  constexpr std::string_view prefix = "replay:";
  if (endpoint.starts_with(prefix)) {
    return std::string(prefix) + resolve(base, endpoint.substr(prefix.size())).string();
  }
  return endpoint;
}

BackendConfig read_backend(const json& j, const std::string& path, const std::filesystem::path& base,
                           std::vector<std::string>& findings, BackendConfig b = {}) {
  Reader r(j, path, findings);
  r.read("model_id", b.model_id);
  r.read("endpoint", b.endpoint);
  r.read("timeout_ms", b.timeout_ms);
  r.read("max_context", b.max_context);
  r.read("concurrency", b.concurrency);
  b.endpoint = resolve_endpoint(base, b.endpoint);
  return b;
}

json backend_json(const BackendConfig& b) {
  return {{"model_id", b.model_id},
          {"endpoint", b.endpoint},
          {"timeout_ms", b.timeout_ms},
          {"max_context", b.max_context},
          {"concurrency", b.concurrency}};
}

void read_question(const json& j, const std::string& path, QuestionSpec& q,
                   std::vector<std::string>& findings) {
  Reader r(j, path, findings);
  r.read("text", q.text);
  r.read("topk", q.topk);
  r.read("nullable", q.nullable);
  r.read("merge_enabled", q.merge_enabled);
  if (const json* v = r.get("answer_type")) {
    try {
      q.answer_type = parse_answer_type(v->get<std::string>());
    } catch (const std::exception& e) {
      findings.push_back(r.where("answer_type") + ": " + e.what());
    }
  }
  if (const json* v = r.get("stages")) {
    try {
      q.stages.clear();
      for (const auto& s : *v) q.stages.push_back(parse_stage(s.get<std::string>()));
    } catch (const std::exception& e) {
      findings.push_back(r.where("stages") + ": " + e.what());
    }
  }
}

}  // namespace

backend::BackendDescriptor BackendConfig::descriptor(backend::Capability cap) const {
  backend::BackendDescriptor d;
  d.model_id = model_id;
  d.capability = cap;
  d.endpoint = backend::Endpoint::parse(endpoint);
  d.timeout = std::chrono::milliseconds(timeout_ms);
  d.max_context = max_context;
  d.concurrency = concurrency;
  return d;
}

std::vector<std::string> PipelineConfig::extractive_ids() const {
  std::vector<std::string> ids;
  for (const auto& b : extractive) ids.push_back(b.model_id);
  return ids;
}

const BackendConfig* PipelineConfig::find_extractive(const std::string& model_id) const {
  for (const auto& b : extractive) {
    if (b.model_id == model_id) return &b;
  }
  return nullptr;
}

PipelineConfig default_config() {
  PipelineConfig c;
  const std::string endpoint = "http://127.0.0.1:8000";
  for (const char* id : {"deberta", "albert", "electra", "roberta", "bert"}) {
    c.extractive.push_back(BackendConfig{id, endpoint});
  }
  c.generate = BackendConfig{"llama-3-8b", endpoint, 120000};
  c.embed = BackendConfig{"e5-mistral-7b-instruct", endpoint};
  c.questions = default_question_specs();
  for (Qid q : {Qid::Q1, Qid::Q2, Qid::Q3}) c.ensembles[q] = default_ensemble_spec(q);
  c.q4.baseline_topk = c.questions.at(Qid::Q4).topk;
  return c;
}

PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c = default_config();
  std::vector<std::string> findings;
  {
    Reader root(j, "", findings);
    if (const json* b = root.get("backends")) {
      Reader rb(*b, "backends", findings);
      if (const json* ex = rb.get("extractive")) {
        if (!ex->is_array()) {
          findings.push_back("backends.extractive: expected an array");
        } else {
          c.extractive.clear();
          for (std::size_t i = 0; i < ex->size(); ++i) {
            c.extractive.push_back(read_backend(
                (*ex)[i], "backends.extractive[" + std::to_string(i) + "]", base_dir, findings));
          }
        }
      }
      if (const json* g = rb.get("generate")) {
        c.generate = read_backend(*g, "backends.generate", base_dir, findings, c.generate);
      }
      if (const json* e = rb.get("embed")) {
        c.embed = read_backend(*e, "backends.embed", base_dir, findings, c.embed);
      }
    }
    if (const json* m = root.get("mock")) {
      Reader rm(*m, "mock", findings);
      rm.read("seed", c.mock.seed);
      std::string table;
      rm.read("table", table);
      c.mock.table = resolve(base_dir, table);
    }
    if (const json* qs = root.get("questions")) {
      Reader rq(*qs, "questions", findings);
      for (Qid q : kAllQids) {
        const std::string key(to_string(q));
        if (const json* v = rq.get(key)) read_question(*v, "questions." + key, c.questions[q], findings);
      }
    }
    if (const json* w = root.get("windowing")) {
      Reader rw(*w, "windowing", findings);
      rw.read("window_chars", c.windowing.window_chars);
      rw.read("stride_chars", c.windowing.stride_chars);
    }
    if (const json* m = root.get("merge")) {
      Reader rm(*m, "merge", findings);
      rm.read("allow_adjacent_gap", c.merge.allow_adjacent_gap);
      rm.read("containment_merge", c.merge.containment_merge);
    }
    if (const json* rg = root.get("rag")) {
      Reader rr(*rg, "rag", findings);
      rr.read("max_new_tokens", c.rag.max_new_tokens);
      rr.read("temperature", c.rag.temperature);
      if (const json* t = rr.get("template")) {
        Reader rt(*t, "rag.template", findings);
        for (EntityKind k : {EntityKind::techniques, EntityKind::software}) {
          std::string tmpl;
          rt.read(std::string(to_string(k)), tmpl);
          if (!tmpl.empty()) c.rag.templates[k] = tmpl;
        }
      }
    }
    bool baseline_given = false;
    if (const json* q4 = root.get("q4")) {
      Reader r4(*q4, "q4", findings);
      r4.read("template", c.q4.subquestion_template);
      r4.read("topk_per_sub", c.q4.topk_per_sub);
      r4.read("topk_sweep", c.q4.topk_sweep);
      baseline_given = q4->is_object() && q4->contains("baseline_topk");
      r4.read("baseline_topk", c.q4.baseline_topk);
      if (const json* mb = r4.get("max_bridges"); mb && !mb->is_null()) {
        std::size_t n = 0;
        r4.read("max_bridges", n);
        c.q4.max_bridges = n;
      }
    }
    if (baseline_given) {
      c.questions[Qid::Q4].topk = c.q4.baseline_topk;
    } else {
      c.q4.baseline_topk = c.questions[Qid::Q4].topk;
    }
    if (const json* e = root.get("ensemble")) {
      Reader re(*e, "ensemble", findings);
      for (Qid q : kAllQids) {
        const std::string key(to_string(q));
        const json* v = re.get(key);
        if (!v) continue;
        Reader rs(*v, "ensemble." + key, findings);
        EnsembleSpec spec = c.ensembles.contains(q) ? c.ensembles[q] : default_ensemble_spec(q);
        rs.read("members", spec.member_model_ids);
        rs.read("label", spec.label);
        if (spec.member_model_ids.empty()) {
          c.ensembles.erase(q);
        } else {
          c.ensembles[q] = spec;
        }
      }
    }
    if (const json* m = root.get("metrics")) {
      Reader rm(*m, "metrics", findings);
      rm.read("tau", c.metrics.tau);
      rm.read("mentions_case_sensitive", c.metrics.mentions_case_sensitive);
      rm.read("embed_batch_size", c.metrics.embed_batch_size);
    }
    root.read("workers", c.workers);
  }
  try {
    validate(c);
  } catch (const ValidationError& e) {
    if (findings.empty()) throw;
    findings.insert(findings.end(), e.findings().begin(), e.findings().end());
  }
  if (!findings.empty()) throw ValidationError("invalid configuration", findings);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  if (p.empty()) {
    if (const char* env = std::getenv("DOCPIPE_CONFIG"); env && *env) p = env;
  }
  if (p.empty()) return default_config();
  const json j = read_json_file(p);
  return parse_config(j, std::filesystem::absolute(p).parent_path());
}

void validate(const PipelineConfig& c) {
  std::vector<std::string> findings;
  auto check = [&](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      findings.push_back(e.what());
      for (const auto& f : e.findings()) findings.push_back(f);
    } catch (const Error& e) {
      findings.push_back(e.what());
    }
  };
  if (c.extractive.empty()) findings.push_back("backends.extractive: at least one model is required");
  std::set<std::string> ids;
  for (const auto& b : c.extractive) {
    if (!ids.insert(b.model_id).second) {
      findings.push_back("backends.extractive: duplicate model id '" + b.model_id + "'");
    }
    check([&] { backend::validate(b.descriptor(backend::Capability::extractive_qa)); });
  }
  check([&] { backend::validate(c.generate.descriptor(backend::Capability::generate)); });
  check([&] { backend::validate(c.embed.descriptor(backend::Capability::embed)); });
  for (const auto& [q, spec] : c.questions) {
    check([&] { validate(spec); });
  }
  for (const auto& [q, spec] : c.ensembles) {
    check([&] { validate(spec); });
    for (const auto& m : spec.member_model_ids) {
      if (!ids.contains(m)) {
        findings.push_back("ensemble." + std::string(to_string(q)) + ": member '" + m +
                           "' is not an extractive backend");
      }
    }
  }
  if (c.windowing.stride_chars == 0 || c.windowing.stride_chars > c.windowing.window_chars) {
    findings.push_back("windowing: need 0 < stride_chars <= window_chars");
  }
  if (c.merge.allow_adjacent_gap < 0) findings.push_back("merge.allow_adjacent_gap must be >= 0");
  check([&] { validate(c.rag); });
  if (c.q4.subquestion_template.find("{entity}") == std::string::npos) {
    findings.push_back("q4.template must contain {entity}");
  }
  if (c.q4.topk_sweep.empty()) findings.push_back("q4.topk_sweep must not be empty");
  for (int k : c.q4.topk_sweep) {
    if (k < 1) findings.push_back("q4.topk_sweep values must be >= 1");
  }
  if (std::find(c.q4.topk_sweep.begin(), c.q4.topk_sweep.end(), c.q4.topk_per_sub) ==
      c.q4.topk_sweep.end()) {
    findings.push_back("q4.topk_per_sub must be one of q4.topk_sweep");
  }
  if (c.q4.baseline_topk < 1) findings.push_back("q4.baseline_topk must be >= 1");
  check([&] { validate(c.metrics); });
  if (c.workers < 1) findings.push_back("workers must be >= 1");
  if (!findings.empty()) throw ValidationError("invalid configuration", findings);
}

json to_json(const PipelineConfig& c) {
  json ex = json::array();
  for (const auto& b : c.extractive) ex.push_back(backend_json(b));
  json questions = json::object();
  for (const auto& [q, spec] : c.questions) {
    json j = spec;
    j.erase("qid");
    questions[std::string(to_string(q))] = j;
  }
  json templates = json::object();
  for (const auto& [k, t] : c.rag.templates) templates[std::string(to_string(k))] = t;
  json ensembles = json::object();
  for (const auto& [q, spec] : c.ensembles) {
    ensembles[std::string(to_string(q))] = {{"members", spec.member_model_ids}, {"label", spec.label}};
  }
  for (Qid q : kAllQids) {
    const std::string key(to_string(q));
    if (!ensembles.contains(key) && !default_ensemble_spec(q).member_model_ids.empty()) {
      ensembles[key] = {{"members", json::array()}, {"label", "Combined"}};
    }
  }
  return {
      {"backends",
       {{"extractive", ex}, {"generate", backend_json(c.generate)}, {"embed", backend_json(c.embed)}}},
      {"mock", {{"seed", c.mock.seed}, {"table", c.mock.table.string()}}},
      {"questions", questions},
      {"windowing",
       {{"window_chars", c.windowing.window_chars}, {"stride_chars", c.windowing.stride_chars}}},
      {"merge",
       {{"allow_adjacent_gap", c.merge.allow_adjacent_gap},
        {"containment_merge", c.merge.containment_merge}}},
      {"rag",
       {{"template", templates},
        {"max_new_tokens", c.rag.max_new_tokens},
        {"temperature", c.rag.temperature}}},
      {"q4",
       {{"template", c.q4.subquestion_template},
        {"topk_per_sub", c.q4.topk_per_sub},
        {"topk_sweep", c.q4.topk_sweep},
        {"baseline_topk", c.q4.baseline_topk},
        {"max_bridges", c.q4.max_bridges ? json(*c.q4.max_bridges) : json(nullptr)}}},
      {"ensemble", ensembles},
      {"metrics",
       {{"tau", c.metrics.tau},
        {"mentions_case_sensitive", c.metrics.mentions_case_sensitive},
        {"embed_batch_size", c.metrics.embed_batch_size}}},
      {"workers", c.workers},
  };
}

std::string config_digest(const PipelineConfig& c) {
  json j = to_json(c);
  j.erase("workers");
  std::string table_digest;
  if (!c.mock.table.empty() && std::filesystem::exists(c.mock.table)) {
    table_digest = sha256_hex(read_text_file(c.mock.table));
  }
  j["mock"]["table_sha256"] = table_digest;
  return sha256_hex(dump_canonical(j));
}

}  // namespace docpipe
