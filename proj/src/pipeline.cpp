#include "docpipe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include <spdlog/spdlog.h>

#include "docpipe/corpus.hpp"
#include "docpipe/ensemble.hpp"
#include "docpipe/error.hpp"
#include "docpipe/extraction.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/multihop.hpp"
#include "docpipe/parallel.hpp"
#include "docpipe/rag.hpp"
#include "docpipe/refinement.hpp"

namespace docpipe {

namespace fs = std::filesystem;
using backend::Capability;

// ---------------------------------------------------------------------------
// Backends

std::shared_ptr<backend::BackendClient> BackendRegistry::find_extractive(
    const std::string& model_id) const {
  for (const auto& c : extractive) {
    if (c->model_id() == model_id) return c;
  }
  return nullptr;
}

BackendRegistry build_backends(const PipelineConfig& cfg, const RegistryOptions& opts) {
  BackendRegistry reg;
  std::shared_ptr<backend::MockModel> mock;
  std::shared_ptr<backend::TransportServer> mock_server;
  std::map<std::string, std::shared_ptr<backend::Transport>> replays;

  auto mock_model = [&] {
    if (!mock) {
      backend::MockTable table;
      if (!cfg.mock.table.empty()) table = backend::MockTable::load(cfg.mock.table);
      mock = std::make_shared<backend::MockModel>(cfg.mock.seed, std::move(table));
    }
    return mock;
  };

  auto make = [&](const BackendConfig& bc, Capability cap) {
    backend::BackendDescriptor d = bc.descriptor(cap);
    std::shared_ptr<backend::Transport> t;
    switch (d.endpoint.kind) {
      case backend::Endpoint::Kind::mock:
        t = mock_model();
        break;
      case backend::Endpoint::Kind::mock_http:
        if (!mock_server) {
          mock_server = std::make_shared<backend::TransportServer>(mock_model());
          reg.servers.push_back(mock_server);
        }
        t = std::make_shared<backend::HttpTransport>(mock_server->url(),
                                                     backend::HttpTransport::Options{d.timeout});
        break;
      case backend::Endpoint::Kind::http:
        t = std::make_shared<backend::HttpTransport>(d.endpoint.target,
                                                     backend::HttpTransport::Options{d.timeout});
        break;
      case backend::Endpoint::Kind::replay: {
        auto& slot = replays[d.endpoint.target];
        if (!slot) {
          backend::replay_backend(d.endpoint.target, d.model_id, cap);
          slot = std::make_shared<backend::ReplayTransport>(d.endpoint.target);
        }
        t = slot;
        break;
      }
    }
    if (opts.recorder) t = std::make_shared<backend::RecordingTransport>(t, opts.recorder);
    if (opts.wrap) t = opts.wrap(d, t);
    return std::make_shared<backend::BackendClient>(std::move(d), std::move(t));
  };

  for (const auto& b : cfg.extractive) reg.extractive.push_back(make(b, Capability::extractive_qa));
  reg.generator = make(cfg.generate, Capability::generate);
  reg.embedder = make(cfg.embed, Capability::embed);
  return reg;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<std::string> stage_plan(const QuestionSpec& q, bool has_ensemble) {
  if (q.qid == Qid::Q4) return {"baseline", "multihop", "final"};
  std::vector<std::string> plan{"extract", "refine"};
  if (q.has_stage(Stage::rag)) plan.emplace_back("rag");
  if (has_ensemble && q.has_stage(Stage::ensemble)) plan.emplace_back("ensemble");
  plan.emplace_back("final");
  return plan;
}

json to_json(const RunManifest& m) {
  json failures = json::array();
  for (const auto& f : m.failures) {
    failures.push_back(
        {{"qid", to_string(f.qid)}, {"stage", f.stage}, {"doc_id", f.doc_id}, {"error", f.error}});
  }
  std::vector<std::string> qids;
  for (Qid q : m.qids) qids.emplace_back(to_string(q));
  return {{"run_id", m.run_id},
          {"corpus_digest", m.corpus_digest},
          {"config_digest", m.config_digest},
          {"corpus_path", m.corpus_path},
          {"effective_config", m.effective_config},
          {"backends", m.backends},
          {"qids", qids},
          {"stages", m.stages},
          {"failures", failures},
          {"created_at", m.created_at},
          {"updated_at", m.updated_at},
          {"status", m.status}};
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    j.at("run_id").get_to(m.run_id);
    j.at("corpus_digest").get_to(m.corpus_digest);
    j.at("config_digest").get_to(m.config_digest);
    j.at("corpus_path").get_to(m.corpus_path);
    m.effective_config = j.at("effective_config");
    j.at("backends").get_to(m.backends);
    for (const auto& q : j.at("qids")) m.qids.push_back(parse_qid(q.get<std::string>()));
    j.at("stages").get_to(m.stages);
    for (const auto& f : j.at("failures")) {
      m.failures.push_back({parse_qid(f.at("qid").get<std::string>()), f.at("stage").get<std::string>(),
                            f.at("doc_id").get<std::string>(), f.at("error").get<std::string>()});
    }
    j.at("created_at").get_to(m.created_at);
    j.at("updated_at").get_to(m.updated_at);
    j.at("status").get_to(m.status);
    return m;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed run manifest: ") + e.what());
  }
}

RunManifest load_manifest(const fs::path& run_dir) {
  const fs::path p = run_dir / "manifest.json";
  if (!fs::exists(p)) throw LoadError("no run manifest at " + p.string());
  return manifest_from_json(read_json_file(p));
}

fs::path stage_file(const fs::path& run_dir, Qid q, const std::string& stage,
                    const std::string& doc_id) {
  return run_dir / "stages" / std::string(to_string(q)) / stage / (doc_id + ".json");
}

std::string timestamp_now() {
  std::time_t t = 0;
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) {
    t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Orchestrator

namespace {

json spans_json(const std::vector<Span>& spans) {
  json a = json::array();
  for (const auto& s : spans) a.push_back(s);
  return a;
}

std::vector<Span> spans_from(const json& j) { return j.get<std::vector<Span>>(); }

MergePolicy merge_policy(const PipelineConfig& cfg, const QuestionSpec& q) {
  MergePolicy p = cfg.merge;
  p.enabled = q.merge_enabled;
  return p;
}

void erase_failure(std::vector<StageFailure>& fs, Qid q, const std::string& stage,
                   const std::string& doc) {
  std::erase_if(fs, [&](const StageFailure& f) {
    return f.qid == q && f.stage == stage && f.doc_id == doc;
  });
}

}  // namespace

Orchestrator::Orchestrator(Corpus corpus, fs::path corpus_dir, PipelineConfig cfg, fs::path run_dir,
                           std::shared_ptr<BackendRegistry> backends)
    : corpus_(std::move(corpus)),
      corpus_dir_(std::move(corpus_dir)),
      cfg_(std::move(cfg)),
      run_dir_(std::move(run_dir)),
      backends_(std::move(backends)) {
  if (!backends_) throw PreconditionError("orchestrator needs a backend registry");
}

void Orchestrator::open_manifest(const std::vector<Qid>& qids) {
  const std::string corpus_d = corpus_digest(corpus_);
  const std::string config_d = config_digest(cfg_);
  const fs::path mp = run_dir_ / "manifest.json";
  if (fs::exists(mp)) {
    manifest_ = load_manifest(run_dir_);
    if (manifest_.corpus_digest != corpus_d) {
      throw StaleRunError("run " + run_dir_.string() + " was made from a different corpus (" +
                          manifest_.corpus_digest.substr(0, 12) + " vs " + corpus_d.substr(0, 12) + ")");
    }
    if (manifest_.config_digest != config_d) {
      throw StaleRunError("run " + run_dir_.string() + " was made with a different config (" +
                          manifest_.config_digest.substr(0, 12) + " vs " + config_d.substr(0, 12) + ")");
    }
  } else {
    manifest_ = RunManifest{};
    manifest_.corpus_digest = corpus_d;
    manifest_.config_digest = config_d;
    manifest_.run_id = sha256_hex(corpus_d + ":" + config_d).substr(0, 16);
    manifest_.corpus_path = fs::absolute(corpus_dir_).lexically_normal().string();
    manifest_.effective_config = to_json(cfg_);
    for (const auto& b : cfg_.extractive) manifest_.backends.push_back("extractive_qa:" + b.model_id + "@" + b.endpoint);
    manifest_.backends.push_back("generate:" + cfg_.generate.model_id + "@" + cfg_.generate.endpoint);
    manifest_.backends.push_back("embed:" + cfg_.embed.model_id + "@" + cfg_.embed.endpoint);
    manifest_.created_at = timestamp_now();
  }
  for (Qid q : qids) {
    if (std::find(manifest_.qids.begin(), manifest_.qids.end(), q) == manifest_.qids.end()) {
      manifest_.qids.push_back(q);
    }
    for (const auto& s : stage_plan(cfg_.questions.at(q), cfg_.ensembles.contains(q))) {
      manifest_.stages.try_emplace(std::string(to_string(q)) + "/" + s, "pending");
    }
  }
  std::sort(manifest_.qids.begin(), manifest_.qids.end());
}

void Orchestrator::save_manifest() {
  std::lock_guard lock(write_mu_);
  manifest_.updated_at = timestamp_now();
  write_text_file(run_dir_ / "manifest.json", dump_pretty(to_json(manifest_)));
}

json Orchestrator::read_stage(Qid q, const std::string& stage, const std::string& doc_id) const {
  const fs::path p = stage_file(run_dir_, q, stage, doc_id);
  if (!fs::exists(p)) {
    throw PreconditionError("missing " + std::string(to_string(q)) + "/" + stage + " output for doc '" +
                            doc_id + "'");
  }
  return read_json_file(p);
}

void Orchestrator::write_stage(Qid q, const std::string& stage, const std::string& doc_id,
                               const json& j) {
  const fs::path p = stage_file(run_dir_, q, stage, doc_id);
  std::lock_guard lock(write_mu_);
  fs::create_directories(p.parent_path());
  write_text_file(p, dump_pretty(j));
}

json Orchestrator::compute(const QuestionSpec& q, const std::string& stage, const Document& doc) {
  const MergePolicy policy = merge_policy(cfg_, q);
  json out = {{"doc_id", doc.doc_id}, {"qid", to_string(q.qid)}, {"stage", stage}};

  if (stage == "extract") {
    json models = json::object();
    for (const auto& m : backends_->extractive) {
      const auto ex = answer_question(doc, q, *m, q.topk, cfg_.windowing, 1);
      models[m->model_id()] = {{"spans", spans_json(ex.spans)}, {"forced_empty", ex.forced_empty}};
    }
    out["models"] = models;
  } else if (stage == "refine") {
    const json in = read_stage(q.qid, "extract", doc.doc_id);
    json models = json::object();
    for (const auto& [m, v] : in.at("models").items()) {
      models[m] = refine_spans(doc, q.qid, q.nullable, spans_from(v.at("spans")), policy);
    }
    out["models"] = models;
  } else if (stage == "rag") {
    const json in = read_stage(q.qid, "refine", doc.doc_id);
    json models = json::object();
    for (const auto& [m, v] : in.at("models").items()) {
      const auto r = rag_enhance(doc, q, v.get<AnswerSet>(), *backends_->generator, cfg_.rag);
      models[m] = {{"prompt", r.prompt ? json(r.prompt->rendered) : json(nullptr)},
                   {"generation", r.generation},
                   {"generation_id", r.generation_id},
                   {"answers", r.answers}};
    }
    out["models"] = models;
  } else if (stage == "ensemble") {
    const EnsembleSpec& spec = cfg_.ensembles.at(q.qid);
    const bool rag = q.has_stage(Stage::rag);
    const json in = read_stage(q.qid, rag ? "rag" : "refine", doc.doc_id);
    std::vector<AnswerSet> sets;
    for (const auto& m : spec.member_model_ids) {
      const json& v = in.at("models").at(m);
      sets.push_back(rag ? v.at("answers").get<AnswerSet>() : v.get<AnswerSet>());
    }
    out["label"] = spec.label;
    out["members"] = spec.member_model_ids;
    out["answers"] = combine(sets);
  } else if (stage == "final") {
    if (q.qid == Qid::Q4) {
      const json in = read_stage(q.qid, "multihop", doc.doc_id);
      const std::string& m = backends_->extractive.front()->model_id();
      out["source"] = "multi_hop_k" + std::to_string(cfg_.q4.topk_per_sub) + "/" + m;
      out["answers"] = in.at("models").at(m).at("k" + std::to_string(cfg_.q4.topk_per_sub)).at("answers");
    } else if (cfg_.ensembles.contains(q.qid) && q.has_stage(Stage::ensemble)) {
      const json in = read_stage(q.qid, "ensemble", doc.doc_id);
      out["source"] = in.at("label");
      out["answers"] = in.at("answers");
    } else {
      const bool rag = q.has_stage(Stage::rag);
      const json in = read_stage(q.qid, rag ? "rag" : "refine", doc.doc_id);
      const std::string& m = backends_->extractive.front()->model_id();
      out["source"] = std::string(rag ? "rag/" : "raw/") + m;
      out["answers"] = rag ? in.at("models").at(m).at("answers") : in.at("models").at(m);
    }
  } else if (stage == "baseline") {
    MultihopOptions mo;
    mo.baseline_topk = cfg_.q4.baseline_topk;
    mo.windowing = cfg_.windowing;
    mo.merge = policy;
    json models = json::object();
    for (const auto& m : backends_->extractive) {
      const auto r = single_hop_baseline(doc, q, *m, mo);
      models[m->model_id()] = {{"pre_merge", spans_json(r.pre_merge)}, {"answers", r.answers}};
    }
    out["models"] = models;
  } else if (stage == "multihop") {
    const json q1 = read_stage(Qid::Q1, "final", doc.doc_id);
    const auto bridges = bridges_from(q1.at("answers").get<AnswerSet>(), cfg_.q4.max_bridges);
    MultihopOptions mo;
    mo.subquestion_template = cfg_.q4.subquestion_template;
    mo.baseline_topk = cfg_.q4.baseline_topk;
    mo.windowing = cfg_.windowing;
    mo.merge = policy;
    json subs = json::array();
    for (const auto& sq : make_subquestions(mo.subquestion_template, bridges)) {
      subs.push_back({{"subquestion_id", sq.subquestion_id},
                      {"bridge_entity", sq.bridge_entity},
                      {"text", sq.text}});
    }
    json models = json::object();
    for (const auto& m : backends_->extractive) {
      json per_k = json::object();
      for (int k : cfg_.q4.topk_sweep) {
        mo.topk_per_sub = k;
        const auto r = answer_multihop(doc, q, bridges, *m, mo);
        per_k["k" + std::to_string(k)] = {{"pre_merge", spans_json(r.pre_merge)},
                                          {"answers", r.answers},
                                          {"fallback", r.fallback}};
      }
      models[m->model_id()] = per_k;
    }
    out["bridges"] = bridges;
    out["subquestions"] = subs;
    out["models"] = models;
  } else {
    throw PreconditionError("unknown stage '" + stage + "'");
  }
  return out;
}

bool Orchestrator::run_stage(const QuestionSpec& q, const std::string& stage,
                             const RunOptions& opts) {
  const std::string key = std::string(to_string(q.qid)) + "/" + stage;
  if (manifest_.stages[key] == "complete") {
    spdlog::debug("{}: complete, skipped", key);
    return true;
  }
  const auto& docs = corpus_.documents;
  // Documents whose upstream stage failed are left pending rather than
  // failing again on the missing input.
  std::set<std::string> blocked;
  for (const auto& f : manifest_.failures) {
    if ((f.qid == q.qid && f.stage != stage) || (q.qid == Qid::Q4 && f.qid == Qid::Q1)) blocked.insert(f.doc_id);
  }
  std::vector<std::exception_ptr> errors(docs.size());
  std::size_t ran = 0;
  parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
    const Document& doc = docs[i];
    if (fs::exists(stage_file(run_dir_, q.qid, stage, doc.doc_id))) return;
    if (blocked.contains(doc.doc_id)) return;
    try {
      json j = compute(q, stage, doc);
      write_stage(q.qid, stage, doc.doc_id, j);
      std::lock_guard lock(write_mu_);
      erase_failure(manifest_.failures, q.qid, stage, doc.doc_id);
      ++ran;
    } catch (const Error& e) {
      std::lock_guard lock(write_mu_);
      erase_failure(manifest_.failures, q.qid, stage, doc.doc_id);
      manifest_.failures.push_back({q.qid, stage, doc.doc_id, e.what()});
      errors[i] = std::current_exception();
    }
  });
  std::sort(manifest_.failures.begin(), manifest_.failures.end(),
            [](const StageFailure& a, const StageFailure& b) {
              return std::tie(a.qid, a.stage, a.doc_id) < std::tie(b.qid, b.stage, b.doc_id);
            });
  bool all_ok = blocked.empty();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!errors[i]) continue;
    all_ok = false;
    if (!opts.keep_going) {
      manifest_.status = "failed";
      save_manifest();
      std::rethrow_exception(errors[i]);
    }
    spdlog::warn("{}: doc '{}' failed, continuing", key, docs[i].doc_id);
  }
  manifest_.stages[key] = all_ok ? "complete" : "pending";
  spdlog::info("{}: {} document(s) computed{}", key, ran, all_ok ? "" : ", with failures");
  save_manifest();
  return all_ok;
}

void Orchestrator::run_question(const QuestionSpec& q, const RunOptions& opts, bool& stopped) {
  for (const auto& stage : stage_plan(q, cfg_.ensembles.contains(q.qid))) {
    run_stage(q, stage, opts);
    if (opts.stop_after && *opts.stop_after == stage) {
      stopped = true;
      return;
    }
  }
}

RunManifest Orchestrator::run(const RunOptions& opts) {
  std::vector<Qid> qids = opts.qids;
  std::sort(qids.begin(), qids.end());
  qids.erase(std::unique(qids.begin(), qids.end()), qids.end());
  if (qids.empty()) throw PreconditionError("no questions requested");
  if (opts.stop_after) {
    static const std::set<std::string> known = {"extract", "refine",   "rag",  "ensemble",
                                                "baseline", "multihop", "final"};
    if (!known.contains(*opts.stop_after)) {
      throw ValidationError("unknown stage '" + *opts.stop_after + "' for --stop-after");
    }
  }
  fs::create_directories(run_dir_);
  open_manifest(qids);
  if (std::find(qids.begin(), qids.end(), Qid::Q4) != qids.end() &&
      !manifest_.stages.contains("Q1/final")) {
    throw PreconditionError("Q4 builds on Q1's final answers, but this run has no Q1 output; "
                            "run Q1 first");
  }
  save_manifest();

  bool stopped = false;
  for (Qid q : qids) {
    run_question(cfg_.questions.at(q), opts, stopped);
    if (stopped) break;
  }
  const bool complete = std::all_of(manifest_.stages.begin(), manifest_.stages.end(),
                                    [](const auto& kv) { return kv.second == "complete"; });
  manifest_.status = complete ? "complete" : (manifest_.failures.empty() ? "incomplete" : "failed");
  save_manifest();
  return manifest_;
}

Corpus load_run_corpus(const RunManifest& m) {
  Corpus c = load_corpus(m.corpus_path);
  if (corpus_digest(c) != m.corpus_digest) {
    throw StaleRunError("corpus at " + m.corpus_path + " changed since the run was made");
  }
  return c;
}

PipelineConfig load_run_config(const RunManifest& m) { return parse_config(m.effective_config); }

RunManifest resume_run(const fs::path& run_dir, const std::optional<PipelineConfig>& cfg,
                       const RegistryOptions& registry, const RunOptions& opts) {
  RunManifest m = load_manifest(run_dir);
  PipelineConfig c = cfg ? *cfg : load_run_config(m);
  if (config_digest(c) != m.config_digest) {
    throw StaleRunError("config differs from the one run " + m.run_id + " was made with");
  }
  Corpus corpus = load_run_corpus(m);
  auto reg = std::make_shared<BackendRegistry>(build_backends(c, registry));
  Orchestrator o(std::move(corpus), m.corpus_path, std::move(c), run_dir, reg);
  RunOptions ro = opts;
  if (ro.qids.empty()) ro.qids = m.qids;
  return o.run(ro);
}

// ---------------------------------------------------------------------------
// Reading results back

namespace {

std::optional<json> try_read(const fs::path& run_dir, Qid q, const std::string& stage,
                             const std::string& doc) {
  const fs::path p = stage_file(run_dir, q, stage, doc);
  if (!fs::exists(p)) return std::nullopt;
  return read_json_file(p);
}

}  // namespace

std::vector<std::pair<std::string, std::map<std::string, AnswerSet>>> load_systems(
    const fs::path& run_dir, const RunManifest& m, Qid q) {
  const PipelineConfig cfg = load_run_config(m);
  const Corpus corpus = load_run_corpus(m);
  const QuestionSpec& spec = cfg.questions.at(q);
  const auto plan = stage_plan(spec, cfg.ensembles.contains(q));
  auto has = [&](const char* s) { return std::find(plan.begin(), plan.end(), s) != plan.end(); };

  std::vector<std::pair<std::string, std::map<std::string, AnswerSet>>> out;
  auto slot = [&](const std::string& label) -> std::map<std::string, AnswerSet>& {
    for (auto& [l, sets] : out) {
      if (l == label) return sets;
    }
    out.emplace_back(label, std::map<std::string, AnswerSet>{});
    return out.back().second;
  };
  const auto models = cfg.extractive_ids();

  if (q == Qid::Q4) {
    for (const auto& m_id : models) slot("single_hop/" + m_id);
    for (int k : cfg.q4.topk_sweep) {
      for (const auto& m_id : models) slot("multi_hop_k" + std::to_string(k) + "/" + m_id);
    }
    for (const auto& d : corpus.documents) {
      if (auto j = try_read(run_dir, q, "baseline", d.doc_id)) {
        for (const auto& m_id : models) {
          slot("single_hop/" + m_id)[d.doc_id] = j->at("models").at(m_id).at("answers").get<AnswerSet>();
        }
      }
      if (auto j = try_read(run_dir, q, "multihop", d.doc_id)) {
        for (int k : cfg.q4.topk_sweep) {
          for (const auto& m_id : models) {
            slot("multi_hop_k" + std::to_string(k) + "/" + m_id)[d.doc_id] =
                j->at("models").at(m_id).at("k" + std::to_string(k)).at("answers").get<AnswerSet>();
          }
        }
      }
    }
    return out;
  }

  for (const auto& m_id : models) slot("raw/" + m_id);
  if (has("rag")) {
    for (const auto& m_id : models) slot("rag/" + m_id);
  }
  if (has("ensemble")) slot(cfg.ensembles.at(q).label);
  for (const auto& d : corpus.documents) {
    if (auto j = try_read(run_dir, q, "refine", d.doc_id)) {
      for (const auto& m_id : models) slot("raw/" + m_id)[d.doc_id] = j->at("models").at(m_id).get<AnswerSet>();
    }
    if (has("rag")) {
      if (auto j = try_read(run_dir, q, "rag", d.doc_id)) {
        for (const auto& m_id : models) {
          slot("rag/" + m_id)[d.doc_id] = j->at("models").at(m_id).at("answers").get<AnswerSet>();
        }
      }
    }
    if (has("ensemble")) {
      if (auto j = try_read(run_dir, q, "ensemble", d.doc_id)) {
        slot(cfg.ensembles.at(q).label)[d.doc_id] = j->at("answers").get<AnswerSet>();
      }
    }
  }
  return out;
}

std::map<std::string, AnswerSet> load_final(const fs::path& run_dir, const RunManifest& m, Qid q) {
  std::map<std::string, AnswerSet> out;
  const Corpus corpus = load_run_corpus(m);
  for (const auto& d : corpus.documents) {
    if (auto j = try_read(run_dir, q, "final", d.doc_id)) out[d.doc_id] = j->at("answers").get<AnswerSet>();
  }
  return out;
}

std::map<std::string, std::map<std::string, AnswerSet>> load_member_sets(const fs::path& run_dir,
                                                                         const RunManifest& m, Qid q) {
  if (q == Qid::Q4) throw PreconditionError("Q4 has no ensemble members");
  const PipelineConfig cfg = load_run_config(m);
  const bool rag = cfg.questions.at(q).has_stage(Stage::rag);
  std::map<std::string, std::map<std::string, AnswerSet>> out;
  for (auto& [label, sets] : load_systems(run_dir, m, q)) {
    const std::string prefix = rag ? "rag/" : "raw/";
    if (label.starts_with(prefix)) out[label.substr(prefix.size())] = std::move(sets);
  }
  return out;
}

MetricReport evaluate_run(const fs::path& run_dir, const MetricConfig& metrics,
                          const BackendRegistry& backends) {
  validate(metrics);
  const RunManifest m = load_manifest(run_dir);
  const Corpus corpus = load_run_corpus(m);
  const PipelineConfig cfg = load_run_config(m);
  EmbeddingCache cache(backends.embedder, metrics.embed_batch_size);

  std::vector<ScoredDoc> scored;
  json missing = json::array();
  for (Qid q : m.qids) {
    for (const auto& [label, sets] : load_systems(run_dir, m, q)) {
      for (const auto& d : corpus.documents) {
        const GoldAnnotation* g = corpus.find_gold(d.doc_id, q);
        if (!g) continue;
        const auto it = sets.find(d.doc_id);
        if (it == sets.end()) {
          missing.push_back({{"qid", to_string(q)}, {"system", label}, {"doc_id", d.doc_id}});
          continue;
        }
        scored.push_back({q, label, d.doc_id, score_document(*g, it->second, &cache, metrics)});
      }
    }
  }
  json meta = {
      {"tau", metrics.tau},
      {"mentions_case_sensitive", metrics.mentions_case_sensitive},
      {"embed_model", backends.embedder->model_id()},
      {"backends", m.backends},
      {"run_id", m.run_id},
      {"config_digest", m.config_digest},
      {"corpus_digest", m.corpus_digest},
      {"answer_dedup", "answers equal under SQuAD normalization are merged before scoring"},
      {"negative_rule", "empty gold scores 1 on every metric iff the prediction is empty"},
      {"q4_primary_topk", cfg.q4.topk_per_sub},
      {"q4_topk_sweep", cfg.q4.topk_sweep},
      {"q4_baseline_topk", cfg.q4.baseline_topk},
      {"missing", missing},
  };
  return aggregate(scored, std::move(meta));
}

std::vector<PairScore> sweep_ensemble_pairs(
    const Corpus& corpus, Qid q, const std::map<std::string, std::map<std::string, AnswerSet>>& per_model,
    EmbeddingCache& cache, const MetricConfig& metrics) {
  if (per_model.size() < 2) {
    throw PreconditionError("pair sweep needs at least two models, got " +
                            std::to_string(per_model.size()));
  }
  std::vector<std::string> models;
  for (const auto& [m, sets] : per_model) models.push_back(m);
  auto set_for = [&](const std::string& m, const std::string& doc) {
    const auto& sets = per_model.at(m);
    if (auto it = sets.find(doc); it != sets.end()) return it->second;
    AnswerSet empty;
    empty.doc_id = doc;
    empty.qid = q;
    return empty;
  };
  std::vector<PairScore> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      std::vector<ScoredDoc> docs;
      for (const auto& d : corpus.documents) {
        const GoldAnnotation* g = corpus.find_gold(d.doc_id, q);
        if (!g) continue;
        const AnswerSet pair[] = {set_for(models[i], d.doc_id), set_for(models[j], d.doc_id)};
        docs.push_back({q, "pair", d.doc_id, score_document(*g, combine(pair), &cache, metrics)});
      }
      PairScore ps{models[i], models[j], {}};
      if (!docs.empty()) ps.scores = aggregate(docs).questions.front().systems.front().corpus;
      out.push_back(std::move(ps));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const PairScore& a, const PairScore& b) {
    if (a.scores.smat != b.scores.smat) return a.scores.smat > b.scores.smat;
    if (a.scores.f1 != b.scores.f1) return a.scores.f1 > b.scores.f1;
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  return out;
}

}  // namespace docpipe
