// docpipe command-line front end.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "docpipe/backend/mock.hpp"
#include "docpipe/config.hpp"
#include "docpipe/conformance.hpp"
#include "docpipe/corpus.hpp"
#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/pipeline.hpp"
#include "docpipe/reporting.hpp"

namespace fs = std::filesystem;
using namespace docpipe;

namespace {

enum Exit { kOk = 0, kOther = 1, kValidation = 2, kBackend = 3, kStale = 4 };

std::vector<Qid> parse_qids(const std::string& spec) {
  std::string s = text::to_lower(spec);
  if (s == "all") return {std::begin(kAllQids), std::end(kAllQids)};
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const Qid a = parse_qid(s.substr(0, dots));
    const Qid b = parse_qid(s.substr(dots + 2));
    if (b < a) throw ValidationError("empty question range '" + spec + "'");
    std::vector<Qid> out;
    for (Qid q : kAllQids) {
      if (q >= a && q <= b) out.push_back(q);
    }
    return out;
  }
  std::vector<Qid> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(parse_qid(text::trim(s.substr(pos, comma - pos))));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Recording {
  std::shared_ptr<backend::FixtureRecorder> recorder;
  fs::path path;

  RegistryOptions options() const { return {recorder, {}}; }
  void flush() const {
    if (recorder) {
      recorder->write(path);
      spdlog::info("recorded {} fixture entries to {}", recorder->size(), path.string());
    }
  }
};

Recording make_recording(const std::string& path) {
  if (path.empty()) return {};
  auto recorder = std::make_shared<backend::FixtureRecorder>();
  if (fs::exists(path)) recorder->load(path);
  return {recorder, path};
}

MetricConfig metric_overrides(MetricConfig m, const std::optional<double>& tau, bool ignore_case) {
  if (tau) m.tau = *tau;
  if (ignore_case) m.mentions_case_sensitive = false;
  validate(m);
  return m;
}

void write_report(const fs::path& out_dir, const MetricReport& report) {
  fs::create_directories(out_dir / "tables");
  write_text_file(out_dir / "report.json", dump_pretty(to_json(report)));
  const EmittedTables tables = emit_tables(report);
  write_text_file(out_dir / "tables.json", dump_pretty(to_json(tables)));
  for (const auto& t : tables.tables) {
    write_text_file(out_dir / "tables" / (std::string(to_string(t.qid)) + ".txt"), render_text(t));
  }
  for (const auto& n : tables.notices) spdlog::info("{}", n);
}

std::string report_text(const fs::path& run_dir, const fs::path& report_path) {
  const MetricReport report = metric_report_from_json(read_json_file(report_path));
  std::string out = render_text(emit_tables(report));
  const RunManifest m = load_manifest(run_dir);
  const Corpus corpus = load_run_corpus(m);
  for (Qid q : m.qids) {
    const auto rows = emit_descriptives(corpus, q, load_systems(run_dir, m, q));
    out += "\n" + render_descriptives(q, rows, corpus.spec(q).nullable);
  }
  return out;
}

int serve_mock(int port, const std::string& table_path, std::uint64_t seed) {
  backend::MockTable table;
  if (!table_path.empty()) table = backend::MockTable::load(table_path);
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  auto model = std::make_shared<backend::MockModel>(seed, std::move(table));
  backend::TransportServer server(model, port);
  std::cout << server.url() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("docpipe");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Zero-shot question answering pipeline and evaluation harness over long documents"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Log debug detail");
  app.add_flag("-q,--quiet", quiet, "Log warnings and errors only");

  // run
  auto* run = app.add_subcommand("run", "Run questions over a corpus into a run directory");
  std::string corpus_dir, qid_spec = "all", config_path, out_dir, stop_after, record_path;
  bool keep_going = false;
  std::size_t workers = 0;
  run->add_option("--corpus", corpus_dir, "Corpus directory (documents.jsonl, gold.jsonl)")->required();
  run->add_option("--qid", qid_spec, "Q1, Q1,Q3, Q1..Q4 or all")->capture_default_str();
  run->add_option("--config", config_path, "Config file (default: $DOCPIPE_CONFIG, else built-in)");
  run->add_option("--out", out_dir, "Run directory; an existing run is continued")->required();
  run->add_flag("--keep-going", keep_going, "Record per-document failures and continue");
  run->add_option("--stop-after", stop_after, "Stop after this stage (extract, refine, rag, ...)");
  run->add_option("--record", record_path, "Also write every backend exchange to this replay fixture");
  run->add_option("--workers", workers, "Documents processed concurrently (overrides config)");

  // resume
  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string run_dir;
  resume->add_option("--run", run_dir, "Run directory")->required();
  resume->add_option("--config", config_path, "Config to check against the run (default: the run's own)");
  resume->add_flag("--keep-going", keep_going, "Record per-document failures and continue");
  resume->add_option("--record", record_path, "Also write every backend exchange to this replay fixture");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a run against the corpus gold");
  std::optional<double> tau;
  bool ignore_case = false;
  std::string eval_out;
  eval->add_option("--run", run_dir, "Run directory")->required();
  eval->add_option("--tau", tau, "Similar Match threshold in (0, 1]");
  eval->add_flag("--mentions-ignore-case", ignore_case, "Case-insensitive Mentions matching");
  eval->add_option("--config", config_path, "Config providing the embed backend (default: the run's)");
  eval->add_option("--out", eval_out, "Output directory (default: the run directory)");
  eval->add_option("--record", record_path, "Also write embed exchanges to this replay fixture");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Score every model pair as an ensemble");
  std::string sweep_qid = "Q1";
  sweep->add_option("--run", run_dir, "Run directory")->required();
  sweep->add_option("--qid", sweep_qid, "Question")->capture_default_str();
  sweep->add_option("--tau", tau, "Similar Match threshold in (0, 1]");
  sweep->add_flag("--mentions-ignore-case", ignore_case, "Case-insensitive Mentions matching");
  sweep->add_option("--config", config_path, "Config providing the embed backend (default: the run's)");

  // report
  auto* report = app.add_subcommand("report", "Print result tables and descriptive statistics");
  std::string report_path;
  report->add_option("--run", run_dir, "Run directory")->required();
  report->add_option("--report", report_path, "report.json to render (default: <run>/report.json)");

  // descriptives
  auto* desc = app.add_subcommand("descriptives", "Descriptive statistics of a corpus' gold answers");
  desc->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  desc->add_option("--qid", qid_spec, "Questions")->capture_default_str();
  bool desc_json = false;
  desc->add_flag("--json", desc_json, "Emit JSON instead of text");

  // conformance
  auto* conf = app.add_subcommand("conformance", "Run the backend contract suite against a server");
  std::string endpoint;
  ConformanceOptions copts;
  conf->add_option("--endpoint", endpoint, "Server base URL, e.g. http://127.0.0.1:8000")->required();
  conf->add_option("--extractive-model", copts.extractive_model)->capture_default_str();
  conf->add_option("--generate-model", copts.generate_model)->capture_default_str();
  conf->add_option("--embed-model", copts.embed_model)->capture_default_str();
  conf->add_option("--contexts", copts.contexts, "Random contexts for the offset check")->capture_default_str();
  conf->add_option("--seed", copts.seed)->capture_default_str();

  // prepare
  auto* prep = app.add_subcommand("prepare", "Write a copy of a corpus with in-text citations removed");
  std::string prep_in, prep_out;
  std::vector<std::string> extra_patterns;
  prep->add_option("--in", prep_in, "Source corpus directory")->required();
  prep->add_option("--out", prep_out, "Destination corpus directory")->required();
  prep->add_option("--pattern", extra_patterns, "Extra ECMAScript regex to delete (repeatable)");

  // mock-serve
  auto* serve = app.add_subcommand("mock-serve", "Serve the deterministic mock models over HTTP");
  int port = 0;
  std::string table_path;
  std::uint64_t seed = 0;
  serve->add_option("--port", port, "Port on 127.0.0.1 (0 picks a free one)")->capture_default_str();
  serve->add_option("--table", table_path, "Mock behavior table (JSON)");
  serve->add_option("--seed", seed, "Mock seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*run) {
      PipelineConfig cfg = load_config(config_path);
      if (workers > 0) cfg.workers = workers;
      const Corpus corpus = load_corpus(corpus_dir);
      const Recording rec = make_recording(record_path);
      auto reg = std::make_shared<BackendRegistry>(build_backends(cfg, rec.options()));
      Orchestrator o(corpus, corpus_dir, cfg, out_dir, reg);
      RunOptions ro;
      ro.qids = parse_qids(qid_spec);
      ro.keep_going = keep_going;
      if (!stop_after.empty()) ro.stop_after = stop_after;
      const RunManifest m = o.run(ro);
      rec.flush();
      std::cout << "run " << m.run_id << " " << m.status << " (" << m.failures.size()
                << " failure(s)) in " << out_dir << "\n";
      return m.failures.empty() ? kOk : kOther;
    }
    if (*resume) {
      std::optional<PipelineConfig> cfg;
      if (!config_path.empty()) cfg = load_config(config_path);
      const Recording rec = make_recording(record_path);
      RunOptions ro;
      ro.keep_going = keep_going;
      const RunManifest m = resume_run(run_dir, cfg, rec.options(), ro);
      rec.flush();
      std::cout << "run " << m.run_id << " " << m.status << " (" << m.failures.size()
                << " failure(s))\n";
      return m.failures.empty() ? kOk : kOther;
    }
    if (*eval || *sweep) {
      const RunManifest m = load_manifest(run_dir);
      const PipelineConfig cfg = config_path.empty() ? load_run_config(m) : load_config(config_path);
      const MetricConfig metrics = metric_overrides(cfg.metrics, tau, ignore_case);
      const Recording rec = make_recording(record_path);
      const BackendRegistry reg = build_backends(cfg, rec.options());
      if (*eval) {
        const MetricReport r = evaluate_run(run_dir, metrics, reg);
        write_report(eval_out.empty() ? fs::path(run_dir) : fs::path(eval_out), r);
        rec.flush();
        std::cout << render_text(emit_tables(r));
        return kOk;
      }
      const Qid q = parse_qid(sweep_qid);
      EmbeddingCache cache(reg.embedder, metrics.embed_batch_size);
      const auto pairs = sweep_ensemble_pairs(load_run_corpus(m), q, load_member_sets(run_dir, m, q),
                                              cache, metrics);
      rec.flush();
      json j = json::array();
      std::cout << "rank  pair                              F1     EMat   SMat   Ment\n";
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        const std::string name = p.first + "+" + p.second;
        std::printf("%4zu  %-30s  %.3f  %.3f  %.3f  %.3f\n", i + 1, name.c_str(), p.scores.f1,
                    p.scores.em, p.scores.smat, p.scores.mentions);
        j.push_back({{"first", p.first},
                     {"second", p.second},
                     {"f1", p.scores.f1},
                     {"em", p.scores.em},
                     {"smat", p.scores.smat},
                     {"mentions", p.scores.mentions}});
      }
      write_text_file(fs::path(run_dir) / ("sweep_" + std::string(to_string(q)) + ".json"),
                      dump_pretty({{"qid", to_string(q)}, {"tau", metrics.tau}, {"pairs", j}}));
      return kOk;
    }
    if (*report) {
      const fs::path rp = report_path.empty() ? fs::path(run_dir) / "report.json" : fs::path(report_path);
      const std::string text = report_text(run_dir, rp);
      write_text_file(fs::path(run_dir) / "report.txt", text);
      std::cout << text;
      return kOk;
    }
    if (*desc) {
      const Corpus corpus = load_corpus(corpus_dir);
      json j = json::object();
      std::string out;
      for (Qid q : parse_qids(qid_spec)) {
        const auto rows = emit_descriptives(corpus, q, {});
        if (rows.front().n_docs == 0) continue;
        json arr = json::array();
        for (const auto& r : rows) arr.push_back(to_json(r));
        j[std::string(to_string(q))] = arr;
        out += (out.empty() ? "" : "\n") + render_descriptives(q, rows, corpus.spec(q).nullable);
      }
      std::cout << (desc_json ? dump_pretty(j) : out);
      return kOk;
    }
    if (*conf) {
      backend::HttpTransport t(endpoint, {});
      int failed = 0;
      for (const auto& c : run_conformance(t, copts)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        failed += !c.passed;
      }
      return failed == 0 ? kOk : kOther;
    }
    if (*prep) {
      CitationStripper stripper;
      for (const auto& p : extra_patterns) stripper.add_pattern(p);
      const Corpus raw = load_corpus(prep_in);
      const Corpus clean = strip_corpus_citations(raw, stripper);
      write_corpus(clean, prep_out);
      std::size_t before = 0, after = 0;
      for (const auto& d : raw.documents) before += d.text.size();
      for (const auto& d : clean.documents) after += d.text.size();
      std::cout << clean.documents.size() << " document(s), " << before << " -> " << after
                << " characters, written to " << prep_out << "\n";
      return kOk;
    }
    if (*serve) return serve_mock(port, table_path, seed);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    for (const auto& f : e.findings()) spdlog::error("  {}", f);
    return kValidation;
  } catch (const StaleRunError& e) {
    spdlog::error("{}", e.what());
    return kStale;
  } catch (const BackendError& e) {
    spdlog::error("backend: {}", e.what());
    return kBackend;
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    if (e.cause()) {
      try {
        std::rethrow_exception(e.cause());
      } catch (const BackendError&) {
        return kBackend;
      } catch (...) {
      }
    }
    return kOther;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
  return kOther;
}
