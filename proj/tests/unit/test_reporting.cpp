#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <sstream>

#include "docpipe/backend/mock.hpp"
#include "docpipe/conformance.hpp"
#include "docpipe/corpus.hpp"
#include "docpipe/error.hpp"
#include "docpipe/reporting.hpp"
#include "support.hpp"

using namespace docpipe;
using namespace docpipe::backend;

namespace {

MetricReport sample_report() {
  std::vector<ScoredDoc> docs;
  const auto add = [&](Qid q, const std::string& sys, double f1, double em, double smat, double m) {
    docs.push_back({q, sys, "d1", {f1, em, smat, m}});
    docs.push_back({q, sys, "d2", {f1 / 3, em / 3, smat / 7, m / 9}});
  };
  add(Qid::Q1, "raw/deberta", 0.12345, 0.25, 0.5, 0.75);
  add(Qid::Q1, "rag/deberta", 0.4, 0.3, 0.9, 0.6);
  add(Qid::Q1, "Combined", 0.55, 0.45, 0.95, 0.65);
  add(Qid::Q4, "single_hop/deberta", 0.2, 0.1, 0.3, 0.4);
  for (int k : {1, 3, 5}) add(Qid::Q4, "multi_hop_k" + std::to_string(k) + "/deberta", 0.5, 0.4, 0.6 + k / 100.0, 0.7);
  return aggregate(docs, {{"tau", 0.8}, {"q4_topk_sweep", {1, 3, 5}}, {"q4_primary_topk", 1}, {"q4_baseline_topk", 10}});
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

TEST(Tables, ShapesAndNotices) {
  const EmittedTables e = emit_tables(sample_report());
  ASSERT_EQ(e.tables.size(), 2u);
  EXPECT_EQ(e.tables[0].columns, (std::vector<std::string>{"F1", "EMat", "SMat", "Ment"}));
  EXPECT_EQ(e.tables[1].columns, (std::vector<std::string>{"F1", "EMat", "SMat topk=1", "topk=3", "topk=5"}));
  EXPECT_EQ(e.notices.size(), 2u);
  EXPECT_NE(e.notices[0].find("Q2"), std::string::npos);
  EXPECT_NE(e.notices[1].find("Q3"), std::string::npos);

  const Table& q4 = e.tables[1];
  ASSERT_EQ(q4.rows.size(), 2u);
  EXPECT_EQ(q4.rows[0].section, "Single-hop");
  EXPECT_FALSE(q4.rows[0].values[3].has_value());
  EXPECT_EQ(q4.rows[1].section, "Multiple single-hop");
  EXPECT_NEAR(*q4.rows[1].values[4], (0.65 + 0.65 / 7) / 2, 1e-12);

  const Table& q1 = e.tables[0];
  EXPECT_EQ(q1.rows[0].section, "Raw extracted");
  EXPECT_EQ(q1.rows[0].label, "deberta");
  EXPECT_EQ(q1.rows[2].label, "Combined");
  EXPECT_THROW(emit_tables(MetricReport{}), EvaluationError);
}

TEST(Tables, TextAgreesWithJsonToThreeDecimals) {
  const EmittedTables e = emit_tables(sample_report());
  const std::string text = render_text(e);
  const nlohmann::json j = to_json(e);
  std::istringstream lines(text);
  std::vector<std::string> all;
  for (std::string l; std::getline(lines, l);) all.push_back(l);
  for (const auto& t : j.at("tables")) {
    for (const auto& r : t.at("rows")) {
      const std::string label = r.at("label");
      std::string expected;
      for (const auto& v : r.at("values")) {
        if (!v.is_null()) expected += fixed3(v.get<double>()) + " ";
      }
      bool found = false;
      for (const auto& l : all) {
        if (l.find(label) == std::string::npos) continue;
        std::istringstream cells(l.substr(l.find(label) + label.size()));
        std::string got;
        for (std::string c; cells >> c;) got += c + " ";
        if (got == expected) found = true;
      }
      EXPECT_TRUE(found) << label << ": " << expected << "\n" << text;
    }
  }
  EXPECT_NE(text.find("tau = 0.800"), std::string::npos);
}

TEST(Tables, ReEmissionIsByteIdentical) {
  const MetricReport r = sample_report();
  const MetricReport back = metric_report_from_json(to_json(r));
  EXPECT_EQ(render_text(emit_tables(back)), render_text(emit_tables(r)));
  EXPECT_EQ(to_json(emit_tables(back)).dump(), to_json(emit_tables(r)).dump());
}

TEST(Descriptives, Rows) {
  using Docs = std::vector<std::vector<std::string>>;
  const Docs empty(4);
  const DescriptiveRow e = describe_answers("Gold", empty, true);
  EXPECT_DOUBLE_EQ(e.pct_empty, 100.0);
  EXPECT_DOUBLE_EQ(e.mean_spans, 0.0);

  const Docs docs{{"LDA", "support vector machines"}, {}, {"random forest"}};
  const DescriptiveRow n = describe_answers("x", docs, true);
  EXPECT_DOUBLE_EQ(n.mean_spans, 1.5);
  EXPECT_DOUBLE_EQ(n.words_per_span, (2.0 + 2.0) / 2);
  EXPECT_DOUBLE_EQ(n.total_words, 3.0);
  EXPECT_NEAR(n.pct_empty, 100.0 / 3, 1e-12);
  const DescriptiveRow all = describe_answers("x", docs, false);
  EXPECT_DOUBLE_EQ(all.mean_spans, 1.0);
  EXPECT_DOUBLE_EQ(all.total_words, 2.0);
}

TEST(Descriptives, FixtureCorpusGold) {
  const Corpus c = load_corpus(testsupport::corpus5_dir());
  const auto q2 = emit_descriptives(c, Qid::Q2, {});
  ASSERT_EQ(q2.size(), 1u);
  EXPECT_EQ(q2[0].n_docs, 5u);
  EXPECT_DOUBLE_EQ(q2[0].pct_empty, 40.0);
  const std::string text = render_descriptives(Qid::Q2, q2, true);
  EXPECT_NE(text.find("Gold"), std::string::npos);
}

TEST(Conformance, InProcessMockServerPasses) {
  auto model = std::make_shared<MockModel>(3, MockTable::load(testsupport::fixtures_dir() / "mock_table.json"));
  TransportServer server(model, 0);
  HttpTransport http(server.url(), {});
  ConformanceOptions o;
  o.contexts = 60;
  const auto results = run_conformance(http, o);
  EXPECT_EQ(results.size(), 8u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

namespace {

// Contract-breaking server: reports offsets in bytes instead of code points.
class ByteOffsets final : public Transport {
 public:
  explicit ByteOffsets(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}
  json post(Capability cap, const std::string& model, const json& req) override {
    json out = inner_->post(cap, model, req);
    if (cap == Capability::extractive_qa) {
      const text::Utf8Text ctx(req.at("context").get<std::string>());
      for (auto& a : out["answers"]) {
        a["start"] = ctx.byte_offset(a["start"].get<std::size_t>());
        a["end"] = ctx.byte_offset(a["end"].get<std::size_t>());
      }
    }
    return out;
  }

 private:
  std::shared_ptr<Transport> inner_;
};

}  // namespace

TEST(Conformance, DetectsByteOffsets) {
  MockTable t;
  t.rules.push_back({"", "LDA", 0.9, {}});
  ByteOffsets bad(std::make_shared<MockModel>(0, t));
  bool offsets_failed = false;
  for (const auto& r : run_conformance(bad)) {
    if (r.name == "extractive_qa.offsets") offsets_failed = !r.passed;
  }
  EXPECT_TRUE(offsets_failed);
}

TEST(Conformance, CliAgainstMockServe) {
  int out[2];
  ASSERT_EQ(pipe(out), 0);
  const std::string cli = testsupport::cli_path().string();
  const std::string table = (testsupport::fixtures_dir() / "mock_table.json").string();
  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    dup2(out[1], STDOUT_FILENO);
    close(out[0]);
    close(out[1]);
    execl(cli.c_str(), cli.c_str(), "-q", "mock-serve", "--port", "0", "--table", table.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }
  close(out[1]);
  std::string url;
  char c;
  while (read(out[0], &c, 1) == 1 && c != '\n') url += c;
  close(out[0]);
  ASSERT_TRUE(url.starts_with("http://")) << url;
  const auto r = testsupport::run_cli("conformance --endpoint " + url + " --contexts 40");
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 8) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos) << r.output;
  EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
}
