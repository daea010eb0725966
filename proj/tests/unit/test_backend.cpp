#include <gtest/gtest.h>

#include <random>

#include "docpipe/backend/client.hpp"
#include "docpipe/backend/mock.hpp"
#include "docpipe/backend/protocol.hpp"
#include "docpipe/backend/transport.hpp"
#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "support.hpp"

using namespace docpipe;
using namespace docpipe::backend;
using testsupport::TempDir;

namespace {

MockTable lda_table(std::optional<double> score = 0.9) {
  MockTable t;
  t.rules.push_back({"techniques", "LDA", score, {}});
  return t;
}

std::shared_ptr<BackendClient> client(std::shared_ptr<Transport> t, const std::string& model,
                                      Capability cap, std::size_t max_context = 0) {
  BackendDescriptor d;
  d.model_id = model;
  d.capability = cap;
  d.max_context = max_context;
  return std::make_shared<BackendClient>(d, std::move(t));
}

const std::string kQ1 = "What machine learning or natural language processing techniques were used?";

class FlakyTransport final : public Transport {
 public:
  FlakyTransport(std::shared_ptr<Transport> inner, int failures)
      : inner_(std::move(inner)), failures_(failures) {}
  json post(Capability cap, const std::string& m, const json& r) override {
    ++calls;
    if (failures_-- > 0) throw BackendError("temporarily unavailable");
    return inner_->post(cap, m, r);
  }
  std::atomic<int> calls{0};

 private:
  std::shared_ptr<Transport> inner_;
  std::atomic<int> failures_;
};

}  // namespace

TEST(Protocol, RoundTripRandomMessages) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    ExtractiveRequest rq{testsupport::random_phrase(rng, 1, 8), testsupport::random_phrase(rng, 0, 30),
                         1 + static_cast<int>(rng() % 20)};
    EXPECT_EQ(decode_extractive_request(encode(rq)), rq);
    EXPECT_EQ(encode(decode_extractive_request(encode(rq))), encode(rq));
    ExtractiveResult rs;
    for (int k = 0; k < static_cast<int>(rng() % 4); ++k) {
      rs.answers.push_back({testsupport::random_phrase(rng, 1, 3), rng() % 50, 50 + rng() % 50,
                            static_cast<double>(rng() % 1000) / 1000.0});
    }
    EXPECT_EQ(decode_extractive_result(encode(rs)), rs);
    GenerateRequest g{testsupport::random_phrase(rng, 0, 20), 1 + static_cast<int>(rng() % 300),
                      static_cast<double>(rng() % 10) / 10.0};
    EXPECT_EQ(decode_generate_request(encode(g)), g);
    GenerateResponse gr{testsupport::random_phrase(rng, 0, 10)};
    EXPECT_EQ(decode_generate_response(encode(gr)), gr);
    EmbedRequest er{{testsupport::random_phrase(rng, 1, 3), "模型"}};
    EXPECT_EQ(decode_embed_request(encode(er)), er);
    EmbedResponse ers{{{0.5, -0.25}, {1.0, 0.0}}};
    EXPECT_EQ(decode_embed_response(encode(ers)), ers);
  }
}

TEST(Protocol, MalformedMessagesCarryExcerpt) {
  try {
    decode_extractive_result(json{{"answers", {{{"text", "x"}, {"start", "zero"}}}}});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("zero"), std::string::npos);
  }
  EXPECT_THROW(decode_generate_response(json::array()), ProtocolError);
  EXPECT_THROW(decode_embed_request(json{{"texts", "a"}}), ProtocolError);
  EXPECT_EQ(parse_capability("embed"), Capability::embed);
  EXPECT_EQ(endpoint_path(Capability::extractive_qa), "/v1/extractive_qa");
}

TEST(Protocol, DigestIgnoresKeyOrder) {
  const json a = json::parse(R"({"question":"q","context":"c","top_k":3})");
  const json b = json::parse(R"({"top_k":3,"context":"c","question":"q"})");
  EXPECT_EQ(request_digest(a), request_digest(b));
  EXPECT_NE(request_digest(a), request_digest(json{{"question", "q"}, {"context", "c"}, {"top_k", 4}}));
}

TEST(Mock, KeywordTableExample) {
  auto m = std::make_shared<MockModel>(0, lda_table());
  const auto r = client(m, "deberta", Capability::extractive_qa)->extract_spans(kQ1, "We used LDA.", 3);
  ASSERT_EQ(r.answers.size(), 1u);
  EXPECT_EQ(r.answers[0], (ExtractiveAnswer{"LDA", 8, 11, 0.9}));
}

TEST(Mock, AbsentKeywordAndWordBoundaries) {
  auto m = std::make_shared<MockModel>(0, lda_table());
  auto c = client(m, "deberta", Capability::extractive_qa);
  EXPECT_TRUE(c->extract_spans(kQ1, "Nothing relevant.", 3).answers.empty());
  EXPECT_TRUE(c->extract_spans(kQ1, "LDAX and xLDA", 3).answers.empty());
  EXPECT_TRUE(c->extract_spans("Which software?", "We used LDA.", 3).answers.empty());
}

TEST(Mock, ModelRestrictionAndTopK) {
  MockTable t;
  t.rules.push_back({"", "LDA", 0.9, {"albert"}});
  t.rules.push_back({"", "SVM", 0.5, {}});
  auto m = std::make_shared<MockModel>(1, t);
  const std::string ctx = "LDA then SVM then LDA";
  EXPECT_EQ(client(m, "albert", Capability::extractive_qa)->extract_spans("q", ctx, 5).answers.size(), 3u);
  EXPECT_EQ(client(m, "bert", Capability::extractive_qa)->extract_spans("q", ctx, 5).answers.size(), 1u);
  const auto top2 = client(m, "albert", Capability::extractive_qa)->extract_spans("q", ctx, 2);
  ASSERT_EQ(top2.answers.size(), 2u);
  EXPECT_EQ(top2.answers[0].start, 0u);
  EXPECT_EQ(top2.answers[1].start, 18u);
}

TEST(Mock, DeterministicAcrossInstances) {
  MockTable t;
  t.rules.push_back({"", "LDA", std::nullopt, {}});
  MockModel a(42, t), b(42, t), c(43, t);
  const ExtractiveRequest rq{"q", "LDA and LDA", 2};
  EXPECT_EQ(a.extract("deberta", rq), b.extract("deberta", rq));
  EXPECT_NE(a.extract("deberta", rq).answers[0].score, a.extract("albert", rq).answers[0].score);
  const EmbedRequest e{{"support vector machine"}};
  EXPECT_EQ(a.embed(e), b.embed(e));
  EXPECT_NE(a.embed(e), c.embed(e));
}

TEST(Mock, ScoresInUnitInterval) {
  MockTable t;
  for (const char* k : {"a", "b", "c", "d", "e"}) t.rules.push_back({"", k, std::nullopt, {}});
  MockModel m(9, t);
  for (const auto& a : m.extract("x", {"q", "a b c d e", 10}).answers) {
    EXPECT_GE(a.score, 0.0);
    EXPECT_LE(a.score, 1.0);
  }
}

TEST(Mock, EmbeddingsUnitNormAndIdentity) {
  auto m = std::make_shared<MockModel>(5, MockTable{});
  auto c = client(m, "e5", Capability::embed);
  const std::vector<std::string> texts{"a", "a", "LDA", "!!!"};
  const auto v = c->embed(texts);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0], v[1]);
  for (const auto& x : v) {
    double n = 0;
    for (double d : x.values) n += d * d;
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
  EXPECT_NEAR(cosine(v[2], v[2]), 1.0, 1e-12);
  const std::vector<std::string> none;
  EXPECT_THROW(c->embed(none), PreconditionError);
}

TEST(Mock, GenerateCannedEchoAndCanonical) {
  MockTable t;
  t.canned.push_back({"CANNED", "1. fixed"});
  MockModel echo(0, t);
  EXPECT_EQ(echo.generate({"x CANNED y", 256, 0}).text, "1. fixed");
  EXPECT_EQ(echo.generate({"Evidence:\n1. LDA\n2. SVM\n2. SVM\n\nAnswer:", 256, 0}).text, "1. LDA\n2. SVM");
  EXPECT_EQ(echo.generate({"no evidence", 256, 0}).text, "none");
  t.canonical = {{"gradient boosting", "XGBoost"}, {"XGB", "XGBoost"}};
  MockModel canon(0, t);
  EXPECT_EQ(canon.generate({"Evidence:\n1. extreme gradient boosting trees\n2. XGB\n3. other\n", 256, 0}).text,
            "1. XGBoost");
}

TEST(Mock, TableJsonRoundTrip) {
  const MockTable t = MockTable::load(testsupport::fixtures_dir() / "mock_table.json");
  EXPECT_EQ(MockTable::from_json(t.to_json()).to_json(), t.to_json());
  EXPECT_THROW(MockTable::from_json(json{{"rules", {{{"keyword", ""}}}}}), ValidationError);
}

TEST(Client, PreconditionsAndValidation) {
  auto m = std::make_shared<MockModel>(0, lda_table());
  auto ex = client(m, "deberta", Capability::extractive_qa, 20);
  EXPECT_THROW(ex->extract_spans(kQ1, "We used LDA.", 0), ProtocolError);
  EXPECT_THROW(ex->extract_spans(kQ1, std::string(50, 'x'), 1), ContextOverflowError);
  EXPECT_THROW(ex->generate("p", 5, 0), PreconditionError);
  auto gen = client(m, "llama", Capability::generate, 10);
  EXPECT_THROW(gen->generate("a prompt that is far too long", 5, 0.0), ContextOverflowError);
  EXPECT_THROW(gen->generate("p", 5, -1.0), PreconditionError);

  class Lying final : public Transport {
   public:
    json post(Capability, const std::string&, const json&) override {
      return json{{"answers", {{{"text", "LDA"}, {"start", 0}, {"end", 3}, {"score", 0.5}}}}};
    }
  };
  auto liar = client(std::make_shared<Lying>(), "x", Capability::extractive_qa);
  EXPECT_THROW(liar->extract_spans("q", "We used LDA.", 1), ProtocolError);
}

TEST(Endpoint, ParseAndPrint) {
  EXPECT_EQ(Endpoint::parse("mock").kind, Endpoint::Kind::mock);
  EXPECT_EQ(Endpoint::parse("mock-http").kind, Endpoint::Kind::mock_http);
  const Endpoint r = Endpoint::parse("replay:/x/y.jsonl");
  EXPECT_EQ(r.kind, Endpoint::Kind::replay);
  EXPECT_EQ(r.target, "/x/y.jsonl");
  EXPECT_EQ(Endpoint::parse("http://127.0.0.1:8000").to_string(), "http://127.0.0.1:8000");
  EXPECT_THROW(Endpoint::parse("ftp:x"), ValidationError);
  EXPECT_THROW(Endpoint::parse("replay:"), ValidationError);
}

TEST(Replay, HitMissAndRecorder) {
  TempDir dir;
  auto m = std::make_shared<MockModel>(0, lda_table());
  auto recorder = std::make_shared<FixtureRecorder>();
  auto rec = std::make_shared<RecordingTransport>(m, recorder);
  const json rq = encode(ExtractiveRequest{kQ1, "We used LDA.", 3});
  const json live = rec->post(Capability::extractive_qa, "deberta", rq);
  EXPECT_EQ(recorder->size(), 1u);
  recorder->write(dir / "f.jsonl");

  ReplayTransport replay(dir / "f.jsonl");
  EXPECT_EQ(replay.size(), 1u);
  EXPECT_EQ(dump_canonical(replay.post(Capability::extractive_qa, "deberta", rq)), dump_canonical(live));
  try {
    replay.post(Capability::extractive_qa, "deberta", encode(ExtractiveRequest{kQ1, "We used LDA!", 3}));
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("replay key miss"), std::string::npos);
  }
  EXPECT_THROW(replay.post(Capability::extractive_qa, "albert", rq), ProtocolError);
  EXPECT_THROW(ReplayTransport(dir / "missing.jsonl"), LoadError);

  FixtureRecorder merged;
  merged.record(Capability::generate, "llama", json{{"prompt", "p"}}, json{{"text", "t"}});
  merged.load(dir / "f.jsonl");
  EXPECT_EQ(merged.size(), 2u);
}

TEST(Http, ServesAllCapabilities) {
  auto model = std::make_shared<MockModel>(0, lda_table());
  TransportServer server(model, 0);
  auto http = std::make_shared<HttpTransport>(server.url(), HttpTransport::Options{});
  const auto r = client(http, "deberta", Capability::extractive_qa)->extract_spans(kQ1, "We used LDA.", 3);
  ASSERT_EQ(r.answers.size(), 1u);
  EXPECT_EQ(r.answers[0].text, "LDA");
  EXPECT_EQ(client(http, "llama", Capability::generate)->generate("Evidence:\n1. x\n", 8, 0.0), "1. x");
  const std::vector<std::string> texts{"a"};
  EXPECT_EQ(client(http, "e5", Capability::embed)->embed(texts), client(model, "e5", Capability::embed)->embed(texts));
}

TEST(Http, RetriesServerErrorsNotClientErrors) {
  auto model = std::make_shared<MockModel>(0, lda_table());
  auto flaky = std::make_shared<FlakyTransport>(model, 2);
  TransportServer server(flaky, 0);
  HttpTransport::Options opts;
  opts.initial_backoff = std::chrono::milliseconds(1);
  HttpTransport http(server.url(), opts);
  const json rq = encode(ExtractiveRequest{kQ1, "We used LDA.", 3});
  EXPECT_NO_THROW(http.post(Capability::extractive_qa, "deberta", rq));
  EXPECT_EQ(flaky->calls.load(), 3);

  auto down = std::make_shared<FlakyTransport>(model, 100);
  TransportServer server2(down, 0);
  HttpTransport http2(server2.url(), opts);
  EXPECT_THROW(http2.post(Capability::extractive_qa, "deberta", rq), BackendError);
  EXPECT_EQ(down->calls.load(), 3);

  const int before = flaky->calls.load();
  EXPECT_THROW(http.post(Capability::extractive_qa, "deberta", json{{"question", 1}}), ProtocolError);
  EXPECT_EQ(flaky->calls.load(), before + 1);
}

TEST(Http, UnreachableServerIsBackendError) {
  HttpTransport::Options opts;
  opts.initial_backoff = std::chrono::milliseconds(1);
  opts.timeout = std::chrono::milliseconds(200);
  HttpTransport http("http://127.0.0.1:1", opts);
  EXPECT_THROW(http.post(Capability::embed, "e5", encode(EmbedRequest{{"a"}})), BackendError);
}
