#include <gtest/gtest.h>

#include <random>
#include <set>

#include "docpipe/backend/mock.hpp"
#include "docpipe/ensemble.hpp"
#include "docpipe/error.hpp"
#include "docpipe/multihop.hpp"
#include "docpipe/rag.hpp"
#include "docpipe/refinement.hpp"
#include "support.hpp"

using namespace docpipe;
using namespace docpipe::backend;
using testsupport::make_doc;
using testsupport::make_span;

namespace {

std::shared_ptr<BackendClient> client(std::shared_ptr<Transport> t, const std::string& model, Capability cap) {
  BackendDescriptor d;
  d.model_id = model;
  d.capability = cap;
  return std::make_shared<BackendClient>(d, std::move(t));
}

std::shared_ptr<BackendClient> echo_generator(MockTable t = {}) {
  return client(std::make_shared<MockModel>(0, std::move(t)), "llama", Capability::generate);
}

AnswerSet set_of(const std::string& doc, Qid q, std::vector<std::pair<std::string, double>> answers) {
  AnswerSet s{doc, q, {}, false, false};
  for (auto& [t, score] : answers) s.answers.push_back(Answer{t, score, {}, {}});
  s.empty_means_unanswerable = s.answers.empty() && q == Qid::Q2;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- rag

TEST(RagPrompt, ListsEvidenceAndIsDeterministic) {
  const std::vector<std::string> ev{"latent dirichlet allocation topic models", "LDA"};
  const RagPrompt p = build_entity_prompt(EntityKind::techniques, ev);
  for (const auto& e : ev) EXPECT_NE(p.rendered.find(e), std::string::npos);
  EXPECT_NE(p.rendered.find("1. latent dirichlet allocation topic models\n2. LDA"), std::string::npos);
  EXPECT_EQ(build_entity_prompt(EntityKind::techniques, ev).rendered, p.rendered);
  EXPECT_EQ(p.evidence, ev);
}

TEST(RagPrompt, SoftwarePermitsNone) {
  const std::vector<std::string> ev{"we used the sklearn package"};
  const RagPrompt p = build_entity_prompt(EntityKind::software, ev);
  EXPECT_NE(p.rendered.find("'none'"), std::string::npos);
  EXPECT_NE(p.rendered.find("we used the sklearn package"), std::string::npos);
}

TEST(RagPrompt, EmptyEvidenceAndTemplates) {
  EXPECT_THROW(build_entity_prompt(EntityKind::software, std::vector<std::string>{}), PreconditionError);
  RagOptions o;
  o.templates[EntityKind::techniques] = "Items:\n{evidence}\nDone.";
  const std::vector<std::string> ev{"a  b\nc"};
  EXPECT_EQ(build_entity_prompt(EntityKind::techniques, ev, o).rendered, "Items:\n1. a b c\nDone.");
  EXPECT_NO_THROW(validate(o));
  o.templates[EntityKind::software] = "no placeholder";
  EXPECT_THROW(validate(o), ValidationError);
}

TEST(ParseEntityList, Examples) {
  using V = std::vector<std::string>;
  EXPECT_EQ(parse_entity_list("1. LDA\n2. SVM", false), (V{"LDA", "SVM"}));
  EXPECT_EQ(parse_entity_list("None", true), V{});
  EXPECT_EQ(parse_entity_list("- XGBoost\n- XGBoost", false), (V{"XGBoost"}));
  EXPECT_EQ(parse_entity_list("* (LDA),\n+ \"BERT\"\n(3) k-means\n4) SVM.", false),
            (V{"LDA", "BERT", "k-means", "SVM"}));
  EXPECT_EQ(parse_entity_list("1. Python\n2. none", true), (V{"Python"}));
  EXPECT_EQ(parse_entity_list("No software is mentioned.", true), V{});
  EXPECT_THROW(parse_entity_list("None", false), StageError);
  EXPECT_THROW(parse_entity_list("\n - \n...", true), StageError);
  EXPECT_THROW(parse_entity_list("", false), StageError);
}

TEST(ParseEntityList, NeverReturnsEmptyEntries) {
  std::mt19937_64 rng(11);
  const char* const pieces[] = {"1. ", "- ", "* ", "", "  ", "...", "LDA", "(SVMs)", "none", "\n", "—"};
  for (int i = 0; i < 300; ++i) {
    std::string g;
    for (int k = 0; k < 8; ++k) g += pieces[rng() % std::size(pieces)];
    try {
      for (const auto& e : parse_entity_list(g, true)) {
        EXPECT_FALSE(text::trim(e).empty());
        EXPECT_EQ(trim_special(e), e);
      }
    } catch (const StageError&) {
    }
  }
}

TEST(Rag, EchoOracle) {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 100; ++iter) {
    std::string body;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      if (!body.empty()) body += " ; ";
      const std::string phrase = testsupport::random_phrase(rng, 1, 4);
      const std::size_t start = text::length(body);
      body += phrase;
      ranges.emplace_back(start, text::length(body));
    }
    const Document d = make_doc("d", body);
    std::vector<Span> raw;
    for (auto [s, e] : ranges) raw.push_back(make_span(d, s, e, 0.5));
    std::vector<std::string> expected_in;
    for (const auto& s : raw) {
      const std::string t = trim_special(text::collapse_whitespace(s.text));
      if (!t.empty()) expected_in.push_back(t);
    }
    const auto expected = dedup_answers(expected_in);
    try {
      const RagResult r = rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator());
      EXPECT_EQ(r.answers.texts(), expected) << body;
    } catch (const StageError&) {
      EXPECT_TRUE(expected.empty()) << body;
    }
  }
}

TEST(Rag, CanonicalizationAndProvenance) {
  MockTable t;
  t.canonical = {{"gradient boosting", "XGBoost"}, {"XGB", "XGBoost"}, {"LDA", "LDA"}};
  const Document d = make_doc("d", "extreme gradient boosting trees and XGB then LDA");
  const std::vector<Span> raw{make_span(d, 0, 31, 0.6), make_span(d, 36, 39, 0.8), make_span(d, 45, 48, 0.4)};
  const RagResult r = rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator(t));
  ASSERT_TRUE(r.prompt.has_value());
  EXPECT_EQ(r.answers.texts(), (std::vector<std::string>{"XGBoost", "LDA"}));
  // "XGBoost" contains the span text "XGB"; the long form matches neither way.
  ASSERT_EQ(r.answers.answers[0].provenance.spans.size(), 1u);
  EXPECT_EQ(r.answers.answers[0].provenance.spans[0].text, "XGB");
  EXPECT_DOUBLE_EQ(r.answers.answers[0].score, 0.8);
  EXPECT_EQ(r.answers.answers[1].provenance.spans[0].text, "LDA");
  EXPECT_TRUE(r.generation_id.starts_with("gen:"));

  MockTable canned;
  canned.canned.push_back({"Evidence:", "1. Random Forests"});
  const RagResult g = rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator(canned));
  ASSERT_EQ(g.answers.answers.size(), 1u);
  EXPECT_TRUE(g.answers.answers[0].provenance.spans.empty());
  EXPECT_EQ(g.answers.answers[0].provenance.generation_ids, std::vector<std::string>{g.generation_id});
}

TEST(Rag, SoftwareNoneIsValidEmpty) {
  MockTable t;
  t.canned.push_back({"Evidence:", "None."});
  const Document d = make_doc("d", "we used the survey data");
  const std::vector<Span> raw{make_span(d, 12, 18, 0.3)};
  const RagResult r = rag_enhance(d, default_question_spec(Qid::Q2), raw, *echo_generator(t));
  EXPECT_TRUE(r.answers.answers.empty());
  EXPECT_TRUE(r.answers.empty_means_unanswerable);
  EXPECT_THROW(rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator(t)), StageError);
  EXPECT_THROW(rag_enhance(d, default_question_spec(Qid::Q3), raw, *echo_generator(t)), PreconditionError);
}

TEST(Rag, EmptyEvidenceSkipsBackend) {
  auto counting = std::make_shared<testsupport::CountingTransport>(std::make_shared<MockModel>(0, MockTable{}));
  auto gen = client(counting, "llama", Capability::generate);
  const Document d = make_doc("d", "text");
  const RagResult q2 = rag_enhance(d, default_question_spec(Qid::Q2), std::vector<Span>{}, *gen);
  EXPECT_TRUE(q2.answers.empty_means_unanswerable);
  EXPECT_FALSE(q2.prompt.has_value());
  const RagResult q1 = rag_enhance(d, default_question_spec(Qid::Q1), std::vector<Span>{}, *gen);
  EXPECT_TRUE(q1.answers.forced_empty);
  EXPECT_EQ(counting->calls(Capability::generate), 0u);
}

TEST(Rag, ByteStableAcrossRuns) {
  const Document d = make_doc("d", "We used LDA and SVMs.");
  const std::vector<Span> raw{make_span(d, 8, 11, 0.9), make_span(d, 16, 20, 0.5)};
  const auto a = rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator());
  const auto b = rag_enhance(d, default_question_spec(Qid::Q1), raw, *echo_generator());
  EXPECT_EQ(a.answers, b.answers);
  EXPECT_EQ(a.generation, b.generation);
}

// ---------------------------------------------------------------- multihop

TEST(Subquestions, TemplateInstantiation) {
  const std::vector<std::string> bridges{"LDA", "SVM"};
  const auto sq = make_subquestions(kDefaultSubquestionTemplate, bridges);
  ASSERT_EQ(sq.size(), 2u);
  EXPECT_EQ(sq[0].text, "What was LDA used for?");
  EXPECT_EQ(sq[1].text, "What was SVM used for?");
  EXPECT_EQ(sq[0].parent_qid, Qid::Q4);
  EXPECT_EQ(sq[0].subquestion_id, subquestion_id("LDA"));
  EXPECT_NE(sq[0].subquestion_id, sq[1].subquestion_id);
  EXPECT_TRUE(sq[0].subquestion_id.starts_with("sq-"));
  EXPECT_TRUE(make_subquestions(kDefaultSubquestionTemplate, std::vector<std::string>{}).empty());
  EXPECT_THROW(make_subquestions("What was it used for?", bridges), PreconditionError);
  EXPECT_THROW(make_subquestions(kDefaultSubquestionTemplate, std::vector<std::string>{"a", "a"}),
               PreconditionError);
}

TEST(Bridges, FromQ1Answers) {
  const AnswerSet q1 = set_of("d", Qid::Q1, {{"LDA", 0.9}, {"SVM", 0.5}, {"LDA", 0.4}, {"BERT", 0.3}});
  EXPECT_EQ(bridges_from(q1), (std::vector<std::string>{"LDA", "SVM", "BERT"}));
  EXPECT_EQ(bridges_from(q1, 2), (std::vector<std::string>{"LDA", "SVM"}));
}

namespace {

struct MultihopFixture {
  Document doc = make_doc("d", "LDA grouped posts into topics. SVM sorted users. LDA also sped up coding. "
                               "Nothing else here.");
  std::shared_ptr<BackendClient> ex;
  MultihopFixture() {
    MockTable t;
    t.rules.push_back({"What was LDA used for", "grouped posts into topics", 0.9, {}});
    t.rules.push_back({"What was LDA used for", "sped up coding", 0.5, {}});
    t.rules.push_back({"What was SVM used for", "sorted users", 0.8, {}});
    t.rules.push_back({"What was SVM used for", "grouped posts", 0.3, {}});
    t.rules.push_back({"techniques used for", "Nothing else here", 0.2, {}});
    ex = client(std::make_shared<MockModel>(0, t), "deberta", Capability::extractive_qa);
  }
};

}  // namespace

TEST(Multihop, BoundsAndProvenance) {
  MultihopFixture f;
  const std::vector<std::string> bridges{"LDA", "SVM"};
  MultihopOptions o;
  o.topk_per_sub = 1;
  const auto r = answer_multihop(f.doc, default_question_spec(Qid::Q4), bridges, *f.ex, o);
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.subquestions.size(), 2u);
  ASSERT_EQ(r.pre_merge.size(), 2u);
  EXPECT_EQ(r.pre_merge[0].text, "grouped posts into topics");
  EXPECT_EQ(r.pre_merge[0].subquestion_id, subquestion_id("LDA"));
  EXPECT_EQ(r.pre_merge[1].subquestion_id, subquestion_id("SVM"));
  EXPECT_EQ(r.answers.answers.size(), 2u);
}

TEST(Multihop, TopKPrefixBeforeMerging) {
  MultihopFixture f;
  const std::vector<std::string> bridges{"LDA", "SVM"};
  MultihopOptions k1, k3;
  k1.topk_per_sub = 1;
  k3.topk_per_sub = 3;
  const auto a = answer_multihop(f.doc, default_question_spec(Qid::Q4), bridges, *f.ex, k1);
  const auto b = answer_multihop(f.doc, default_question_spec(Qid::Q4), bridges, *f.ex, k3);
  EXPECT_LE(b.pre_merge.size(), bridges.size() * 3);
  for (const auto& s : a.pre_merge) {
    EXPECT_NE(std::find(b.pre_merge.begin(), b.pre_merge.end(), s), b.pre_merge.end()) << s.text;
  }
  // "grouped posts" (SVM) nests inside "grouped posts into topics" (LDA): the
  // union merges across sub-questions.
  EXPECT_EQ(b.pre_merge.size(), 4u);
  EXPECT_EQ(b.answers.answers.size(), 3u);
}

TEST(Multihop, ZeroBridgesFallsBackToBaseline) {
  MultihopFixture f;
  MultihopOptions o;
  const auto r = answer_multihop(f.doc, default_question_spec(Qid::Q4), std::vector<std::string>{}, *f.ex, o);
  EXPECT_TRUE(r.fallback);
  EXPECT_TRUE(r.subquestions.empty());
  EXPECT_EQ(r.answers.texts(), std::vector<std::string>{"Nothing else here"});
  const auto base = single_hop_baseline(f.doc, default_question_spec(Qid::Q4), *f.ex, o);
  EXPECT_FALSE(base.fallback);
  EXPECT_EQ(base.answers, r.answers);
  EXPECT_LE(base.pre_merge.size(), 10u);
}

TEST(Multihop, BaselineForcedEmpty) {
  const Document d = make_doc("d", "no keywords at all");
  auto ex = client(std::make_shared<MockModel>(0, MockTable{}), "deberta", Capability::extractive_qa);
  const auto r = single_hop_baseline(d, default_question_spec(Qid::Q4), *ex, {});
  EXPECT_TRUE(r.answers.forced_empty);
}

TEST(Multihop, FailureNamesSubquestion) {
  MultihopFixture f;
  auto failing = std::make_shared<testsupport::FailingTransport>(
      std::make_shared<MockModel>(0, MockTable{}), Capability::extractive_qa);
  auto ex = client(failing, "deberta", Capability::extractive_qa);
  const std::vector<std::string> bridges{"LDA"};
  try {
    answer_multihop(f.doc, default_question_spec(Qid::Q4), bridges, *ex, {});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find(subquestion_id("LDA")), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------- ensemble

TEST(Ensemble, UnionExamples) {
  const AnswerSet a = set_of("d", Qid::Q1, {{"a", 0.9}, {"b", 0.5}});
  const AnswerSet b = set_of("d", Qid::Q1, {{"b", 0.7}, {"c", 0.6}});
  const std::vector<AnswerSet> sets{a, b};
  const AnswerSet c = combine(sets);
  EXPECT_EQ(c.texts(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_DOUBLE_EQ(c.answers[1].score, 0.7);
  EXPECT_GE(c.answers.size(), a.answers.size());
  EXPECT_GE(c.answers.size(), b.answers.size());

  const std::vector<AnswerSet> empties{set_of("d", Qid::Q2, {}), set_of("d", Qid::Q2, {})};
  const AnswerSet e = combine(empties);
  EXPECT_TRUE(e.answers.empty());
  EXPECT_TRUE(e.empty_means_unanswerable);
  EXPECT_FALSE(e.forced_empty);
}

TEST(Ensemble, FoldedDuplicatesBecomeVariants) {
  const std::vector<AnswerSet> sets{set_of("d", Qid::Q1, {{"SVMs", 0.4}}), set_of("d", Qid::Q1, {{"svms.", 0.8}})};
  const AnswerSet c = combine(sets);
  ASSERT_EQ(c.answers.size(), 1u);
  EXPECT_EQ(c.answers[0].text, "svms.");
  EXPECT_EQ(c.answers[0].variants, std::vector<std::string>{"SVMs"});
  EXPECT_EQ(c.surface_forms(), (std::vector<std::string>{"svms.", "SVMs"}));
}

TEST(Ensemble, TiesByMemberThenText) {
  const std::vector<AnswerSet> sets{set_of("d", Qid::Q3, {{"z", 0.5}}), set_of("d", Qid::Q3, {{"y", 0.5}, {"x", 0.5}})};
  EXPECT_EQ(combine(sets).texts(), (std::vector<std::string>{"z", "x", "y"}));
}

TEST(Ensemble, Preconditions) {
  const std::vector<AnswerSet> bad{set_of("d", Qid::Q1, {}), set_of("e", Qid::Q1, {})};
  EXPECT_THROW(combine(bad), PreconditionError);
  const std::vector<AnswerSet> bad_q{set_of("d", Qid::Q1, {}), set_of("d", Qid::Q3, {})};
  EXPECT_THROW(combine(bad_q), PreconditionError);
  EXPECT_THROW(combine(std::vector<AnswerSet>{}), PreconditionError);
  EXPECT_THROW(validate(EnsembleSpec{Qid::Q1, {"deberta"}, "Combined"}), ValidationError);
  EXPECT_THROW(validate(EnsembleSpec{Qid::Q1, {"deberta", "deberta"}, "Combined"}), ValidationError);
  EXPECT_EQ(default_ensemble_spec(Qid::Q1).member_model_ids, (std::vector<std::string>{"deberta", "albert"}));
  EXPECT_EQ(default_ensemble_spec(Qid::Q2).member_model_ids, (std::vector<std::string>{"electra", "roberta"}));
  EXPECT_EQ(default_ensemble_spec(Qid::Q3).member_model_ids, (std::vector<std::string>{"deberta", "albert"}));
  EXPECT_TRUE(default_ensemble_spec(Qid::Q4).member_model_ids.empty());
}
