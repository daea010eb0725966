#include "docpipe/conformance.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "docpipe/error.hpp"
#include "docpipe/backend/protocol.hpp"
#include "docpipe/text.hpp"

namespace docpipe {

namespace {

using backend::Capability;
using backend::json;

const char* const kWords[] = {
    "we",       "trained",  "a",         "support",  "vector",  "machine", "classifier", "on",
    "the",      "corpus",   "using",     "latent",   "dirichlet", "allocation", "and",   "BERT",
    "embeddings", "naïve",  "Bayes",     "café",     "模型",     "données", "résumé",     "LDA",
    "topic",    "models",   "(SVMs)",    "XGBoost",  "random",  "forest",  "were",       "used",
    "to",       "classify", "posts,",    "tweets.",  "—",       "über",    "12",         "λ",
};

std::string random_context(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(5, 80);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += (rng() % 9 == 0) ? "  " : " ";
    s += kWords[pick(rng)];
  }
  return s;
}

json call(backend::Transport& t, Capability cap, const std::string& model, const json& req) {
  return t.post(cap, model, req);
}

CheckResult check(const std::string& name, const std::function<std::string()>& body) {
  CheckResult r{name, false, ""};
  try {
    r.detail = body();
    r.passed = true;
  } catch (const std::exception& e) {
    r.detail = e.what();
  }
  return r;
}

[[noreturn]] void fail(const std::string& msg) { throw ProtocolError(msg); }

void validate_extractive(const backend::ExtractiveResult& r, int top_k) {
  if (r.answers.size() > static_cast<std::size_t>(top_k)) {
    fail(std::to_string(r.answers.size()) + " answers for top_k " + std::to_string(top_k));
  }
  for (std::size_t i = 0; i < r.answers.size(); ++i) {
    const auto& a = r.answers[i];
    if (!(a.score >= 0.0 && a.score <= 1.0)) fail("score outside [0,1]: " + std::to_string(a.score));
    if (i > 0 && a.score > r.answers[i - 1].score) fail("scores are not non-increasing");
    if (a.start >= a.end) fail("empty or inverted span");
  }
}

}  // namespace

std::vector<CheckResult> run_conformance(backend::Transport& t, const ConformanceOptions& opts) {
  std::vector<CheckResult> out;
  const std::string question = "What machine learning or natural language processing techniques were used?";
  const std::string context =
      "We trained a support vector machine and latent dirichlet allocation topic models on the "
      "corpus, then compared them with BERT embeddings and XGBoost.";
  const json ex_req = backend::encode(backend::ExtractiveRequest{question, context, 5});

  out.push_back(check("extractive_qa.schema", [&] {
    const auto r = backend::decode_extractive_result(call(t, Capability::extractive_qa, opts.extractive_model, ex_req));
    validate_extractive(r, 5);
    return std::to_string(r.answers.size()) + " answer(s)";
  }));

  out.push_back(check("extractive_qa.offsets", [&] {
    std::mt19937_64 rng(opts.seed);
    std::size_t answers = 0;
    for (std::size_t i = 0; i < opts.contexts; ++i) {
      const std::string ctx = random_context(rng);
      const int k = 1 + static_cast<int>(rng() % 5);
      const json j = call(t, Capability::extractive_qa, opts.extractive_model,
                          backend::encode(backend::ExtractiveRequest{question, ctx, k}));
      const auto r = backend::decode_extractive_result(j);
      validate_extractive(r, k);
      const text::Utf8Text u(ctx);
      for (const auto& a : r.answers) {
        if (a.end > u.size()) fail("offset past end of context " + std::to_string(i));
        if (u.slice(a.start, a.end) != a.text) {
          fail("context " + std::to_string(i) + ": [" + std::to_string(a.start) + "," +
               std::to_string(a.end) + ") slices to '" + u.slice(a.start, a.end) + "', not '" +
               a.text + "'");
        }
        ++answers;
      }
    }
    if (answers == 0) fail("no answers on any context; offsets were never exercised");
    return std::to_string(answers) + " answer(s) over " + std::to_string(opts.contexts) + " contexts";
  }));

  out.push_back(check("extractive_qa.determinism", [&] {
    const json a = call(t, Capability::extractive_qa, opts.extractive_model, ex_req);
    const json b = call(t, Capability::extractive_qa, opts.extractive_model, ex_req);
    if (a != b) fail("identical requests gave different responses");
    return std::string("stable");
  }));

  const json gen_req = backend::encode(backend::GenerateRequest{
      "List the techniques in: support vector machines, LDA.\n\nEvidence:\n1. support vector machines\n2. LDA\n",
      32, 0.0});
  out.push_back(check("generate.schema", [&] {
    const auto r = backend::decode_generate_response(call(t, Capability::generate, opts.generate_model, gen_req));
    if (!text::is_valid_utf8(r.text)) fail("generation is not valid UTF-8");
    return std::to_string(r.text.size()) + " byte(s)";
  }));
  out.push_back(check("generate.determinism", [&] {
    const json a = call(t, Capability::generate, opts.generate_model, gen_req);
    const json b = call(t, Capability::generate, opts.generate_model, gen_req);
    if (a != b) fail("temperature 0 generations differ");
    return std::string("stable");
  }));

  out.push_back(check("embed.schema", [&] {
    const json req = backend::encode(backend::EmbedRequest{{"a", "support vector machine", "模型"}});
    const auto r = backend::decode_embed_response(call(t, Capability::embed, opts.embed_model, req));
    if (r.embeddings.size() != 3) fail("expected 3 embeddings, got " + std::to_string(r.embeddings.size()));
    const std::size_t dim = r.embeddings.front().size();
    if (dim == 0) fail("empty embedding");
    for (const auto& v : r.embeddings) {
      if (v.size() != dim) fail("inconsistent embedding dimensions");
      double norm = 0.0;
      for (double x : v) {
        if (!std::isfinite(x)) fail("non-finite embedding value");
        norm += x * x;
      }
      if (norm == 0.0) fail("zero embedding");
    }
    return "dimension " + std::to_string(dim);
  }));
  out.push_back(check("embed.determinism", [&] {
    const json req = backend::encode(backend::EmbedRequest{{"a"}});
    const json a = call(t, Capability::embed, opts.embed_model, req);
    const json b = call(t, Capability::embed, opts.embed_model, req);
    if (a != b) fail("embed(\"a\") differs between calls");
    return std::string("stable");
  }));

  out.push_back(check("protocol.rejects_malformed", [&] {
    try {
      call(t, Capability::extractive_qa, opts.extractive_model, json{{"question", 1}});
    } catch (const ProtocolError& e) {
      return std::string("rejected: ") + e.what();
    }
    fail("malformed request was accepted");
  }));
  return out;
}

}  // namespace docpipe
