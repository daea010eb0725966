#include "docpipe/backend/client.hpp"

#include <algorithm>
#include <cmath>

#include "docpipe/error.hpp"
#include "docpipe/text.hpp"

namespace docpipe::backend {

Endpoint Endpoint::parse(std::string_view s) {
  if (s == "mock") return {Kind::mock, ""};
  if (s == "mock-http") return {Kind::mock_http, ""};
  if (s.starts_with("replay:")) {
    if (s.size() == 7) throw ValidationError("replay endpoint needs a fixture path");
    return {Kind::replay, std::string(s.substr(7))};
  }
  if (s.starts_with("http://") || s.starts_with("https://")) return {Kind::http, std::string(s)};
  throw ValidationError("unrecognized endpoint '" + std::string(s) + "'");
}

std::string Endpoint::to_string() const {
  switch (kind) {
    case Kind::mock: return "mock";
    case Kind::mock_http: return "mock-http";
    case Kind::replay: return "replay:" + target;
    case Kind::http: return target;
  }
  return "?";
}

void validate(const BackendDescriptor& d) {
  if (d.model_id.empty()) throw ValidationError("backend model_id is empty");
  if (d.timeout.count() <= 0) throw ValidationError("backend '" + d.model_id + "': timeout must be > 0");
  if (d.concurrency < 1 || d.concurrency > 1024) {
    throw ValidationError("backend '" + d.model_id + "': concurrency must be in [1, 1024]");
  }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw EvaluationError("embedding dimensions differ: " + std::to_string(a.dimension()) + " vs " +
                          std::to_string(b.dimension()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw EvaluationError("zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

BackendClient::BackendClient(BackendDescriptor d, std::shared_ptr<Transport> transport)
    : desc_(std::move(d)), transport_(std::move(transport)) {
  validate(desc_);
  if (!transport_) throw PreconditionError("backend '" + desc_.model_id + "' has no transport");
  slots_ = std::make_unique<std::counting_semaphore<1024>>(desc_.concurrency);
}

void BackendClient::require(Capability c) const {
  if (desc_.capability != c) {
    throw PreconditionError("backend '" + desc_.model_id + "' serves " +
                            std::string(to_string(desc_.capability)) + ", not " +
                            std::string(to_string(c)));
  }
}

void BackendClient::check_budget(std::string_view payload, const char* what) const {
  if (desc_.max_context == 0) return;
  const std::size_t n = text::length(payload);
  if (n > desc_.max_context) {
    throw ContextOverflowError(std::string(what) + " of " + std::to_string(n) +
                               " characters exceeds max_context " +
                               std::to_string(desc_.max_context) + " of '" + desc_.model_id + "'");
  }
}

json BackendClient::call(const json& request) const {
  slots_->acquire();
  struct Release {
    std::counting_semaphore<1024>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};
  return transport_->post(desc_.capability, desc_.model_id, request);
}

ExtractiveResult BackendClient::extract_spans(std::string_view question, std::string_view context,
                                              int top_k) const {
  require(Capability::extractive_qa);
  if (top_k < 1) throw ProtocolError("top_k must be >= 1, got " + std::to_string(top_k));
  check_budget(context, "context");
  const json response =
      call(encode(ExtractiveRequest{std::string(question), std::string(context), top_k}));
  ExtractiveResult r = decode_extractive_result(response);

  const text::Utf8Text ctx{std::string(context)};
  if (r.answers.size() > static_cast<std::size_t>(top_k)) {
    throw ProtocolError("'" + desc_.model_id + "' returned more than top_k answers: " +
                        excerpt(response));
  }
  double prev = 1.0;
  for (const auto& a : r.answers) {
    if (!(a.score >= 0.0 && a.score <= 1.0)) {
      throw ProtocolError("score outside [0,1] from '" + desc_.model_id + "': " + excerpt(response));
    }
    if (a.score > prev) {
      throw ProtocolError("scores not descending from '" + desc_.model_id + "': " + excerpt(response));
    }
    prev = a.score;
    if (!(a.start < a.end && a.end <= ctx.size()) || ctx.slice(a.start, a.end) != a.text) {
      throw ProtocolError("offsets do not slice the context from '" + desc_.model_id +
                          "': " + excerpt(response));
    }
  }
  return r;
}

std::string BackendClient::generate(std::string_view prompt, int max_new, double temperature) const {
  require(Capability::generate);
  if (!(temperature >= 0.0)) throw PreconditionError("temperature must be >= 0");
  if (max_new < 1) throw ProtocolError("max_new_tokens must be >= 1");
  check_budget(prompt, "prompt");
  return decode_generate_response(
             call(encode(GenerateRequest{std::string(prompt), max_new, temperature})))
      .text;
}

std::vector<EmbeddingVector> BackendClient::embed(std::span<const std::string> texts) const {
  require(Capability::embed);
  if (texts.empty()) throw PreconditionError("embed needs at least one text");
  for (const auto& t : texts) check_budget(t, "embedding input");
  const json response = call(encode(EmbedRequest{{texts.begin(), texts.end()}}));
  EmbedResponse r = decode_embed_response(response);
  if (r.embeddings.size() != texts.size()) {
    throw ProtocolError("'" + desc_.model_id + "' returned " + std::to_string(r.embeddings.size()) +
                        " embeddings for " + std::to_string(texts.size()) + " texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(r.embeddings.size());
  for (auto& v : r.embeddings) {
    std::size_t expected = 0;
    if (!dimension_.compare_exchange_strong(expected, v.size()) && expected != v.size()) {
      throw ProtocolError("embedding dimension changed from " + std::to_string(expected) + " to " +
                          std::to_string(v.size()) + " on '" + desc_.model_id + "'");
    }
    const bool nonzero = std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
    if (v.empty() || !nonzero) throw ProtocolError("zero-norm embedding from '" + desc_.model_id + "'");
    out.push_back({std::move(v)});
  }
  return out;
}

}  // namespace docpipe::backend
