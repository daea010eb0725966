#pragma once

// Wire messages for the three model capabilities. Every endpoint is an HTTP
// POST with a JSON body:
//
//   /v1/extractive_qa  {question, context, top_k}           -> {answers:[{text,start,end,score}]}
//   /v1/generate       {prompt, max_new_tokens, temperature} -> {text}
//   /v1/embed          {texts:[...]}                         -> {embeddings:[[...]]}
//
// Offsets are code-point offsets into the submitted context; scores are
// probabilities in [0, 1].

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace docpipe::backend {

using json = nlohmann::json;

enum class Capability { extractive_qa, generate, embed };

std::string_view to_string(Capability c) noexcept;
Capability parse_capability(std::string_view s);
/// "/v1/extractive_qa", "/v1/generate" or "/v1/embed".
std::string_view endpoint_path(Capability c) noexcept;

struct ExtractiveRequest {
  std::string question;
  std::string context;
  int top_k = 1;
  friend bool operator==(const ExtractiveRequest&, const ExtractiveRequest&) = default;
};

struct ExtractiveAnswer {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
  friend bool operator==(const ExtractiveAnswer&, const ExtractiveAnswer&) = default;
};

struct ExtractiveResult {
  std::vector<ExtractiveAnswer> answers;
  friend bool operator==(const ExtractiveResult&, const ExtractiveResult&) = default;
};

struct GenerateRequest {
  std::string prompt;
  int max_new_tokens = 256;
  double temperature = 0.0;
  friend bool operator==(const GenerateRequest&, const GenerateRequest&) = default;
};

struct GenerateResponse {
  std::string text;
  friend bool operator==(const GenerateResponse&, const GenerateResponse&) = default;
};

struct EmbedRequest {
  std::vector<std::string> texts;
  friend bool operator==(const EmbedRequest&, const EmbedRequest&) = default;
};

struct EmbedResponse {
  std::vector<std::vector<double>> embeddings;
  friend bool operator==(const EmbedResponse&, const EmbedResponse&) = default;
};

// Encoders never fail. Decoders check field presence and types and throw
// ProtocolError carrying an excerpt of the offending payload.
json encode(const ExtractiveRequest& m);
json encode(const ExtractiveResult& m);
json encode(const GenerateRequest& m);
json encode(const GenerateResponse& m);
json encode(const EmbedRequest& m);
json encode(const EmbedResponse& m);

ExtractiveRequest decode_extractive_request(const json& j);
ExtractiveResult decode_extractive_result(const json& j);
GenerateRequest decode_generate_request(const json& j);
GenerateResponse decode_generate_response(const json& j);
EmbedRequest decode_embed_request(const json& j);
EmbedResponse decode_embed_response(const json& j);

/// First `max_chars` bytes of the compact JSON, for error messages.
std::string excerpt(const json& j, std::size_t max_chars = 200);

/// SHA-256 of the canonical request JSON; the replay lookup key.
std::string request_digest(const json& request);

}  // namespace docpipe::backend
