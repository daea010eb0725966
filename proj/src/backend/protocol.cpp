#include "docpipe/backend/protocol.hpp"

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"

namespace docpipe::backend {

std::string_view to_string(Capability c) noexcept {
  switch (c) {
    case Capability::extractive_qa: return "extractive_qa";
    case Capability::generate: return "generate";
    case Capability::embed: return "embed";
  }
  return "?";
}

Capability parse_capability(std::string_view s) {
  for (Capability c : {Capability::extractive_qa, Capability::generate, Capability::embed}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown capability '" + std::string(s) + "'");
}

std::string_view endpoint_path(Capability c) noexcept {
  switch (c) {
    case Capability::extractive_qa: return "/v1/extractive_qa";
    case Capability::generate: return "/v1/generate";
    case Capability::embed: return "/v1/embed";
  }
  return "/";
}

std::string excerpt(const json& j, std::size_t max_chars) {
  std::string s = j.dump(-1, ' ', false, json::error_handler_t::replace);
  if (s.size() > max_chars) s = s.substr(0, max_chars) + "...";
  return s;
}

std::string request_digest(const json& request) { return sha256_hex(dump_canonical(request)); }

namespace {

[[noreturn]] void fail(const std::string& what, const json& j) {
  throw ProtocolError(what + ": " + excerpt(j));
}

const json& field(const json& j, const char* name, json::value_t type, const char* message) {
  if (!j.is_object()) fail(std::string(message) + ": expected an object", j);
  const auto it = j.find(name);
  if (it == j.end()) fail(std::string(message) + ": missing '" + name + "'", j);
  const bool ok = type == json::value_t::number_float ? it->is_number()
                  : type == json::value_t::number_unsigned
                      ? (it->is_number_integer() && it->get<long long>() >= 0)
                  : type == json::value_t::number_integer ? it->is_number_integer()
                                                          : it->type() == type;
  if (!ok) fail(std::string(message) + ": bad type for '" + name + "'", j);
  return *it;
}

using vt = json::value_t;

}  // namespace

json encode(const ExtractiveRequest& m) {
  return {{"question", m.question}, {"context", m.context}, {"top_k", m.top_k}};
}

json encode(const ExtractiveResult& m) {
  json answers = json::array();
  for (const auto& a : m.answers) {
    answers.push_back({{"text", a.text}, {"start", a.start}, {"end", a.end}, {"score", a.score}});
  }
  return {{"answers", answers}};
}

json encode(const GenerateRequest& m) {
  return {{"prompt", m.prompt}, {"max_new_tokens", m.max_new_tokens}, {"temperature", m.temperature}};
}

json encode(const GenerateResponse& m) { return {{"text", m.text}}; }

json encode(const EmbedRequest& m) { return {{"texts", m.texts}}; }

json encode(const EmbedResponse& m) { return {{"embeddings", m.embeddings}}; }

ExtractiveRequest decode_extractive_request(const json& j) {
  constexpr const char* msg = "malformed extractive_qa request";
  return {field(j, "question", vt::string, msg).get<std::string>(),
          field(j, "context", vt::string, msg).get<std::string>(),
          field(j, "top_k", vt::number_integer, msg).get<int>()};
}

ExtractiveResult decode_extractive_result(const json& j) {
  constexpr const char* msg = "malformed extractive_qa response";
  ExtractiveResult r;
  for (const auto& a : field(j, "answers", vt::array, msg)) {
    r.answers.push_back({field(a, "text", vt::string, msg).get<std::string>(),
                         field(a, "start", vt::number_unsigned, msg).get<std::size_t>(),
                         field(a, "end", vt::number_unsigned, msg).get<std::size_t>(),
                         field(a, "score", vt::number_float, msg).get<double>()});
  }
  return r;
}

GenerateRequest decode_generate_request(const json& j) {
  constexpr const char* msg = "malformed generate request";
  return {field(j, "prompt", vt::string, msg).get<std::string>(),
          field(j, "max_new_tokens", vt::number_integer, msg).get<int>(),
          field(j, "temperature", vt::number_float, msg).get<double>()};
}

GenerateResponse decode_generate_response(const json& j) {
  return {field(j, "text", vt::string, "malformed generate response").get<std::string>()};
}

EmbedRequest decode_embed_request(const json& j) {
  constexpr const char* msg = "malformed embed request";
  EmbedRequest r;
  for (const auto& t : field(j, "texts", vt::array, msg)) {
    if (!t.is_string()) fail(std::string(msg) + ": non-string text", j);
    r.texts.push_back(t.get<std::string>());
  }
  return r;
}

EmbedResponse decode_embed_response(const json& j) {
  constexpr const char* msg = "malformed embed response";
  EmbedResponse r;
  for (const auto& row : field(j, "embeddings", vt::array, msg)) {
    if (!row.is_array()) fail(std::string(msg) + ": embedding is not an array", j);
    std::vector<double> v;
    v.reserve(row.size());
    for (const auto& x : row) {
      if (!x.is_number()) fail(std::string(msg) + ": non-numeric component", j);
      v.push_back(x.get<double>());
    }
    r.embeddings.push_back(std::move(v));
  }
  return r;
}

}  // namespace docpipe::backend
