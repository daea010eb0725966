#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "docpipe/backend/client.hpp"
#include "docpipe/backend/transport.hpp"

namespace httplib {
class Server;
}

namespace docpipe::backend {

/// One extractive rule: when the question contains `trigger`
/// (case-insensitive; empty matches every question), every whole-word
/// occurrence of `keyword` in the context is an answer.
struct MockRule {
  std::string trigger;
  std::string keyword;
  /// Fixed score; when absent the score is a seeded hash of the rule and model.
  std::optional<double> score;
  /// Restricts the rule to these model ids; empty means all models.
  std::vector<std::string> models;
};

struct MockCanned {
  std::string match;
  std::string completion;
};

/// Behavior table for MockModel.
///
/// Generation: the first canned entry whose `match` occurs in the prompt
/// wins. Otherwise the numbered items under an `Evidence:` line are read
/// back: with an empty `canonical` map they are echoed verbatim, one per
/// line; with a non-empty map each item is replaced by the canonical names
/// of the keys it contains (case-insensitive) and items without a key are
/// dropped. Nothing left yields "none".
///
/// Embedding: signed feature hashing of lower-cased alphanumeric tokens into
/// `embed_dim` buckets, unit-normalized.
struct MockTable {
  std::vector<MockRule> rules;
  std::vector<MockCanned> canned;
  std::vector<std::pair<std::string, std::string>> canonical;
  std::size_t embed_dim = 256;

  static MockTable from_json(const json& j);
  static MockTable load(const std::filesystem::path& p);
  json to_json() const;
};

/// Deterministic in-process model: responses are a pure function of
/// (seed, table, model_id, request).
class MockModel final : public Transport {
 public:
  MockModel(std::uint64_t seed, MockTable table);
  json post(Capability cap, const std::string& model_id, const json& request) override;

  ExtractiveResult extract(const std::string& model_id, const ExtractiveRequest& r) const;
  GenerateResponse generate(const GenerateRequest& r) const;
  EmbedResponse embed(const EmbedRequest& r) const;

 private:
  std::uint64_t seed_;
  MockTable table_;
};

/// Serves a Transport over the HTTP wire protocol on 127.0.0.1. The model id
/// is taken from `X-Model-Id` (default "mock"). Decoding failures and
/// ProtocolError map to 400, other errors to 500.
class TransportServer {
 public:
  explicit TransportServer(std::shared_ptr<Transport> inner, int port = 0);
  ~TransportServer();
  TransportServer(const TransportServer&) = delete;
  TransportServer& operator=(const TransportServer&) = delete;

  int port() const noexcept { return port_; }
  std::string url() const;
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  std::shared_ptr<Transport> inner_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

/// A mock descriptor plus its transport; `serve_http` additionally starts an
/// in-process server and routes the transport through HTTP.
struct MockBackend {
  BackendDescriptor descriptor;
  std::shared_ptr<Transport> transport;
  std::shared_ptr<TransportServer> server;
};

MockBackend mock_backend(std::uint64_t seed, MockTable table, std::string model_id,
                         Capability cap, bool serve_http = false);

/// BackendDescriptor for a replay fixture file.
BackendDescriptor replay_backend(const std::filesystem::path& fixture, std::string model_id,
                                 Capability cap);

}  // namespace docpipe::backend
