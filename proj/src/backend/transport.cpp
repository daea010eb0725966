#include "docpipe/backend/transport.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"

namespace docpipe::backend {

HttpTransport::HttpTransport(std::string base_url, Options opts) : opts_(opts) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL lacks a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  scheme_host_port_ = base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (opts_.max_attempts < 1) opts_.max_attempts = 1;
}

json HttpTransport::post(Capability cap, const std::string& model_id, const json& request) {
  const std::string path = path_prefix_ + std::string(endpoint_path(cap));
  const std::string body = dump_canonical(request);
  auto backoff = opts_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
    httplib::Client cli(scheme_host_port_);
    const auto secs = opts_.timeout.count() / 1000;
    const auto usecs = (opts_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers{{"X-Model-Id", model_id}};
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = scheme_host_port_ + path + ": " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = scheme_host_port_ + path + ": HTTP " + std::to_string(res->status) + " " +
                   res->body.substr(0, 200);
    } else if (res->status != 200) {
      throw ProtocolError(scheme_host_port_ + path + ": HTTP " + std::to_string(res->status) +
                          ": " + res->body.substr(0, 200));
    } else {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error&) {
        throw ProtocolError(scheme_host_port_ + path + ": response is not JSON: " +
                            res->body.substr(0, 200));
      }
    }
    if (attempt < opts_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendError(last_error + " (after " + std::to_string(opts_.max_attempts) + " attempts)");
}

namespace {

std::map<std::tuple<std::string, std::string, std::string>, json> read_fixture(
    const std::filesystem::path& fixture) {
  std::ifstream in(fixture, std::ios::binary);
  if (!in) throw LoadError("cannot open replay fixture " + fixture.string());
  std::map<std::tuple<std::string, std::string, std::string>, json> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries.emplace(std::tuple{j.at("capability").get<std::string>(),
                                 j.at("model_id").get<std::string>(),
                                 j.at("request_sha256").get<std::string>()},
                      j.at("response"));
    } catch (const json::exception& e) {
      throw LoadError(fixture.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entries;
}

}  // namespace

ReplayTransport::ReplayTransport(const std::filesystem::path& fixture)
    : entries_(read_fixture(fixture)), path_(fixture) {}

json ReplayTransport::post(Capability cap, const std::string& model_id, const json& request) {
  const std::string digest = request_digest(request);
  const auto it = entries_.find({std::string(to_string(cap)), model_id, digest});
  if (it == entries_.end()) {
    throw ProtocolError("replay key miss: " + std::string(to_string(cap)) + "/" + model_id + "/" +
                        digest + " in " + path_.string());
  }
  return it->second;
}

void FixtureRecorder::record(Capability cap, const std::string& model_id, const json& request,
                             const json& response) {
  std::lock_guard lock(mu_);
  entries_[{std::string(to_string(cap)), model_id, request_digest(request)}] = response;
}

void FixtureRecorder::load(const std::filesystem::path& p) {
  auto existing = read_fixture(p);
  std::lock_guard lock(mu_);
  entries_.merge(existing);
}

void FixtureRecorder::write(const std::filesystem::path& p) const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& [key, response] : entries_) {
    const auto& [cap, model, digest] = key;
    out += dump_canonical(json{{"capability", cap},
                               {"model_id", model},
                               {"request_sha256", digest},
                               {"response", response}}) +
           "\n";
  }
  write_text_file(p, out);
}

std::size_t FixtureRecorder::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

json RecordingTransport::post(Capability cap, const std::string& model_id, const json& request) {
  json response = inner_->post(cap, model_id, request);
  sink_->record(cap, model_id, request, response);
  return response;
}

}  // namespace docpipe::backend
