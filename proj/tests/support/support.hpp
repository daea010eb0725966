#pragma once

// Shared helpers for the unit and acceptance suites: temp dirs, fixture
// paths, a CLI runner, call-counting transports and independent reference
// implementations ("oracles") of the metrics.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "docpipe/backend/transport.hpp"
#include "docpipe/types.hpp"

namespace testsupport {

namespace fs = std::filesystem;

fs::path fixtures_dir();
fs::path corpus5_dir();
fs::path cli_path();

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "docpipe");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

struct CliResult {
  int exit_code = -1;
  std::string output;
};

/// Runs the docpipe binary with `args` (already shell-quoted where needed);
/// stdout and stderr are captured together.
CliResult run_cli(const std::string& args, const std::string& env = "");

/// Every file under `dir` (relative path -> bytes).
std::map<std::string, std::string> snapshot(const fs::path& dir);

/// Counts calls per capability before delegating.
class CountingTransport final : public docpipe::backend::Transport {
 public:
  explicit CountingTransport(std::shared_ptr<docpipe::backend::Transport> inner)
      : inner_(std::move(inner)) {}
  docpipe::backend::json post(docpipe::backend::Capability cap, const std::string& model_id,
                              const docpipe::backend::json& request) override;
  std::size_t calls(docpipe::backend::Capability cap) const;

 private:
  std::shared_ptr<docpipe::backend::Transport> inner_;
  std::atomic<std::size_t> counts_[3] = {0, 0, 0};
};

/// Fails every call of one capability with a BackendError.
class FailingTransport final : public docpipe::backend::Transport {
 public:
  FailingTransport(std::shared_ptr<docpipe::backend::Transport> inner,
                   docpipe::backend::Capability cap)
      : inner_(std::move(inner)), cap_(cap) {}
  docpipe::backend::json post(docpipe::backend::Capability cap, const std::string& model_id,
                              const docpipe::backend::json& request) override;

 private:
  std::shared_ptr<docpipe::backend::Transport> inner_;
  docpipe::backend::Capability cap_;
};

docpipe::Document make_doc(const std::string& id, const std::string& text);
docpipe::Span make_span(const docpipe::Document& doc, std::size_t start, std::size_t end,
                        double score, const std::string& model = "m");

/// Random text over a small vocabulary with punctuation, articles and
/// casing variety; ASCII only so the oracles need no Unicode tables.
std::string random_phrase(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words);

namespace oracle {

// Reference metrics written from the definitions alone, sharing no code
// with the library.
std::string normalize(const std::string& s);
double f1(const std::string& gold, const std::string& pred);
bool em(const std::string& gold, const std::string& pred);
bool mentions(const std::string& gold, const std::vector<std::string>& preds, bool case_sensitive);

}  // namespace oracle

}  // namespace testsupport
