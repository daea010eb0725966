#include "support.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>
#include <unistd.h>

#include "docpipe/error.hpp"

namespace testsupport {

fs::path fixtures_dir() { return DOCPIPE_TEST_FIXTURES; }
fs::path corpus5_dir() { return fixtures_dir() / "corpus5"; }
fs::path cli_path() { return DOCPIPE_TEST_CLI; }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CliResult run_cli(const std::string& args, const std::string& env) {
  const std::string cmd = env + (env.empty() ? "" : " ") + cli_path().string() + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed: " + cmd);
  CliResult r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

docpipe::backend::json CountingTransport::post(docpipe::backend::Capability cap,
                                               const std::string& model_id,
                                               const docpipe::backend::json& request) {
  ++counts_[static_cast<int>(cap)];
  return inner_->post(cap, model_id, request);
}

std::size_t CountingTransport::calls(docpipe::backend::Capability cap) const {
  return counts_[static_cast<int>(cap)].load();
}

docpipe::backend::json FailingTransport::post(docpipe::backend::Capability cap,
                                              const std::string& model_id,
                                              const docpipe::backend::json& request) {
  if (cap == cap_) throw docpipe::BackendError("injected failure for " + model_id);
  return inner_->post(cap, model_id, request);
}

docpipe::Document make_doc(const std::string& id, const std::string& text) {
  return docpipe::Document{id, docpipe::text::Utf8Text(text), {}};
}

docpipe::Span make_span(const docpipe::Document& doc, std::size_t start, std::size_t end,
                        double score, const std::string& model) {
  docpipe::Span s;
  s.text = doc.text.slice(start, end);
  s.start = start;
  s.end = end;
  s.score = score;
  s.model_id = model;
  return s;
}

std::string random_phrase(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
  static const char* const words[] = {
      "the",   "a",       "an",      "LDA",   "lda",     "SVM",     "svms",   "topic",
      "model", "models",  "support", "vector", "machine", "XGBoost", "XG",    "Boost",
      "boost", "random",  "forest",  "BERT",  "Bert",    "trees",   "gradient", "(SVMs)",
      "LDA,",  "model.",  "x",       "The",   "An",      "k-means", "A",       "word2vec"};
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(words) - 1);
  std::uniform_int_distribution<int> gap(0, 9);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += gap(rng) == 0 ? "  " : " ";
    s += words[pick(rng)];
  }
  return s;
}

namespace oracle {

namespace {

bool punct(char c) {
  static const std::string p = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return p.find(c) != std::string::npos;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

bool contains(const std::string& hay, const std::string& needle) {
  if (needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (hay.compare(i, needle.size(), needle) == 0) return true;
  }
  return false;
}

std::string strip_ws(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != '\v') out += c;
  }
  return out;
}

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r\f\v");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\n\r\f\v");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string normalize(const std::string& s) {
  std::string no_punct;
  for (char c : lower(s)) {
    if (!punct(c)) no_punct += c;
  }
  // Articles are whole words once punctuation is gone; the ASCII test
  // vocabulary has no other word characters to worry about.
  std::string out;
  for (const auto& w : words(no_punct)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

double f1(const std::string& gold, const std::string& pred) {
  const auto g = words(normalize(gold));
  const auto p = words(normalize(pred));
  if (g.empty() && p.empty()) return 1.0;
  if (g.empty() || p.empty()) return 0.0;
  // Brute-force multiset intersection: greedily consume matching tokens.
  std::vector<bool> used(g.size(), false);
  std::size_t common = 0;
  for (const auto& t : p) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!used[i] && g[i] == t) {
        used[i] = true;
        ++common;
        break;
      }
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

bool em(const std::string& gold, const std::string& pred) { return normalize(gold) == normalize(pred); }

bool mentions(const std::string& gold_in, const std::vector<std::string>& preds_in,
              bool case_sensitive) {
  const std::string gold = case_sensitive ? gold_in : lower(gold_in);
  for (const auto& pred_in : preds_in) {
    const std::string pred = case_sensitive ? pred_in : lower(pred_in);
    if (contains(pred, gold)) return true;
    const std::string g = trim_ws(gold);
    if (!g.empty() && g.back() == ')') {
      const std::size_t open = g.rfind('(');
      if (open != std::string::npos) {
        const std::string before = trim_ws(g.substr(0, open));
        const std::string inside = trim_ws(g.substr(open + 1, g.size() - open - 2));
        const std::string p = trim_ws(pred);
        if ((!before.empty() && p == before) || (!inside.empty() && p == inside)) return true;
      }
    }
    const std::string gw = strip_ws(gold);
    if (contains(strip_ws(pred), gw)) return true;
  }
  return false;
}

}  // namespace oracle

}  // namespace testsupport
