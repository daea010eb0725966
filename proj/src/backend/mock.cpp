#include "docpipe/backend/mock.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include <httplib.h>

#include "docpipe/error.hpp"
#include "docpipe/json_io.hpp"
#include "docpipe/text.hpp"

namespace docpipe::backend {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_parts(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = splitmix64(seed);
  for (auto part : parts) {
    std::uint64_t f = 1469598103934665603ull;
    for (unsigned char c : part) {
      f ^= c;
      f *= 1099511628211ull;
    }
    h = splitmix64(h ^ f);
  }
  return h;
}

std::size_t find_ci(const std::u32string& hay, const std::u32string& needle, std::size_t from) {
  if (needle.empty()) return from <= hay.size() ? from : std::u32string::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) {
      ok = text::to_lower(hay[i + k]) == text::to_lower(needle[k]);
    }
    if (ok) return i;
  }
  return std::u32string::npos;
}

std::vector<std::string> evidence_items(const std::string& prompt) {
  std::vector<std::string> items;
  std::istringstream in(prompt);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    const std::string t = text::trim(line);
    if (!inside) {
      inside = t == "Evidence:";
      continue;
    }
    if (t.empty()) {
      if (!items.empty()) break;
      continue;
    }
    std::size_t i = 0;
    while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
    if (i == 0 || i + 1 >= t.size() || t[i] != '.' || t[i + 1] != ' ') break;
    items.push_back(t.substr(i + 2));
  }
  return items;
}

std::string truncate_words(const std::string& s, int max_words) {
  int words = 0;
  bool in_word = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool space = s[i] == ' ' || s[i] == '\n' || s[i] == '\t' || s[i] == '\r';
    if (!space && !in_word && ++words > max_words) return text::trim(s.substr(0, i));
    in_word = !space;
  }
  return s;
}

}  // namespace

MockTable MockTable::from_json(const json& j) {
  MockTable t;
  try {
    for (const auto& r : j.value("rules", json::array())) {
      MockRule rule;
      rule.trigger = r.value("trigger", std::string{});
      rule.keyword = r.at("keyword").get<std::string>();
      if (r.contains("score")) rule.score = r.at("score").get<double>();
      rule.models = r.value("models", std::vector<std::string>{});
      if (rule.keyword.empty()) throw ValidationError("mock rule with empty keyword");
      if (rule.score && !(*rule.score >= 0.0 && *rule.score <= 1.0)) {
        throw ValidationError("mock rule score outside [0,1] for '" + rule.keyword + "'");
      }
      t.rules.push_back(std::move(rule));
    }
    for (const auto& c : j.value("canned", json::array())) {
      t.canned.push_back({c.at("match").get<std::string>(), c.at("completion").get<std::string>()});
    }
    for (const auto& c : j.value("canonical", json::array())) {
      t.canonical.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    }
    t.embed_dim = j.value("embed_dim", std::size_t{256});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed mock table: ") + e.what());
  }
  if (t.embed_dim == 0) throw ValidationError("mock embed_dim must be > 0");
  return t;
}

MockTable MockTable::load(const std::filesystem::path& p) { return from_json(read_json_file(p)); }

json MockTable::to_json() const {
  json rules = json::array();
  for (const auto& r : this->rules) {
    json o{{"trigger", r.trigger}, {"keyword", r.keyword}, {"models", r.models}};
    if (r.score) o["score"] = *r.score;
    rules.push_back(o);
  }
  json canned_j = json::array();
  for (const auto& c : canned) canned_j.push_back({{"match", c.match}, {"completion", c.completion}});
  json canonical_j = json::array();
  for (const auto& [k, v] : canonical) canonical_j.push_back({k, v});
  return {{"rules", rules}, {"canned", canned_j}, {"canonical", canonical_j}, {"embed_dim", embed_dim}};
}

MockModel::MockModel(std::uint64_t seed, MockTable table) : seed_(seed), table_(std::move(table)) {}

json MockModel::post(Capability cap, const std::string& model_id, const json& request) {
  switch (cap) {
    case Capability::extractive_qa: {
      const auto r = decode_extractive_request(request);
      if (r.top_k < 1) throw ProtocolError("top_k must be >= 1");
      return encode(extract(model_id, r));
    }
    case Capability::generate: return encode(generate(decode_generate_request(request)));
    case Capability::embed: {
      const auto r = decode_embed_request(request);
      if (r.texts.empty()) throw ProtocolError("embed needs at least one text");
      return encode(embed(r));
    }
  }
  throw ProtocolError("unknown capability");
}

ExtractiveResult MockModel::extract(const std::string& model_id, const ExtractiveRequest& r) const {
  const std::u32string question = text::decode(r.question);
  const std::u32string ctx = text::decode(r.context);
  std::vector<ExtractiveAnswer> found;
  for (const auto& rule : table_.rules) {
    if (!rule.models.empty() &&
        std::find(rule.models.begin(), rule.models.end(), model_id) == rule.models.end()) {
      continue;
    }
    if (find_ci(question, text::decode(rule.trigger), 0) == std::u32string::npos) continue;
    const std::u32string kw = text::decode(rule.keyword);
    const double score =
        rule.score.value_or(0.05 + 0.9 * static_cast<double>(
                                             hash_parts(seed_, {model_id, rule.trigger, rule.keyword}) %
                                             1000000) /
                                       1e6);
    for (std::size_t pos = ctx.find(kw); pos != std::u32string::npos; pos = ctx.find(kw, pos + 1)) {
      const std::size_t end = pos + kw.size();
      const bool left_ok = pos == 0 || !text::is_alnum(kw.front()) || !text::is_alnum(ctx[pos - 1]);
      const bool right_ok = end == ctx.size() || !text::is_alnum(kw.back()) || !text::is_alnum(ctx[end]);
      if (left_ok && right_ok) found.push_back({rule.keyword, pos, end, score});
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return std::tuple(-a.score, a.start, a.end) < std::tuple(-b.score, b.start, b.end);
  });
  ExtractiveResult out;
  for (const auto& a : found) {
    const bool dup = std::any_of(out.answers.begin(), out.answers.end(), [&](const auto& o) {
      return o.start == a.start && o.end == a.end;
    });
    if (dup) continue;
    out.answers.push_back(a);
    if (out.answers.size() == static_cast<std::size_t>(r.top_k)) break;
  }
  return out;
}

GenerateResponse MockModel::generate(const GenerateRequest& r) const {
  for (const auto& c : table_.canned) {
    if (r.prompt.find(c.match) != std::string::npos) return {truncate_words(c.completion, r.max_new_tokens)};
  }
  std::vector<std::string> lines;
  auto add = [&](std::string s) {
    if (std::find(lines.begin(), lines.end(), s) == lines.end()) lines.push_back(std::move(s));
  };
  for (const auto& item : evidence_items(r.prompt)) {
    if (table_.canonical.empty()) {
      add(item);
      continue;
    }
    const std::u32string hay = text::decode(item);
    std::vector<std::pair<std::size_t, std::string>> hits;
    for (const auto& [key, name] : table_.canonical) {
      const std::size_t pos = find_ci(hay, text::decode(key), 0);
      if (pos != std::u32string::npos) hits.emplace_back(pos, name);
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [pos, name] : hits) add(name);
  }
  if (lines.empty()) return {"none"};
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += std::to_string(i + 1) + ". " + lines[i] + (i + 1 < lines.size() ? "\n" : "");
  }
  return {truncate_words(out, r.max_new_tokens)};
}

EmbedResponse MockModel::embed(const EmbedRequest& r) const {
  EmbedResponse out;
  for (const auto& t : r.texts) {
    std::vector<double> v(table_.embed_dim, 0.0);
    std::vector<std::string> tokens;
    std::string cur;
    for (char32_t c : text::decode(t)) {
      if (text::is_alnum(c)) {
        text::append(cur, text::to_lower(c));
      } else if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    if (tokens.empty()) tokens.emplace_back();
    for (const auto& tok : tokens) {
      const std::uint64_t h = hash_parts(seed_, {"embed", tok});
      v[h % v.size()] += (h >> 63) ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) {
      v[hash_parts(seed_, {"embed", tokens.front()}) % v.size()] = 1.0;
      norm = 1.0;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    out.embeddings.push_back(std::move(v));
  }
  return out;
}

TransportServer::TransportServer(std::shared_ptr<Transport> inner, int port)
    : inner_(std::move(inner)), server_(std::make_unique<httplib::Server>()) {
  for (Capability cap : {Capability::extractive_qa, Capability::generate, Capability::embed}) {
    server_->Post(std::string(endpoint_path(cap)),
                  [this, cap](const httplib::Request& req, httplib::Response& res) {
                    const std::string model =
                        req.has_header("X-Model-Id") ? req.get_header_value("X-Model-Id") : "mock";
                    try {
                      const json body = json::parse(req.body);
                      res.set_content(dump_canonical(inner_->post(cap, model, body)),
                                      "application/json");
                    } catch (const json::parse_error& e) {
                      res.status = 400;
                      res.set_content(dump_canonical(json{{"error", e.what()}}), "application/json");
                    } catch (const ProtocolError& e) {
                      res.status = 400;
                      res.set_content(dump_canonical(json{{"error", e.what()}}), "application/json");
                    } catch (const std::exception& e) {
                      res.status = 500;
                      res.set_content(dump_canonical(json{{"error", e.what()}}), "application/json");
                    }
                  });
  }
  port_ = port == 0 ? server_->bind_to_any_port("127.0.0.1")
                    : (server_->bind_to_port("127.0.0.1", port) ? port : -1);
  if (port_ <= 0) throw BackendError("cannot bind mock server on 127.0.0.1:" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

TransportServer::~TransportServer() { stop(); }

std::string TransportServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void TransportServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void TransportServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

MockBackend mock_backend(std::uint64_t seed, MockTable table, std::string model_id, Capability cap,
                         bool serve_http) {
  MockBackend mb;
  mb.descriptor.model_id = std::move(model_id);
  mb.descriptor.capability = cap;
  auto model = std::make_shared<MockModel>(seed, std::move(table));
  if (serve_http) {
    mb.server = std::make_shared<TransportServer>(model);
    mb.descriptor.endpoint = Endpoint{Endpoint::Kind::mock_http, mb.server->url()};
    mb.transport = std::make_shared<HttpTransport>(mb.server->url(), HttpTransport::Options{});
  } else {
    mb.descriptor.endpoint = Endpoint{Endpoint::Kind::mock, ""};
    mb.transport = std::move(model);
  }
  return mb;
}

BackendDescriptor replay_backend(const std::filesystem::path& fixture, std::string model_id,
                                 Capability cap) {
  if (!std::filesystem::exists(fixture)) {
    throw LoadError("replay fixture not found: " + fixture.string());
  }
  BackendDescriptor d;
  d.model_id = std::move(model_id);
  d.capability = cap;
  d.endpoint = Endpoint{Endpoint::Kind::replay, fixture.string()};
  return d;
}

}  // namespace docpipe::backend
