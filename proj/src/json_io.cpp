#include "docpipe/json_io.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "docpipe/error.hpp"

namespace docpipe {

void to_json(json& j, const Span& s) {
  j = json{{"text", s.text}, {"start", s.start}, {"end", s.end}, {"score", s.score},
           {"model_id", s.model_id}};
  if (s.window_id) j["window_id"] = *s.window_id;
  if (s.subquestion_id) j["subquestion_id"] = *s.subquestion_id;
}

void from_json(const json& j, Span& s) {
  j.at("text").get_to(s.text);
  j.at("start").get_to(s.start);
  j.at("end").get_to(s.end);
  j.at("score").get_to(s.score);
  s.model_id = j.value("model_id", std::string{});
  s.window_id = j.contains("window_id") ? std::optional<int>(j.at("window_id").get<int>())
                                        : std::nullopt;
  s.subquestion_id = j.contains("subquestion_id")
                         ? std::optional<std::string>(j.at("subquestion_id").get<std::string>())
                         : std::nullopt;
}

void to_json(json& j, const Answer& a) {
  j = json{{"text", a.text},
           {"score", a.score},
           {"variants", a.variants},
           {"provenance", {{"spans", a.provenance.spans},
                           {"generation_ids", a.provenance.generation_ids}}}};
}

void from_json(const json& j, Answer& a) {
  j.at("text").get_to(a.text);
  a.score = j.value("score", 0.0);
  a.variants = j.value("variants", std::vector<std::string>{});
  a.provenance = {};
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    a.provenance.spans = p.value("spans", std::vector<Span>{});
    a.provenance.generation_ids = p.value("generation_ids", std::vector<std::string>{});
  }
}

void to_json(json& j, const AnswerSet& a) {
  j = json{{"doc_id", a.doc_id},
           {"qid", to_string(a.qid)},
           {"answers", a.answers},
           {"empty_means_unanswerable", a.empty_means_unanswerable},
           {"forced_empty", a.forced_empty}};
}

void from_json(const json& j, AnswerSet& a) {
  j.at("doc_id").get_to(a.doc_id);
  a.qid = parse_qid(j.at("qid").get<std::string>());
  a.answers = j.at("answers").get<std::vector<Answer>>();
  a.empty_means_unanswerable = j.value("empty_means_unanswerable", false);
  a.forced_empty = j.value("forced_empty", false);
}

void to_json(json& j, const GoldAnnotation& g) {
  j = json{{"doc_id", g.doc_id}, {"qid", to_string(g.qid)}, {"gold_answers", g.gold_answers}};
}

void from_json(const json& j, GoldAnnotation& g) {
  j.at("doc_id").get_to(g.doc_id);
  g.qid = parse_qid(j.at("qid").get<std::string>());
  j.at("gold_answers").get_to(g.gold_answers);
}

void to_json(json& j, const QuestionSpec& q) {
  std::vector<std::string> stages;
  for (Stage s : q.stages) stages.emplace_back(to_string(s));
  j = json{{"qid", to_string(q.qid)},           {"text", q.text},
           {"answer_type", to_string(q.answer_type)}, {"nullable", q.nullable},
           {"topk", q.topk},                    {"merge_enabled", q.merge_enabled},
           {"stages", stages}};
}

void from_json(const json& j, QuestionSpec& q) {
  const Qid qid = parse_qid(j.at("qid").get<std::string>());
  // Missing fields fall back to the defaults of the same question.
  q = default_question_spec(qid);
  if (j.contains("text")) j.at("text").get_to(q.text);
  if (j.contains("answer_type")) q.answer_type = parse_answer_type(j.at("answer_type").get<std::string>());
  if (j.contains("nullable")) j.at("nullable").get_to(q.nullable);
  if (j.contains("topk")) j.at("topk").get_to(q.topk);
  if (j.contains("merge_enabled")) j.at("merge_enabled").get_to(q.merge_enabled);
  if (j.contains("stages")) {
    q.stages.clear();
    for (const auto& s : j.at("stages")) q.stages.push_back(parse_stage(s.get<std::string>()));
  }
}

void to_json(json& j, const Document& d) {
  j = json{{"doc_id", d.doc_id}, {"text", d.text.str()}, {"meta", d.meta}};
}

void from_json(const json& j, Document& d) {
  j.at("doc_id").get_to(d.doc_id);
  d.text = text::Utf8Text(j.at("text").get<std::string>());
  d.meta = j.value("meta", std::map<std::string, std::string>{});
}

std::string dump_canonical(const json& j) { return j.dump(); }

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json_file(const std::filesystem::path& p) {
  const std::string body = read_text_file(p);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw LoadError(p.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& p, std::string_view content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace docpipe
