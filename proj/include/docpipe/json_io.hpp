#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "docpipe/types.hpp"

namespace docpipe {

using json = nlohmann::json;

void to_json(json& j, const Span& s);
void from_json(const json& j, Span& s);
void to_json(json& j, const Answer& a);
void from_json(const json& j, Answer& a);
void to_json(json& j, const AnswerSet& a);
void from_json(const json& j, AnswerSet& a);
void to_json(json& j, const GoldAnnotation& g);
void from_json(const json& j, GoldAnnotation& g);
void to_json(json& j, const QuestionSpec& q);
void from_json(const json& j, QuestionSpec& q);
void to_json(json& j, const Document& d);
void from_json(const json& j, Document& d);

/// Compact form with sorted keys; the input to every digest.
std::string dump_canonical(const json& j);
/// Two-space indented form with trailing newline; used for persisted files.
std::string dump_pretty(const json& j);

std::string sha256_hex(std::string_view bytes);

json read_json_file(const std::filesystem::path& p);
/// Writes atomically via a sibling temp file.
void write_text_file(const std::filesystem::path& p, std::string_view content);
std::string read_text_file(const std::filesystem::path& p);

}  // namespace docpipe
