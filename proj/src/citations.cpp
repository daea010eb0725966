#include "docpipe/citations.hpp"

#include "docpipe/error.hpp"

namespace docpipe {

namespace {

std::vector<std::string> build_default_patterns() {
  const std::string name = R"((?:(?:van|von|de|der|del|da|di|le|la) )*[A-Z][^\s(),;:0-9&]*)";
  const std::string authors =
      name + R"((?:(?:, |,? & |,? and | )(?:)" + name + R"())*(?: et al\.?)?)";
  const std::string year = R"((?:(?:1[89]|20)\d{2}[a-z]?|n\.d\.|in press|forthcoming))";
  const std::string years = year + R"((?:, ?)" + year + R"()*)";
  const std::string locator = R"((?:, (?:p|pp|ch|chap)\. ?\d+(?:(?:-|–)\d+)?)?)";
  const std::string prefix =
      R"((?:(?:see also|see|e\.g\.,?|cf\.|i\.e\.,?|for a review,? see|as cited in) )?)";
  const std::string item = prefix + authors + ", " + years + locator;
  return {
      // Parenthetical: "(Smith et al., 2020; Lee, 2019)".
      R"([ \t]*\()" + item + R"((?:; ?)" + item + R"()*\))",
      // Narrative: "Smith (2020)".
      R"([ \t]*\()" + years + locator + R"(\))",
  };
}

}  // namespace

const std::vector<std::string>& CitationStripper::default_patterns() {
  static const std::vector<std::string> patterns = build_default_patterns();
  return patterns;
}

CitationStripper::CitationStripper() {
  for (const auto& p : default_patterns()) add_pattern(p);
}

void CitationStripper::add_pattern(const std::string& ecma_regex) {
  try {
    patterns_.emplace_back(ecma_regex, std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw ValidationError("invalid citation pattern '" + ecma_regex + "': " + e.what());
  }
}

std::string CitationStripper::strip(std::string_view text) const {
  static const std::regex spaces("  +");
  std::string cur(text);
  while (true) {
    std::string next = cur;
    for (const auto& re : patterns_) next = std::regex_replace(next, re, "");
    next = std::regex_replace(next, spaces, " ");
    if (next == cur) return next;
    cur = std::move(next);
  }
}

std::string strip_citations(std::string_view text) {
  static const CitationStripper stripper;
  return stripper.strip(text);
}

}  // namespace docpipe
