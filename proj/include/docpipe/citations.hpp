#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace docpipe {

/// Removes APA-style in-text citations.
///
/// Default patterns cover parenthetical author-year groups such as
/// "(Smith et al., 2020; Lee & Park, 2019a, p. 4)" and narrative year groups
/// such as "Smith (2020)". A citation is removed together with the
/// whitespace before it; runs of spaces are then collapsed. Patterns are
/// applied until a fixpoint so the result is idempotent.
class CitationStripper {
 public:
  CitationStripper();

  /// Adds an ECMAScript regex whose matches are deleted.
  void add_pattern(const std::string& ecma_regex);
  std::string strip(std::string_view text) const;

  static const std::vector<std::string>& default_patterns();

 private:
  std::vector<std::regex> patterns_;
};

std::string strip_citations(std::string_view text);

}  // namespace docpipe
