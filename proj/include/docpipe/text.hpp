#pragma once

// UTF-8 helpers and code-point offsets. All offsets used across the library
// count Unicode code points, never bytes.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace docpipe::text {

/// Throws docpipe::Error on malformed UTF-8.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);
void append(std::string& out, char32_t cp);
bool is_valid_utf8(std::string_view utf8) noexcept;
std::size_t length(std::string_view utf8);

// Character classes. Non-ASCII coverage is approximate: Latin-1, Latin
// Extended, Greek, Cyrillic and CJK are letters; General Punctuation, Latin-1
// symbols and CJK punctuation are not.
bool is_space(char32_t c) noexcept;
bool is_digit(char32_t c) noexcept;
bool is_letter(char32_t c) noexcept;
inline bool is_alnum(char32_t c) noexcept { return is_letter(c) || is_digit(c); }
/// Regex `\w` equivalent: letters, digits and underscore.
inline bool is_word_char(char32_t c) noexcept { return is_alnum(c) || c == U'_'; }
/// The ASCII punctuation set `!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~`.
bool is_ascii_punct(char32_t c) noexcept;

char32_t to_lower(char32_t c) noexcept;
std::string to_lower(std::string_view utf8);

std::string trim(std::string_view utf8);
std::vector<std::string> split_whitespace(std::string_view utf8);
/// Splits on whitespace and rejoins with single spaces.
std::string collapse_whitespace(std::string_view utf8);
std::string remove_whitespace(std::string_view utf8);

/// UTF-8 string with a code-point index for O(1) slicing by character offset.
class Utf8Text {
 public:
  Utf8Text() : offsets_{0} {}
  explicit Utf8Text(std::string utf8);

  const std::string& str() const noexcept { return bytes_; }
  /// Length in code points.
  std::size_t size() const noexcept { return offsets_.size() - 1; }
  bool empty() const noexcept { return size() == 0; }
  char32_t at(std::size_t cp) const;
  /// Code points [start, end); throws std::out_of_range when invalid.
  std::string slice(std::size_t start, std::size_t end) const;
  std::size_t byte_offset(std::size_t cp) const { return offsets_.at(cp); }

  friend bool operator==(const Utf8Text& a, const Utf8Text& b) { return a.bytes_ == b.bytes_; }

 private:
  std::string bytes_;
  std::vector<std::size_t> offsets_;
};

}  // namespace docpipe::text
