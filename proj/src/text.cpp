#include "docpipe/text.hpp"

#include <stdexcept>

#include "docpipe/error.hpp"

namespace docpipe::text {

namespace {

// Returns the code point and advances i; returns U+FFFFFFFF on error.
constexpr char32_t kBad = 0xFFFFFFFF;

char32_t next_cp(std::string_view s, std::size_t& i) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    return kBad;
  }
  if (i + extra >= s.size()) return kBad;
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return kBad;
    cp = (cp << 6) | (b & 0x3F);
  }
  // Reject overlong forms, surrogates and out-of-range values.
  static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
  if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return kBad;
  i += extra + 1;
  return cp;
}

}  // namespace

std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    const char32_t cp = next_cp(utf8, i);
    if (cp == kBad) throw Error("invalid UTF-8 at byte " + std::to_string(i));
    out.push_back(cp);
  }
  return out;
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) append(out, c);
  return out;
}

bool is_valid_utf8(std::string_view utf8) noexcept {
  std::size_t i = 0;
  while (i < utf8.size()) {
    if (next_cp(utf8, i) == kBad) return false;
  }
  return true;
}

std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

bool is_space(char32_t c) noexcept {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_digit(char32_t c) noexcept { return c >= U'0' && c <= U'9'; }

bool is_letter(char32_t c) noexcept {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
  if (c < 0xC0) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c <= 0x24F) return true;                  // Latin-1 letters, Latin Extended A/B
  if (c >= 0x250 && c <= 0x2AF) return true;    // IPA
  if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387;  // Greek
  if (c >= 0x400 && c <= 0x52F) return true;    // Cyrillic
  if (c >= 0x1E00 && c <= 0x1FFF) return true;  // Latin/Greek extended additional
  if (c >= 0x2000 && c <= 0x2BFF) return false; // punctuation, symbols, arrows
  if (c >= 0x2E00 && c <= 0x2E7F) return false; // supplemental punctuation
  if (c >= 0x3000 && c <= 0x303F) return false; // CJK symbols and punctuation
  if (c >= 0xFE30 && c <= 0xFE6F) return false; // CJK compatibility forms
  if (c >= 0xFF00 && c <= 0xFF0F) return false; // fullwidth punctuation
  return !is_space(c);
}

bool is_ascii_punct(char32_t c) noexcept {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

char32_t to_lower(char32_t c) noexcept {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

std::string to_lower(std::string_view utf8) {
  std::u32string cps = decode(utf8);
  for (auto& c : cps) c = to_lower(c);
  return encode(cps);
}

std::string trim(std::string_view utf8) {
  const std::u32string cps = decode(utf8);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && is_space(cps[b])) ++b;
  while (e > b && is_space(cps[e - 1])) --e;
  return encode(std::u32string_view(cps).substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view utf8) {
  std::vector<std::string> out;
  std::string cur;
  for (char32_t c : decode(utf8)) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      append(cur, c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string collapse_whitespace(std::string_view utf8) {
  std::string out;
  for (const auto& w : split_whitespace(utf8)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string remove_whitespace(std::string_view utf8) {
  std::string out;
  for (char32_t c : decode(utf8)) {
    if (!is_space(c)) append(out, c);
  }
  return out;
}

Utf8Text::Utf8Text(std::string utf8) : bytes_(std::move(utf8)) {
  offsets_.reserve(bytes_.size() + 1);
  std::size_t i = 0;
  while (i < bytes_.size()) {
    offsets_.push_back(i);
    if (next_cp(bytes_, i) == kBad) throw Error("invalid UTF-8 at byte " + std::to_string(i));
  }
  offsets_.push_back(bytes_.size());
}

char32_t Utf8Text::at(std::size_t cp) const {
  if (cp >= size()) throw std::out_of_range("Utf8Text::at");
  std::size_t i = offsets_[cp];
  return next_cp(bytes_, i);
}

std::string Utf8Text::slice(std::size_t start, std::size_t end) const {
  if (start > end || end > size()) {
    throw std::out_of_range("slice [" + std::to_string(start) + "," + std::to_string(end) +
                            ") outside text of length " + std::to_string(size()));
  }
  return bytes_.substr(offsets_[start], offsets_[end] - offsets_[start]);
}

}  // namespace docpipe::text
