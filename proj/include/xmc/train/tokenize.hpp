#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace xmc::train {

namespace detail {

// Length of the UTF-8 whitespace sequence at s[i], 0 if none.
inline std::size_t whitespace_at(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  if (b == ' ' || (b >= 0x09 && b <= 0x0D)) return 1;
  auto byte = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0; };
  if (b == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;  // NEL, NBSP
  if (b == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;     // U+1680
  if (b == 0xE2 && byte(1) == 0x80) {
    const auto c = byte(2);
    if ((c >= 0x80 && c <= 0x8A) || c == 0xA8 || c == 0xA9 || c == 0xAF) return 3;  // U+2000..200A, 2028, 2029, 202F
  }
  if (b == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (b == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

inline bool is_word_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

}  // namespace detail

// Lowercases ASCII letters, splits on Unicode whitespace, trims every piece of
// leading/trailing bytes outside [a-z0-9] and drops pieces that end up empty.
// Interior punctuation is kept ("don't").
inline std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && !detail::is_word_char(current[b])) ++b;
    while (e > b && !detail::is_word_char(current[e - 1])) --e;
    if (e > b) tokens.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (std::size_t i = 0; i < caption.size();) {
    if (const auto ws = detail::whitespace_at(caption, i)) {
      flush();
      i += ws;
      continue;
    }
    char c = caption[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    current.push_back(c);
  }
  flush();
  return tokens;
}

}  // namespace xmc::train
