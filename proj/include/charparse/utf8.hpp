#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "charparse/error.hpp"

namespace charparse::utf8 {

// Number of bytes of the sequence starting with `lead`, 0 if `lead` cannot
// start a sequence.
inline int sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 0;
}

// Splits `text` into Unicode scalar values, each returned as its UTF-8
// encoding. Throws DataError on malformed input.
inline std::vector<std::string> split_chars(std::string_view text) {
  std::vector<std::string> out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto lead = static_cast<unsigned char>(text[pos]);
    const int len = sequence_length(lead);
    if (len == 0 || pos + len > text.size()) {
      throw DataError("invalid UTF-8 sequence at byte " + std::to_string(pos));
    }
    for (int k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[pos + k]) & 0xC0) != 0x80) {
        throw DataError("invalid UTF-8 continuation at byte " +
                        std::to_string(pos + k));
      }
    }
    out.emplace_back(text.substr(pos, len));
    pos += len;
  }
  return out;
}

inline std::size_t char_count(std::string_view text) {
  std::size_t n = 0;
  for (const char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

inline std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

}  // namespace charparse::utf8
