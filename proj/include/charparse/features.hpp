#pragma once

// Hashed boundary features standing in for a contextual span encoder.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "charparse/error.hpp"

namespace charparse {

inline constexpr std::uint32_t kDefaultFeatureDim = 1u << 20;
inline constexpr std::uint64_t kFeatureHashSeed = 0x63686172'70617273ULL;

// Noncharacters U+FDD0 / U+FDD1 never occur in well-formed text.
inline constexpr std::string_view kLeftSentinel = "\xEF\xB7\x90";
inline constexpr std::string_view kRightSentinel = "\xEF\xB7\x91";

// 64-bit FNV-1a, with the seed folded in as eight leading bytes.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFeatureHashSeed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int k = 0; k < 8; ++k) mix(static_cast<unsigned char>(seed >> (8 * k)));
  for (const char c : bytes) mix(static_cast<unsigned char>(c));
  return h;
}

inline std::string_view length_bucket(int len) {
  switch (len) {
    case 1: return "1";
    case 2: return "2";
    case 3: return "3";
    case 4: return "4";
    default: return len <= 8 ? "5-8" : "9+";
  }
}

struct SpanRepresentation {
  std::vector<std::uint32_t> ids;
  std::uint32_t dim = kDefaultFeatureDim;

  friend bool operator==(const SpanRepresentation&, const SpanRepresentation&) = default;
};

namespace detail {

inline std::string_view char_at(const std::vector<std::string>& chars, int pos) {
  if (pos < 0) return kLeftSentinel;
  if (pos >= static_cast<int>(chars.size())) return kRightSentinel;
  return chars[static_cast<std::size_t>(pos)];
}

}  // namespace detail

// Feature strings before hashing, in a fixed order:
// unigrams at i-1, i, j-1, j; bigrams (i-1,i) and (j-1,j); the span text when
// j-i <= 4; the length bucket.
inline std::vector<std::string> span_feature_strings(const std::vector<std::string>& chars, int i, int j) {
  const int n = static_cast<int>(chars.size());
  if (i < 0 || j > n || i >= j) {
    throw UsageError("span (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for n=" +
                     std::to_string(n));
  }
  using detail::char_at;
  std::vector<std::string> f;
  f.reserve(8);
  const auto cat = [](std::string_view tag, std::string_view a, std::string_view b = {}) {
    std::string s(tag);
    s += '\x1f';
    s += a;
    if (!b.empty()) {
      s += '\x1f';
      s += b;
    }
    return s;
  };
  f.push_back(cat("Lp", char_at(chars, i - 1)));
  f.push_back(cat("L", char_at(chars, i)));
  f.push_back(cat("R", char_at(chars, j - 1)));
  f.push_back(cat("Rn", char_at(chars, j)));
  f.push_back(cat("LB", char_at(chars, i - 1), char_at(chars, i)));
  f.push_back(cat("RB", char_at(chars, j - 1), char_at(chars, j)));
  if (j - i <= 4) {
    std::string text;
    for (int k = i; k < j; ++k) text += chars[static_cast<std::size_t>(k)];
    f.push_back(cat("W", text));
  }
  f.push_back(cat("N", length_bucket(j - i)));
  return f;
}

inline SpanRepresentation span_representation(const std::vector<std::string>& chars, int i, int j,
                                              std::uint32_t dim = kDefaultFeatureDim) {
  if (dim == 0) throw UsageError("feature dimension must be positive");
  SpanRepresentation rep;
  rep.dim = dim;
  for (const auto& s : span_feature_strings(chars, i, j)) {
    rep.ids.push_back(static_cast<std::uint32_t>(fnv1a64(s) % dim));
  }
  return rep;
}

}  // namespace charparse
