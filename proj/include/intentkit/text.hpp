#pragma once

// UTF-8 handling, tokenization and key normalization.
//
// Offsets handed out by this header are code-point offsets into the raw
// text, which is what entity annotations use.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "intentkit/common.hpp"

namespace intentkit::text {

/// Decodes UTF-8; throws DataError on malformed input.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto length = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) throw DataError("invalid UTF-8 byte sequence at offset " + std::to_string(i));
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t c) {
  std::uint8_t buf[U8_MAX_LENGTH];
  std::int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
  if (error) throw DataError("code point cannot be encoded as UTF-8");
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

inline std::size_t code_point_length(std::string_view s) { return decode_utf8(s).size(); }

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

inline bool is_word(char32_t c) { return u_isalnum(static_cast<UChar32>(c)); }

// Unicode punctuation plus the ASCII symbol characters (+, $, <, ...).
inline bool is_punct(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  return u_ispunct(static_cast<UChar32>(c));
}

// Simple (length-preserving) case mapping so that offsets survive lowercasing.
inline char32_t to_lower(char32_t c) { return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))); }

inline std::u32string to_lower(std::u32string s) {
  for (auto& c : s) c = to_lower(c);
  return s;
}

inline std::string lower_utf8(std::string_view s) { return encode_utf8(to_lower(decode_utf8(s))); }

struct Token {
  std::string text;    // normalized token
  std::size_t start;   // code-point offset of the first kept character
  std::size_t end;     // exclusive
};

/// Lowercased whitespace tokens with leading/trailing punctuation stripped.
/// Tokens consisting only of punctuation are dropped.
inline std::vector<Token> tokenize_with_offsets(std::string_view raw) {
  const std::u32string cps = decode_utf8(raw);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t word_end = i;
    while (word_end < cps.size() && !is_space(cps[word_end])) ++word_end;
    std::size_t b = i, e = word_end;
    while (b < e && is_punct(cps[b])) ++b;
    while (e > b && is_punct(cps[e - 1])) --e;
    if (b < e) {
      tokens.push_back({encode_utf8(to_lower(cps.substr(b, e - b))), b, e});
    }
    i = word_end;
  }
  return tokens;
}

inline std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(raw)) out.push_back(std::move(t.text));
  return out;
}

/// Raw whitespace-separated words (no lowercasing, no stripping).
inline std::vector<std::string> whitespace_words(std::string_view raw) {
  const std::u32string cps = decode_utf8(raw);
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    if (j > i) words.push_back(encode_utf8(cps.substr(i, j - i)));
    i = j;
  }
  return words;
}

inline bool is_blank(std::string_view raw) {
  for (char32_t c : decode_utf8(raw))
    if (!is_space(c)) return false;
  return true;
}

/// Sentence-key normalization: NFC, full lowercase, whitespace collapsed and trimmed.
inline std::string normalize_key(std::string_view raw) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError("NFC normalizer unavailable");
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<std::int32_t>(raw.size())));
  icu::UnicodeString normalized = nfc->normalize(s, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  normalized.toLower(icu::Locale::getRoot());
  std::string utf8;
  normalized.toUTF8String(utf8);

  std::string out;
  bool pending_space = false;
  for (char32_t c : decode_utf8(utf8)) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    append_utf8(out, c);
  }
  return out;
}

}  // namespace intentkit::text
