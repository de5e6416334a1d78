#pragma once

#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "karum/errors.hpp"

namespace karum {

// NFC-normalize a UTF-8 string. Transliterated Assyrian names are
// diacritic-heavy (Aššur-idī, ḫamuštum); composing them makes token
// equality well-defined regardless of how the source was typed.
inline std::string nfc(std::string_view utf8) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(ec);
  if (U_FAILURE(ec)) {
    throw Error("ICU NFC normalizer unavailable");
  }
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString out = norm->normalize(in, ec);
  if (U_FAILURE(ec)) {
    throw ValidationError("unicode normalization failed");
  }
  std::string result;
  out.toUTF8String(result);
  return result;
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

// Canonical form of a name token: surrounding whitespace stripped, then NFC.
// Case is preserved. May return an empty string; callers decide whether
// emptiness is an error.
inline std::string normalize_name_token(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && is_ascii_space(raw[b])) ++b;
  while (e > b && is_ascii_space(raw[e - 1])) --e;
  return nfc(raw.substr(b, e - b));
}

}  // namespace karum
