#pragma once

#include <algorithm>
#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utypes.h>

#include "cftrag/error.hpp"

namespace cftrag {

namespace detail {

inline bool is_ascii(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

inline bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace detail

/// Canonical form of an entity label: Unicode NFC, leading/trailing white space
/// removed. No case folding. Labels compare by byte equality of this form.
inline std::string normalize_label(std::string_view raw) {
  if (detail::is_ascii(raw)) {
    auto first = std::find_if_not(raw.begin(), raw.end(), detail::is_ascii_space);
    auto last = std::find_if_not(raw.rbegin(), raw.rend(), detail::is_ascii_space).base();
    return first < last ? std::string(first, last) : std::string();
  }

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw InvariantError(std::string("ICU NFC normalizer unavailable: ") + u_errorName(status));
  }
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  icu::UnicodeString normalized = nfc->normalize(text, status);
  if (U_FAILURE(status)) {
    throw DataError(std::string("cannot normalize label: ") + u_errorName(status));
  }
  normalized.trim();
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

}  // namespace cftrag
