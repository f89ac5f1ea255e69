#pragma once

// UTF-8 helpers. Character counts are Unicode scalar values; malformed
// bytes count as one character each.

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace trace_profiler::unicode {

template <typename Fn>
void for_each_scalar(std::string_view text, Fn&& fn) {
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c = 0;
        U8_NEXT(s, i, length, c);
        fn(static_cast<char32_t>(c < 0 ? 0xFFFD : c));
    }
}

inline std::size_t scalar_count(std::string_view text) {
    std::size_t n = 0;
    for_each_scalar(text, [&](char32_t) { ++n; });
    return n;
}

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

/// Letters (general category L) and decimal digits.
inline bool is_alnum(char32_t c) { return u_isalnum(static_cast<UChar32>(c)) != 0; }

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_left(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && is_ascii_space(s[i])) ++i;
    return s.substr(i);
}

inline std::string_view trim_right(std::string_view s) {
    std::size_t n = s.size();
    while (n > 0 && is_ascii_space(s[n - 1])) --n;
    return s.substr(0, n);
}

inline std::string_view trim(std::string_view s) { return trim_right(trim_left(s)); }

inline bool is_blank(std::string_view s) {
    bool blank = true;
    for_each_scalar(s, [&](char32_t c) {
        if (!is_space(c)) blank = false;
    });
    return blank;
}

/// Byte offsets of the scalar boundaries, including 0 and text.size().
inline std::vector<std::size_t> scalar_boundaries(std::string_view text) {
    std::vector<std::size_t> out;
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    out.push_back(0);
    while (i < length) {
        UChar32 c = 0;
        U8_NEXT(s, i, length, c);
        out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

}  // namespace trace_profiler::unicode
