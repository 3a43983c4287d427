#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace conjpipe::text {

// Region classification for Lean source bytes. String literals and comments
// are masked before any keyword or delimiter scan, so `--` inside a string
// cannot truncate a declaration and brackets inside comments do not skew
// depth tracking.
enum class Mask : unsigned char { Code, LineComment, BlockComment, String };

// Block comments nest, per Lean. Newlines always stay Code so line
// structure survives masking.
inline std::vector<Mask> mask_regions(std::string_view src) {
  std::vector<Mask> mask(src.size(), Mask::Code);
  enum class St { Code, Line, Block, Str };
  St st = St::Code;
  int block_depth = 0;
  size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    switch (st) {
      case St::Code:
        if (c == '"') {
          mask[i] = Mask::String;
          st = St::Str;
          ++i;
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
          mask[i] = mask[i + 1] = Mask::LineComment;
          st = St::Line;
          i += 2;
        } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '-') {
          mask[i] = mask[i + 1] = Mask::BlockComment;
          block_depth = 1;
          st = St::Block;
          i += 2;
        } else {
          ++i;
        }
        break;
      case St::Line:
        if (c == '\n') {
          st = St::Code;
        } else {
          mask[i] = Mask::LineComment;
        }
        ++i;
        break;
      case St::Block:
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '-') {
          mask[i] = mask[i + 1] = Mask::BlockComment;
          ++block_depth;
          i += 2;
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '/') {
          mask[i] = mask[i + 1] = Mask::BlockComment;
          --block_depth;
          i += 2;
          if (block_depth == 0) st = St::Code;
        } else {
          mask[i] = Mask::BlockComment;
          ++i;
        }
        break;
      case St::Str:
        mask[i] = Mask::String;
        if (c == '\\' && i + 1 < src.size()) {
          mask[i + 1] = Mask::String;
          i += 2;
        } else {
          ++i;
          if (c == '"') st = St::Code;
        }
        break;
    }
  }
  return mask;
}

// Decodes one UTF-8 codepoint, advancing `i`. Invalid bytes decode as
// themselves and advance by one, so scanning stays total on arbitrary input.
inline std::uint32_t decode_utf8(std::string_view s, size_t& i) {
  const unsigned char b = static_cast<unsigned char>(s[i]);
  if (b < 0x80) {
    ++i;
    return b;
  }
  size_t len = 0;
  if ((b & 0xE0) == 0xC0) len = 2;
  else if ((b & 0xF0) == 0xE0) len = 3;
  else if ((b & 0xF8) == 0xF0) len = 4;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return b;
  }
  std::uint32_t cp = b & (0x7F >> len);
  for (size_t k = 1; k < len; ++k) {
    const unsigned char cont = static_cast<unsigned char>(s[i + k]);
    if ((cont & 0xC0) != 0x80) {
      ++i;
      return b;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  i += len;
  return cp;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
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
}

inline constexpr std::uint32_t kLeftAngle = 0x27E8;   // ⟨
inline constexpr std::uint32_t kRightAngle = 0x27E9;  // ⟩

// Net depth per delimiter family over (){}[]⟨⟩.
struct DelimDepth {
  int paren = 0;
  int bracket = 0;
  int brace = 0;
  int angle = 0;
  bool underflow = false;

  void feed(std::uint32_t cp) {
    switch (cp) {
      case '(': ++paren; break;
      case ')': if (--paren < 0) underflow = true; break;
      case '[': ++bracket; break;
      case ']': if (--bracket < 0) underflow = true; break;
      case '{': ++brace; break;
      case '}': if (--brace < 0) underflow = true; break;
      case kLeftAngle: ++angle; break;
      case kRightAngle: if (--angle < 0) underflow = true; break;
      default: break;
    }
  }
  bool at_top() const { return paren == 0 && bracket == 0 && brace == 0 && angle == 0; }
  bool ok() const { return at_top() && !underflow; }
};

// Balance check with the text's own strings/comments masked out.
inline bool delimiters_balanced(std::string_view s) {
  const auto mask = mask_regions(s);
  DelimDepth d;
  size_t i = 0;
  while (i < s.size()) {
    const size_t at = i;
    const std::uint32_t cp = decode_utf8(s, i);
    if (mask[at] == Mask::Code) d.feed(cp);
  }
  return d.ok();
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

inline bool is_ident_start(std::uint32_t cp) {
  return cp == '_' || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || cp >= 0x80;
}

inline bool is_ident_char(std::uint32_t cp) {
  return is_ident_start(cp) || (cp >= '0' && cp <= '9') || cp == '\'';
}

inline std::string_view trim(std::string_view s) {
  size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  size_t e = s.size();
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

// Runs of whitespace collapse to a single space; leading/trailing dropped.
inline std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

// True when `s` begins with `w` ending at a token boundary.
inline bool starts_with_word(std::string_view s, std::string_view w) {
  if (s.size() < w.size() || s.substr(0, w.size()) != w) return false;
  if (s.size() == w.size()) return true;
  size_t i = w.size();
  return !is_ident_char(decode_utf8(s, i));
}

// Reads a (possibly dotted) identifier at `i`; empty result if none.
inline std::string_view read_name(std::string_view s, size_t& i) {
  const size_t begin = i;
  size_t probe = i;
  if (probe >= s.size() || !is_ident_start(decode_utf8(s, probe))) return {};
  i = probe;
  while (i < s.size()) {
    size_t next = i;
    const std::uint32_t cp = decode_utf8(s, next);
    if (is_ident_char(cp)) {
      i = next;
    } else if (cp == '.' && next < s.size()) {
      size_t after = next;
      if (is_ident_start(decode_utf8(s, after))) {
        i = next;  // dotted segment continues
      } else {
        break;
      }
    } else {
      break;
    }
  }
  return s.substr(begin, i - begin);
}

// Word-boundary replacement. Bytes >= 0x80 on either side count as
// identifier characters, which is the conservative reading for Lean names.
inline std::string replace_words(std::string_view s, std::string_view from, std::string_view to) {
  if (from.empty()) return std::string(s);
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, from.size(), from) == 0) {
      const bool left_ok = (i == 0) || (!is_ident_char(static_cast<unsigned char>(s[i - 1])) &&
                                        static_cast<unsigned char>(s[i - 1]) < 0x80);
      bool right_ok = true;
      if (i + from.size() < s.size()) {
        size_t j = i + from.size();
        right_ok = !is_ident_char(decode_utf8(s, j));
      }
      if (left_ok && right_ok) {
        out += to;
        i += from.size();
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

// Rewrites \uXXXX escapes outside string literals into their characters.
// Surrogate pairs combine; malformed or lone-surrogate escapes pass through.
inline std::string decode_unicode_escapes(std::string_view s) {
  const auto mask = mask_regions(s);
  auto hex4 = [&](size_t p, std::uint32_t& v) -> bool {
    if (p + 4 > s.size()) return false;
    v = 0;
    for (size_t k = 0; k < 4; ++k) {
      const char c = s[p + k];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
      else return false;
    }
    return true;
  };
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '\\' && i + 6 <= s.size() && s[i + 1] == 'u' && mask[i] == Mask::Code) {
      std::uint32_t v = 0;
      if (hex4(i + 2, v)) {
        size_t consumed = 6;
        if (v >= 0xD800 && v <= 0xDBFF && i + 12 <= s.size() && s[i + 6] == '\\' &&
            s[i + 7] == 'u') {
          std::uint32_t lo = 0;
          if (hex4(i + 8, lo) && lo >= 0xDC00 && lo <= 0xDFFF) {
            v = 0x10000 + ((v - 0xD800) << 10) + (lo - 0xDC00);
            consumed = 12;
          }
        }
        // A decoded backslash would re-arm escape scanning on a second
        // pass, breaking idempotence; leave it encoded.
        if ((v < 0xD800 || v > 0xDFFF) && v != '\\') {
          append_utf8(out, v);
          i += consumed;
          continue;
        }
      }
    }
    out += s[i++];
  }
  return out;
}

}  // namespace conjpipe::text
