#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conjpipe/text.hpp"

// Rule-based surface scanner for Lean 4 source files. It recognizes
// declarations by keyword at the start of a column-zero line, tracks
// delimiter depth for signature/body splits, and never fails: whatever it
// cannot model lands in `Other` spans. It is not a Lean grammar and does no
// elaboration or name resolution.
namespace conjpipe::lean {

enum class DeclKind { Theorem, Lemma, Def, Abbrev, Instance, Example, Other };

struct ByteSpan {
  size_t begin = 0;
  size_t end = 0;
  size_t size() const { return end - begin; }
};

struct Declaration {
  DeclKind kind = DeclKind::Other;
  std::vector<std::string> modifiers;
  std::vector<std::string> attributes;  // contents of @[...] groups
  std::string name;                     // empty for anonymous declarations
  std::string signature;                // after the name, up to the top-level := / where
  std::optional<std::string> proof_span;
  ByteSpan source_span;
  // Set when the signature's delimiters do not balance; such declarations
  // come from malformed input and are kept rather than rejected.
  bool delimiter_warning = false;
};

enum class SegmentKind { Import, Open, Variable, Declaration, Other };

// One contiguous byte range of the input. Segments cover the whole file in
// order; concatenating them reproduces the input byte-for-byte.
struct Segment {
  SegmentKind kind = SegmentKind::Other;
  ByteSpan span;
  size_t index = SIZE_MAX;  // index into the matching field, when applicable
};

struct LeanFileStructure {
  std::vector<std::string> imports;
  std::vector<std::string> opens;      // explicit opens plus enclosing namespaces
  std::vector<std::string> variables;  // raw binder-group text per variable command
  std::vector<Declaration> declarations;
  std::vector<Segment> segments;
  size_t source_size = 0;
};

// The portion of a file's context replayed onto generated candidates.
struct ContextBlock {
  std::vector<std::string> imports;
  std::vector<std::string> opens;
  std::vector<std::string> variables;
  bool operator==(const ContextBlock&) const = default;
  bool empty() const { return imports.empty() && opens.empty() && variables.empty(); }
};

namespace detail {

inline bool is_modifier_word(std::string_view w) {
  return w == "protected" || w == "private" || w == "noncomputable" || w == "nonrec" ||
         w == "unsafe" || w == "partial" || w == "scoped" || w == "local";
}

inline std::optional<DeclKind> decl_kind_of(std::string_view w) {
  if (w == "theorem") return DeclKind::Theorem;
  if (w == "lemma") return DeclKind::Lemma;
  if (w == "def") return DeclKind::Def;
  if (w == "abbrev") return DeclKind::Abbrev;
  if (w == "instance") return DeclKind::Instance;
  if (w == "example") return DeclKind::Example;
  // Declaration-shaped commands we keep but do not classify further.
  if (w == "structure" || w == "inductive" || w == "class" || w == "axiom" ||
      w == "opaque" || w == "constant" || w == "macro" || w == "macro_rules" ||
      w == "syntax" || w == "notation" || w == "elab")
    return DeclKind::Other;
  return std::nullopt;
}

// Directive keywords handled by the line scanner itself.
inline bool is_directive_word(std::string_view w) {
  return w == "import" || w == "open" || w == "variable" || w == "variables" ||
         w == "namespace" || w == "end" || w == "section" || w == "universe" ||
         w == "set_option" || w == "attribute" || w == "export" || w == "mutual" ||
         w == "deriving";
}

struct LineIndex {
  std::vector<size_t> begin;  // offset of each line start
  size_t source_size = 0;

  explicit LineIndex(std::string_view src) : source_size(src.size()) {
    begin.push_back(0);
    for (size_t i = 0; i < src.size(); ++i)
      if (src[i] == '\n') begin.push_back(i + 1);
    if (!begin.empty() && begin.back() == src.size() && src.size() > 0) begin.pop_back();
  }
  size_t count() const { return begin.size(); }
  size_t start(size_t i) const { return begin[i]; }
  size_t end(size_t i) const { return i + 1 < begin.size() ? begin[i + 1] : source_size; }
};

}  // namespace detail

inline LeanFileStructure parse_file(std::string_view source) {
  using text::Mask;
  LeanFileStructure out;
  out.source_size = source.size();
  if (source.empty()) return out;

  const auto mask = text::mask_regions(source);
  const detail::LineIndex lines(source);
  const size_t n = lines.count();

  auto first_content = [&](size_t li) -> size_t {
    // Column-zero scans only: indented lines are continuations by definition.
    return lines.start(li);
  };
  auto line_blank = [&](size_t li) {
    for (size_t p = lines.start(li); p < lines.end(li); ++p)
      if (!text::is_space(source[p])) return false;
    return true;
  };
  // A comment opening at column zero terminates any declaration extent.
  auto comment_opens_line = [&](size_t li) {
    const size_t p = lines.start(li);
    if (p >= source.size() || mask[p] == Mask::Code) return false;
    return p + 1 < source.size() &&
           ((source[p] == '-' && source[p + 1] == '-') ||
            (source[p] == '/' && source[p + 1] == '-'));
  };
  // First word of a line when it starts unmasked at column zero.
  auto col0_word = [&](size_t li) -> std::string_view {
    const size_t p = first_content(li);
    if (p >= lines.end(li) || text::is_space(source[p]) || mask[p] != Mask::Code) return {};
    if (source[p] == '@' && p + 1 < source.size() && source[p + 1] == '[') return "@[";
    size_t q = p;
    std::string_view w = text::read_name(source, q);
    return w;
  };
  auto structural = [&](size_t li) {
    const std::string_view w = col0_word(li);
    if (w.empty()) return false;
    if (w == "@[") return true;
    return detail::is_directive_word(w) || detail::is_modifier_word(w) ||
           detail::decl_kind_of(w).has_value();
  };

  // Pending Other bytes accumulate until a modeled segment flushes them.
  size_t other_begin = SIZE_MAX;
  auto note_other = [&](size_t b, size_t e) {
    if (b >= e) return;
    if (other_begin == SIZE_MAX) other_begin = b;
  };
  size_t other_end = 0;
  auto flush_other = [&](void) {
    if (other_begin != SIZE_MAX) {
      out.segments.push_back({SegmentKind::Other, {other_begin, other_end}, SIZE_MAX});
      other_begin = SIZE_MAX;
    }
  };
  auto push_other_lines = [&](size_t li_begin, size_t li_end) {
    note_other(lines.start(li_begin), lines.end(li_end - 1));
    other_end = lines.end(li_end - 1);
  };
  auto push_segment = [&](SegmentKind k, ByteSpan s, size_t idx) {
    flush_other();
    out.segments.push_back({k, s, idx});
  };

  // Advances past whitespace and masked regions, so comments between a
  // declaration's attributes and its keyword are skipped over.
  auto skip_ws = [&](size_t p, size_t limit) {
    while (p < limit && (mask[p] != Mask::Code || text::is_space(source[p]))) ++p;
    return p;
  };

  size_t li = 0;
  while (li < n) {
    const std::string_view w = col0_word(li);

    if (w.empty()) {
      push_other_lines(li, li + 1);
      ++li;
      continue;
    }

    if (w == "import") {
      size_t p = lines.start(li) + w.size();
      const std::string_view rest = text::trim(source.substr(p, lines.end(li) - p));
      const auto toks = text::split_ws(rest);
      if (!toks.empty()) {
        out.imports.push_back(toks.front());
        push_segment(SegmentKind::Import, {lines.start(li), lines.end(li)}, out.imports.size() - 1);
      } else {
        push_other_lines(li, li + 1);
      }
      ++li;
      continue;
    }

    if (w == "open") {
      size_t p = lines.start(li) + w.size();
      const std::string_view rest = source.substr(p, lines.end(li) - p);
      bool any = false;
      for (const auto& tok : text::split_ws(text::trim(rest))) {
        if (tok == "scoped") continue;
        if (tok == "in" || tok.front() == '(') break;
        out.opens.push_back(tok);
        any = true;
      }
      if (any) {
        push_segment(SegmentKind::Open, {lines.start(li), lines.end(li)}, out.opens.size() - 1);
      } else {
        push_other_lines(li, li + 1);
      }
      ++li;
      continue;
    }

    if (w == "variable" || w == "variables") {
      // Binder groups may span lines; consume until delimiters balance.
      const size_t text_begin = lines.start(li) + w.size();
      size_t last = li;
      text::DelimDepth d;
      auto feed_line = [&](size_t lj, size_t from) {
        size_t p = from;
        const size_t e = lines.end(lj);
        while (p < e) {
          const size_t at = p;
          const std::uint32_t cp = text::decode_utf8(source, p);
          if (mask[at] == Mask::Code) d.feed(cp);
        }
      };
      feed_line(li, text_begin);
      while (!d.at_top() && last + 1 < n && !structural(last + 1) && !comment_opens_line(last + 1)) {
        ++last;
        feed_line(last, lines.start(last));
      }
      const std::string binder(
          text::trim(source.substr(text_begin, lines.end(last) - text_begin)));
      if (!binder.empty()) {
        out.variables.push_back(binder);
        push_segment(SegmentKind::Variable, {lines.start(li), lines.end(last)},
                     out.variables.size() - 1);
      } else {
        push_other_lines(li, last + 1);
      }
      li = last + 1;
      continue;
    }

    if (w == "namespace") {
      size_t p = lines.start(li) + w.size();
      p = skip_ws(p, lines.end(li));
      const std::string_view name = text::read_name(source, p);
      if (!name.empty()) out.opens.emplace_back(name);
      push_other_lines(li, li + 1);
      ++li;
      continue;
    }

    if (detail::is_directive_word(w)) {
      // end / section / universe / set_option / attribute / export / mutual /
      // deriving: structurally relevant as boundaries, otherwise unmodeled.
      push_other_lines(li, li + 1);
      ++li;
      continue;
    }

    // Declaration block: attributes and modifiers may precede the keyword,
    // possibly across lines.
    {
      const size_t block_begin = lines.start(li);
      std::vector<std::string> attributes;
      std::vector<std::string> modifiers;
      size_t p = block_begin;
      const size_t hard_limit = source.size();
      bool parsed_header = false;
      std::optional<DeclKind> kind;
      size_t kw_line = li;

      auto line_of = [&](size_t pos) {
        size_t lo = li;
        while (lo + 1 < n && lines.start(lo + 1) <= pos) ++lo;
        return lo;
      };

      while (true) {
        p = skip_ws(p, hard_limit);
        if (p >= hard_limit) break;
        if (source[p] == '@' && p + 1 < hard_limit && source[p + 1] == '[') {
          // Attribute group: scan to the matching bracket, masked-aware.
          size_t q = p + 2;
          int depth = 1;
          while (q < hard_limit && depth > 0) {
            if (mask[q] == Mask::Code) {
              if (source[q] == '[') ++depth;
              else if (source[q] == ']') --depth;
            }
            ++q;
          }
          attributes.emplace_back(
              text::trim(source.substr(p + 2, (q > p + 2 ? q - 1 : p + 2) - (p + 2))));
          p = q;
          continue;
        }
        size_t q = p;
        const std::string_view word = text::read_name(source, q);
        if (word.empty()) break;
        if (detail::is_modifier_word(word)) {
          modifiers.emplace_back(word);
          p = q;
          continue;
        }
        kind = detail::decl_kind_of(word);
        if (kind) {
          kw_line = line_of(p);
          p = q;
          parsed_header = true;
        }
        break;
      }

      if (!parsed_header) {
        // An attribute or modifier attached to nothing we recognize.
        push_other_lines(li, li + 1);
        ++li;
        continue;
      }

      // Body extent: keyword line plus following lines until a column-zero
      // structural or comment-opening line.
      size_t last = kw_line;
      while (last + 1 < n && !structural(last + 1) && !comment_opens_line(last + 1)) ++last;
      while (last > kw_line && line_blank(last)) --last;

      const size_t block_end = lines.end(last);
      Declaration d;
      d.kind = *kind;
      d.modifiers = std::move(modifiers);
      d.attributes = std::move(attributes);
      d.source_span = {block_begin, block_end};

      // Name (absent for anonymous instance/example forms).
      p = skip_ws(p, block_end);
      if (p < block_end) {
        size_t q = p;
        const std::string_view name = text::read_name(source, q);
        if (!name.empty() && !detail::is_directive_word(name)) {
          d.name.assign(name);
          p = q;
        }
      }

      // Split signature from body at the first top-level `:=` or `where`.
      text::DelimDepth depth;
      size_t split = block_end;
      enum class SplitKind { None, Assign, Where } split_kind = SplitKind::None;
      size_t scan = p;
      while (scan < block_end) {
        const size_t at = scan;
        const std::uint32_t cp = text::decode_utf8(source, scan);
        if (mask[at] != Mask::Code) continue;
        if (depth.at_top()) {
          if (cp == ':' && at + 1 < block_end && source[at + 1] == '=' &&
              mask[at + 1] == Mask::Code) {
            split = at;
            split_kind = SplitKind::Assign;
            break;
          }
          if (cp == 'w' && text::starts_with_word(source.substr(at, block_end - at), "where") &&
              (at == p || text::is_space(source[at - 1]))) {
            split = at;
            split_kind = SplitKind::Where;
            break;
          }
        }
        depth.feed(cp);
      }

      d.signature.assign(text::trim(source.substr(p, split - p)));
      if (split_kind == SplitKind::Assign) {
        size_t b = split + 2;
        std::string_view body = text::trim(source.substr(b, block_end - b));
        if (text::starts_with_word(body, "by")) body = text::trim(body.substr(2));
        if (!body.empty()) d.proof_span = std::string(body);
      } else if (split_kind == SplitKind::Where) {
        const std::string_view body =
            text::trim(source.substr(split + 5, block_end - (split + 5)));
        if (!body.empty()) d.proof_span = std::string(body);
      }
      d.delimiter_warning = !text::delimiters_balanced(d.signature);

      out.declarations.push_back(std::move(d));
      push_segment(SegmentKind::Declaration, {block_begin, block_end},
                   out.declarations.size() - 1);
      li = last + 1;
      continue;
    }
  }
  flush_other();
  return out;
}

inline ContextBlock extract_context(const LeanFileStructure& file) {
  return ContextBlock{file.imports, file.opens, file.variables};
}

inline std::vector<Declaration> extract_theorems(const LeanFileStructure& file) {
  std::vector<Declaration> out;
  for (const auto& d : file.declarations)
    if (d.kind == DeclKind::Theorem || d.kind == DeclKind::Lemma) out.push_back(d);
  return out;
}

// Rendering a ContextBlock and re-parsing it yields an equal ContextBlock.
inline std::string render_context(const ContextBlock& ctx) {
  std::string out;
  for (const auto& m : ctx.imports) out += "import " + m + "\n";
  for (const auto& o : ctx.opens) out += "open " + o + "\n";
  for (const auto& v : ctx.variables) out += "variable " + v + "\n";
  return out;
}

// Canonical statement form used throughout the pipeline: proofs dropped,
// `lemma` rendered as `theorem`.
inline std::string render_statement(const Declaration& d) {
  std::string out = "theorem";
  if (!d.name.empty()) out += " " + d.name;
  if (!d.signature.empty()) out += " " + d.signature;
  out += " := by";
  return out;
}

// Byte-for-byte reassembly from the segment list; the lossless-span check.
inline std::string reassemble(std::string_view source, const LeanFileStructure& file) {
  std::string out;
  out.reserve(source.size());
  for (const auto& seg : file.segments)
    out.append(source.substr(seg.span.begin, seg.span.size()));
  return out;
}

// Dedup key for statements: whitespace runs collapse and the theorem name is
// dropped, so renamed but otherwise identical statements compare equal.
inline std::string normalize_statement(std::string_view stmt) {
  std::string c = text::collapse_ws(stmt);
  std::string_view v = c;
  if (!text::starts_with_word(v, "theorem")) return c;
  size_t i = 7;
  while (i < v.size() && text::is_space(v[i])) ++i;
  const std::string_view name = text::read_name(v, i);
  if (name.empty()) return c;
  while (i < v.size() && text::is_space(v[i])) ++i;
  std::string out = "theorem ";
  out.append(v.substr(i));
  return out;
}

}  // namespace conjpipe::lean
