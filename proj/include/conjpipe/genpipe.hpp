#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "conjpipe/lean_surface.hpp"
#include "conjpipe/text.hpp"

// Prompt construction, raw-output post-processing, and context augmentation
// for the statement generator.
namespace conjpipe::gen {

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Network or auth failure: the backend could not be reached at all.
struct BackendUnavailable : BackendError {
  using BackendError::BackendError;
};
// The backend answered but produced nothing usable.
struct BackendRefusal : BackendError {
  using BackendError::BackendError;
};

inline constexpr std::string_view kDirectiveClause = "as many as possible";

inline std::string system_prompt(bool directive_many) {
  std::string s =
      "Please generate new theorems in Lean 4 format that are similar but not "
      "identical to each theorem provided in the text";
  if (directive_many) {
    s += " ";
    s += kDirectiveClause;
  }
  s +=
      ". For each theorem in the text, generate a corresponding new theorem with "
      "slight variations in content. Do not include proofs, annotations, or imports. "
      "The new theorems begin with '```lean theorem', not any annotations. They "
      "should end with ':= by```'. Additionally, please use standard mathematical "
      "symbols (e.g., ∀, ∃, √) instead of Unicode escape sequences (e.g., \\u2200).";
  return s;
}

struct PromptBundle {
  std::string system_prompt;
  std::string user_payload;
  bool directive_many = true;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  bool operator==(const TokenUsage&) const = default;
};

struct RawGeneration {
  std::vector<std::string> chunks;
  std::string backend_id;
  std::int64_t timestamp_ms = 0;
  std::optional<TokenUsage> token_usage;
  bool operator==(const RawGeneration&) const = default;
};

// One generated statement with its provenance.
struct Candidate {
  std::string statement;         // begins with `theorem`, ends at `:= by`
  std::string raw_text;          // originating chunk
  std::string seed_id;
  int iteration = 0;             // 1-based round that produced it
  std::string assembled_source;  // augmented source, proof slot open
  bool operator==(const Candidate&) const = default;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string id() const = 0;
  // Raw completion text. Throws BackendUnavailable / BackendRefusal.
  virtual std::string complete(const PromptBundle& prompt) = 0;
  // Deterministic backends get a fixed zero timestamp so generations compare
  // equal across runs.
  virtual bool deterministic() const { return false; }
  // Token counts for the most recent completion, when the backend knows them.
  virtual std::optional<TokenUsage> last_token_usage() const { return std::nullopt; }
};

inline PromptBundle build_prompt(const std::vector<std::string>& seed_statements,
                                 const std::vector<std::string>& accumulated_statements,
                                 bool directive_many) {
  PromptBundle b;
  b.directive_many = directive_many;
  b.system_prompt = system_prompt(directive_many);
  std::string payload;
  auto add = [&](const std::string& s) {
    if (!payload.empty()) payload += "\n\n";
    payload += s;
  };
  for (const auto& s : seed_statements) add(s);
  for (const auto& s : accumulated_statements) add(s);
  b.user_payload = std::move(payload);
  return b;
}

inline PromptBundle build_prompt(const lean::LeanFileStructure& seed,
                                 const std::vector<Candidate>& accumulated,
                                 bool directive_many) {
  std::vector<std::string> seed_statements;
  for (const auto& d : lean::extract_theorems(seed))
    seed_statements.push_back(lean::render_statement(d));
  std::vector<std::string> acc;
  acc.reserve(accumulated.size());
  for (const auto& c : accumulated) acc.push_back(c.statement);
  return build_prompt(seed_statements, acc, directive_many);
}

// Fenced blocks become chunks (fences kept; post-processing strips them).
// Without fences the whole text is one chunk; blank output yields none.
inline std::vector<std::string> split_chunks(std::string_view raw) {
  std::vector<std::string> chunks;
  size_t pos = 0;
  while (true) {
    const size_t open = raw.find("```", pos);
    if (open == std::string_view::npos) break;
    const size_t close = raw.find("```", open + 3);
    if (close == std::string_view::npos) {
      chunks.emplace_back(raw.substr(open));
      break;
    }
    chunks.emplace_back(raw.substr(open, close + 3 - open));
    pos = close + 3;
  }
  if (chunks.empty() && !text::trim(raw).empty()) chunks.emplace_back(raw);
  return chunks;
}

inline RawGeneration generate(GeneratorBackend& backend, const PromptBundle& prompt) {
  RawGeneration out;
  out.backend_id = backend.id();
  const std::string raw = backend.complete(prompt);
  out.chunks = split_chunks(raw);
  out.token_usage = backend.last_token_usage();
  out.timestamp_ms =
      backend.deterministic()
          ? 0
          : std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
  return out;
}

namespace detail {

// Content of the first fenced block, language tag dropped; the chunk itself
// when no fence is present.
inline std::string_view unfence(std::string_view chunk) {
  const size_t open = chunk.find("```");
  if (open == std::string_view::npos) return chunk;
  size_t p = open + 3;
  // Skip a language tag such as `lean` up to end of line.
  size_t tag_end = p;
  while (tag_end < chunk.size() && !text::is_space(chunk[tag_end]) && chunk[tag_end] != '`')
    ++tag_end;
  p = tag_end;
  if (p < chunk.size() && chunk[p] == '\n') ++p;
  const size_t close = chunk.find("```", p);
  return chunk.substr(p, (close == std::string_view::npos ? chunk.size() : close) - p);
}

inline bool is_strippable_modifier(std::string_view w) {
  return w == "protected" || w == "private" || w == "noncomputable" || w == "nonrec";
}

}  // namespace detail

// Reduces one raw chunk to a bare statement, or nothing when the chunk does
// not carry a theorem. The transform is idempotent.
inline std::optional<std::string> postprocess_chunk(std::string_view chunk) {
  std::string s = text::decode_unicode_escapes(text::trim(detail::unfence(chunk)));

  // Leading attribute groups and modifiers.
  std::string_view v = text::trim(s);
  while (true) {
    if (v.size() >= 2 && v[0] == '@' && v[1] == '[') {
      size_t q = 2;
      int depth = 1;
      while (q < v.size() && depth > 0) {
        if (v[q] == '[') ++depth;
        else if (v[q] == ']') --depth;
        ++q;
      }
      v = text::trim(v.substr(q));
      continue;
    }
    size_t i = 0;
    const std::string_view w = text::read_name(v, i);
    if (detail::is_strippable_modifier(w)) {
      v = text::trim(v.substr(i));
      continue;
    }
    break;
  }

  std::string stmt;
  if (text::starts_with_word(v, "theorem")) {
    stmt.assign(v);
  } else if (text::starts_with_word(v, "lemma")) {
    stmt = "theorem";
    stmt.append(v.substr(5));
  } else {
    return std::nullopt;
  }

  // Truncate after the final top-level `:= by`, canonicalizing the anchor's
  // spacing; append one when the generator omitted it.
  const auto mask = text::mask_regions(stmt);
  text::DelimDepth depth;
  size_t anchor = std::string::npos;
  size_t i = 0;
  while (i < stmt.size()) {
    const size_t at = i;
    const std::uint32_t cp = text::decode_utf8(stmt, i);
    if (mask[at] != text::Mask::Code) continue;
    if (depth.at_top() && cp == ':' && at + 1 < stmt.size() && stmt[at + 1] == '=' &&
        mask[at + 1] == text::Mask::Code) {
      size_t q = at + 2;
      while (q < stmt.size() && text::is_space(stmt[q])) ++q;
      if (text::starts_with_word(std::string_view(stmt).substr(q), "by")) anchor = at;
    }
    depth.feed(cp);
  }
  if (anchor != std::string::npos) stmt.erase(anchor);
  return std::string(text::trim(stmt)) + " := by";
}

struct PostprocessResult {
  std::vector<std::string> statements;
  int rejected = 0;
};

inline PostprocessResult postprocess(const RawGeneration& raw) {
  PostprocessResult out;
  for (const auto& chunk : raw.chunks) {
    if (auto stmt = postprocess_chunk(chunk)) {
      out.statements.push_back(std::move(*stmt));
    } else {
      ++out.rejected;
    }
  }
  return out;
}

// Assembled candidate source: the fixed import block, replayed context, then
// the statement with its proof slot still open. `import Mathlib` subsumes
// whatever the seed imported.
inline std::string augment(std::string_view statement, const lean::ContextBlock& ctx) {
  std::string out = "import Mathlib\nimport Aesop\n";
  if (!ctx.opens.empty() || !ctx.variables.empty()) {
    out += "\n";
    for (const auto& o : ctx.opens) out += "open " + o + "\n";
    for (const auto& v : ctx.variables) out += "variable " + v + "\n";
  }
  out += "\n";
  out.append(statement);
  out += "\n";
  return out;
}

}  // namespace conjpipe::gen
