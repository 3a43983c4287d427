#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "conjpipe/genpipe.hpp"
#include "conjpipe/http_client.hpp"
#include "conjpipe/lean_surface.hpp"

namespace conjpipe::gen {

// Chat-completion backend. Lives behind the same interface as the offline
// mutation backend so the pipeline never cares which one it talks to.
class HttpGenerator : public GeneratorBackend {
 public:
  explicit HttpGenerator(http::ChatEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string id() const override { return "http:" + endpoint_.model; }

  std::string complete(const PromptBundle& prompt) override {
    http::ChatUsage usage;
    const std::string text =
        http::chat_complete(endpoint_, prompt.system_prompt, prompt.user_payload, &usage);
    usage_ = TokenUsage{usage.prompt_tokens, usage.completion_tokens};
    return text;
  }

  std::optional<TokenUsage> last_token_usage() const override { return usage_; }

 private:
  http::ChatEndpoint endpoint_;
  std::optional<TokenUsage> usage_;
};

namespace detail {

// Anatomy of a canonical statement: `theorem <name> <binders> : <goal> := by`.
struct StatementParts {
  std::string name;
  std::string binders;  // may be empty
  std::string goal;
};

inline std::optional<StatementParts> dissect(std::string_view stmt) {
  std::string_view v = text::trim(stmt);
  if (!text::starts_with_word(v, "theorem")) return std::nullopt;
  size_t i = 7;
  while (i < v.size() && text::is_space(v[i])) ++i;
  StatementParts p;
  p.name = std::string(text::read_name(v, i));

  // Trim the `:= by` tail before splitting binders from goal.
  std::string_view rest = text::trim(v.substr(i));
  if (rest.size() >= 5 && rest.substr(rest.size() - 5) == ":= by")
    rest = text::trim(rest.substr(0, rest.size() - 5));

  text::DelimDepth d;
  size_t colon = std::string_view::npos;
  size_t j = 0;
  while (j < rest.size()) {
    const size_t at = j;
    const std::uint32_t cp = text::decode_utf8(rest, j);
    if (d.at_top() && cp == ':' && (at + 1 >= rest.size() || rest[at + 1] != '=')) {
      colon = at;
      break;
    }
    d.feed(cp);
  }
  if (colon == std::string_view::npos) return std::nullopt;
  p.binders = std::string(text::trim(rest.substr(0, colon)));
  p.goal = std::string(text::trim(rest.substr(colon + 1)));
  if (p.goal.empty()) return std::nullopt;
  return p;
}

inline std::string reassemble_statement(const StatementParts& p, std::string_view name_suffix,
                                        std::string_view binders, std::string_view goal) {
  std::string out = "theorem " + p.name + std::string(name_suffix);
  if (!binders.empty()) {
    out += " ";
    out.append(binders);
  }
  out += " : ";
  out.append(goal);
  out += " := by";
  return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// Spans of top-level parenthesized groups within the binder region.
inline std::vector<std::pair<size_t, size_t>> paren_groups(std::string_view binders) {
  std::vector<std::pair<size_t, size_t>> out;
  text::DelimDepth d;
  size_t open = std::string_view::npos;
  size_t i = 0;
  while (i < binders.size()) {
    const size_t at = i;
    const std::uint32_t cp = text::decode_utf8(binders, i);
    if (cp == '(' && d.at_top()) open = at;
    d.feed(cp);
    if (cp == ')' && d.at_top() && open != std::string_view::npos) {
      out.emplace_back(open, i);
      open = std::string_view::npos;
    }
  }
  return out;
}

}  // namespace detail

// Deterministic offline generator: emits variants of the statements it is
// shown, produced by a fixed rule table. Later statements in the payload are
// mutated first, so rounds that feed accumulated conjectures back in keep
// yielding fresh variants. Without the volume directive it emits exactly one
// variant of the first statement, mimicking the single-conjecture failure
// mode the directive exists to avoid.
class MutationBackend : public GeneratorBackend {
 public:
  explicit MutationBackend(std::uint64_t seed = 0, int max_variants = 16)
      : seed_(seed), max_variants_(max_variants) {}

  std::string id() const override { return "mutation"; }
  bool deterministic() const override { return true; }

  std::string complete(const PromptBundle& prompt) override {
    const std::vector<std::string> statements = payload_statements(prompt.user_payload);
    if (statements.empty()) return "";

    std::vector<std::string> variants;
    std::unordered_set<std::string> seen;
    auto admit = [&](std::optional<std::string> v) {
      if (!v) return;
      const std::string key = lean::normalize_statement(*v);
      if (seen.insert(key).second) variants.push_back(std::move(*v));
    };

    if (!prompt.directive_many) {
      for (size_t r = 0; r < kRuleCount && variants.empty(); ++r)
        admit(apply_rule(rule_index(r), statements.front()));
      if (variants.empty()) return "";
      return render({variants.front()});
    }

    // Newest statements first; accumulated conjectures sit at the payload end.
    for (auto it = statements.rbegin();
         it != statements.rend() && static_cast<int>(variants.size()) < max_variants_; ++it) {
      for (size_t r = 0; r < kRuleCount && static_cast<int>(variants.size()) < max_variants_;
           ++r)
        admit(apply_rule(rule_index(r), *it));
    }
    if (variants.empty()) return "";
    return render(variants);
  }

 private:
  static constexpr size_t kRuleCount = 7;

  size_t rule_index(size_t r) const { return (r + seed_) % kRuleCount; }

  static std::vector<std::string> payload_statements(std::string_view payload) {
    std::vector<std::string> out;
    size_t pos = 0;
    std::string current;
    auto flush = [&]() {
      const std::string_view t = text::trim(current);
      if (!t.empty()) out.emplace_back(t);
      current.clear();
    };
    while (pos <= payload.size()) {
      const size_t eol = payload.find('\n', pos);
      const std::string_view line =
          payload.substr(pos, (eol == std::string_view::npos ? payload.size() : eol) - pos);
      if (text::starts_with_word(text::trim(line), "theorem")) {
        flush();
        current.assign(line);
      } else if (!current.empty()) {
        current += "\n";
        current.append(line);
      }
      if (eol == std::string_view::npos) break;
      pos = eol + 1;
    }
    flush();
    return out;
  }

  std::string render(const std::vector<std::string>& variants) const {
    std::string out = "Here are some new theorem statements:";
    for (const auto& v : variants) {
      out += "\n\n```lean\n";
      out += v;
      out += "\n```";
    }
    return out;
  }

  std::optional<std::string> apply_rule(size_t rule, const std::string& stmt) const {
    auto parts = detail::dissect(stmt);
    if (!parts) return std::nullopt;
    if (parts->name.empty()) parts->name = "t";
    switch (rule) {
      case 0: return swap_union_inter(*parts);
      case 1: return swap_interior_closure(*parts);
      case 2: return drop_last_hypothesis(*parts);
      case 3: return rename_binder(*parts);
      case 4: return bump_numerals(*parts);
      case 5: return conjoin_true(*parts);
      case 6: return add_antecedent(*parts);
      default: return std::nullopt;
    }
  }

  static std::optional<std::string> swap_union_inter(const detail::StatementParts& p) {
    const std::string joined = p.binders + "\x02" + p.goal;
    if (joined.find("∪") == std::string::npos && joined.find("∩") == std::string::npos)
      return std::nullopt;
    std::string s = detail::replace_all(joined, "∪", "\x01");
    s = detail::replace_all(s, "∩", "∪");
    s = detail::replace_all(s, "\x01", "∩");
    const size_t sep = s.find('\x02');
    return detail::reassemble_statement(p, "_swap", s.substr(0, sep), s.substr(sep + 1));
  }

  static std::optional<std::string> swap_interior_closure(const detail::StatementParts& p) {
    const std::string joined = p.binders + "\x02" + p.goal;
    std::string s = text::replace_words(joined, "interior", "\x01");
    s = text::replace_words(s, "closure", "interior");
    s = detail::replace_all(s, "\x01", "closure");
    if (s == joined) return std::nullopt;
    const size_t sep = s.find('\x02');
    return detail::reassemble_statement(p, "_dual", s.substr(0, sep), s.substr(sep + 1));
  }

  static std::optional<std::string> drop_last_hypothesis(const detail::StatementParts& p) {
    const auto groups = detail::paren_groups(p.binders);  // spans are end-exclusive
    if (groups.empty()) return std::nullopt;
    const auto [b, e] = groups.back();
    std::string binders = p.binders.substr(0, b) + p.binders.substr(e);
    return detail::reassemble_statement(p, "_gen", text::trim(binders), p.goal);
  }

  static std::optional<std::string> rename_binder(const detail::StatementParts& p) {
    // First identifier inside the first brace/paren binder group.
    size_t i = 0;
    std::string_view b = p.binders;
    while (i < b.size() && b[i] != '{' && b[i] != '(') ++i;
    if (i >= b.size()) return std::nullopt;
    ++i;
    while (i < b.size() && text::is_space(b[i])) ++i;
    size_t j = i;
    const std::string_view name = text::read_name(b, j);
    if (name.empty()) return std::nullopt;
    const std::string fresh = std::string(name) + "'";
    const std::string binders = text::replace_words(p.binders, name, fresh);
    const std::string goal = text::replace_words(p.goal, name, fresh);
    return detail::reassemble_statement(p, "_rn", binders, goal);
  }

  static std::optional<std::string> bump_numerals(const detail::StatementParts& p) {
    std::string_view g = p.goal;
    std::string out;
    bool bumped = false;
    size_t i = 0;
    while (i < g.size()) {
      const char c = g[i];
      if (c >= '0' && c <= '9') {
        const bool left_ok =
            i == 0 || (!text::is_ident_char(static_cast<unsigned char>(g[i - 1])) &&
                       static_cast<unsigned char>(g[i - 1]) < 0x80);
        size_t j = i;
        while (j < g.size() && g[j] >= '0' && g[j] <= '9') ++j;
        bool right_ok = true;
        if (j < g.size()) {
          size_t k = j;
          right_ok = !text::is_ident_char(text::decode_utf8(g, k));
        }
        if (left_ok && right_ok && j - i <= 15) {
          const long long n = std::stoll(std::string(g.substr(i, j - i)));
          out += std::to_string(n + 1);
          bumped = true;
          i = j;
          continue;
        }
        out.append(g.substr(i, j - i));
        i = j;
        continue;
      }
      out += c;
      ++i;
    }
    if (!bumped) return std::nullopt;
    return detail::reassemble_statement(p, "_succ", p.binders, out);
  }

  static std::optional<std::string> conjoin_true(const detail::StatementParts& p) {
    return detail::reassemble_statement(p, "_and", p.binders, "(" + p.goal + ") ∧ True");
  }

  static std::optional<std::string> add_antecedent(const detail::StatementParts& p) {
    static constexpr std::string_view kProps[] = {"P", "Q", "R", "S", "T'"};
    size_t used = 0;
    for (size_t pos = 0; (pos = p.binders.find(": Prop}", pos)) != std::string::npos; ++pos)
      ++used;
    const std::string_view fresh = kProps[std::min(used, sizeof(kProps) / sizeof(kProps[0]) - 1)];
    std::string binders = "{" + std::string(fresh) + " : Prop}";
    if (!p.binders.empty()) binders += " " + p.binders;
    const std::string goal = std::string(fresh) + " → (" + p.goal + ")";
    return detail::reassemble_statement(p, "_of", binders, goal);
  }

  std::uint64_t seed_ = 0;
  int max_variants_ = 16;
};

}  // namespace conjpipe::gen
