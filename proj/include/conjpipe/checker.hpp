#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conjpipe/genpipe.hpp"
#include "conjpipe/lean_surface.hpp"
#include "conjpipe/text.hpp"

// The three-stage evaluation lattice: syntax (sorry compiles clean), novelty
// (exact? finds nothing), non-triviality (aesop fails). Stages short-circuit:
// novelty runs only on valid statements, triviality only on novel ones.
namespace conjpipe::check {

enum class Severity { Error, Warning, Info };

inline std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Info: return "info";
  }
  return "error";
}

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  std::optional<int> line;
  std::optional<int> column;
  bool operator==(const Diagnostic&) const = default;
};

// One diagnostic per `file:line:col: severity: message` record; lines that
// match no record continue the previous message.
inline std::vector<Diagnostic> parse_diagnostics(std::string_view raw) {
  std::vector<Diagnostic> out;

  auto severity_of = [](std::string_view w) -> std::optional<Severity> {
    if (w == "error") return Severity::Error;
    if (w == "warning") return Severity::Warning;
    if (w == "info") return Severity::Info;
    return std::nullopt;
  };

  auto try_record = [&](std::string_view line) -> std::optional<Diagnostic> {
    for (std::string_view sev : {"error: ", "warning: ", "info: "}) {
      if (line.substr(0, sev.size()) == sev) {
        Diagnostic d;
        d.severity = *severity_of(sev.substr(0, sev.size() - 2));
        d.message = std::string(text::trim(line.substr(sev.size())));
        if (d.message.empty()) d.message = std::string(sev.substr(0, sev.size() - 2));
        return d;
      }
    }
    size_t best = std::string_view::npos;
    std::string_view best_sev;
    for (std::string_view sev : {": error: ", ": warning: ", ": info: "}) {
      const size_t p = line.find(sev);
      if (p != std::string_view::npos && p < best) {
        best = p;
        best_sev = sev;
      }
    }
    if (best == std::string_view::npos) return std::nullopt;
    Diagnostic d;
    d.severity = *severity_of(best_sev.substr(2, best_sev.size() - 4));
    d.message = std::string(text::trim(line.substr(best + best_sev.size())));
    if (d.message.empty()) d.message = std::string(best_sev.substr(2, best_sev.size() - 4));

    // Left of the marker: `file:line:col`, both position fields numeric.
    const std::string_view loc = line.substr(0, best);
    const size_t c2 = loc.rfind(':');
    if (c2 != std::string_view::npos) {
      const size_t c1 = loc.rfind(':', c2 - 1);
      if (c1 != std::string_view::npos) {
        const std::string_view lno = loc.substr(c1 + 1, c2 - c1 - 1);
        const std::string_view cno = loc.substr(c2 + 1);
        auto to_int = [](std::string_view s) -> std::optional<int> {
          if (s.empty() || s.size() > 9) return std::nullopt;
          int v = 0;
          for (char ch : s) {
            if (ch < '0' || ch > '9') return std::nullopt;
            v = v * 10 + (ch - '0');
          }
          return v;
        };
        const auto l = to_int(lno), c = to_int(cno);
        if (l && c) {
          d.line = *l;
          d.column = *c;
        }
      }
    }
    return d;
  };

  size_t pos = 0;
  while (pos <= raw.size()) {
    const size_t eol = raw.find('\n', pos);
    std::string_view line =
        raw.substr(pos, (eol == std::string_view::npos ? raw.size() : eol) - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto d = try_record(line)) {
      out.push_back(std::move(*d));
    } else if (!out.empty() && !text::trim(line).empty()) {
      out.back().message += "\n";
      out.back().message += std::string(line);
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return out;
}

enum class SyntaxVerdict { Valid, Invalid };
enum class NoveltyVerdict { Novel, Known };
enum class TrivialityVerdict { NonTrivial, Trivial };

// The lattice result. novelty is present iff syntax is Valid; triviality is
// present iff novelty is Novel.
struct Verdict {
  SyntaxVerdict syntax = SyntaxVerdict::Invalid;
  std::optional<NoveltyVerdict> novelty;
  std::optional<TrivialityVerdict> triviality;
  std::vector<Diagnostic> diagnostics;
  std::optional<std::string> witness;  // exact? suggestion, or "aesop"
  bool operator==(const Verdict&) const = default;

  bool valid() const { return syntax == SyntaxVerdict::Valid; }
  bool novel() const { return novelty && *novelty == NoveltyVerdict::Novel; }
  bool non_trivial() const {
    return triviality && *triviality == TrivialityVerdict::NonTrivial;
  }
};

enum class ProofSlot { Sorry, ExactSearch, Aesop, Explicit };

inline std::string_view proof_slot_text(ProofSlot s) {
  switch (s) {
    case ProofSlot::Sorry: return "sorry";
    case ProofSlot::ExactSearch: return "exact?";
    case ProofSlot::Aesop: return "aesop";
    case ProofSlot::Explicit: return "";
  }
  return "";
}

struct CheckRequest {
  std::string assembled_source;  // proof slot already filled
  ProofSlot proof_slot = ProofSlot::Sorry;
  std::vector<std::string> context_lemmas;  // prior conjectures, novelty stage
  std::chrono::seconds timeout{120};
};

struct CheckResult {
  std::vector<Diagnostic> diagnostics;
  bool timed_out = false;
  bool crashed = false;
  std::string raw_output;
};

class CheckerBackend {
 public:
  virtual ~CheckerBackend() = default;
  virtual std::string id() const = 0;
  virtual CheckResult run(const CheckRequest& request) = 0;
};

struct Timeouts {
  std::chrono::seconds syntax{120};
  std::chrono::seconds exact{60};
  std::chrono::seconds aesop{30};
};

namespace detail {

inline bool is_sorry_warning(const Diagnostic& d) {
  return d.severity == Severity::Warning &&
         d.message.find("declaration uses 'sorry'") != std::string::npos;
}

// Unused-variable warnings come from replayed context binders and do not
// disqualify a statement.
inline bool is_whitelisted_warning(const Diagnostic& d) {
  return d.severity == Severity::Warning &&
         d.message.find("unused variable") != std::string::npos;
}

inline std::optional<std::string> exact_witness(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.severity != Severity::Info) continue;
    const size_t p = d.message.find("Try this:");
    if (p != std::string::npos)
      return std::string(text::trim(std::string_view(d.message).substr(p + 9)));
  }
  return std::nullopt;
}

// Source ending in `:= by`, slot content appended after the `by`.
inline std::string fill_slot(std::string_view assembled, std::string_view slot_text) {
  std::string out(text::trim(assembled));
  if (!slot_text.empty()) {
    out += " ";
    out.append(slot_text);
  }
  out += "\n";
  return out;
}

// Novelty-stage preamble: each prior conjecture becomes a sorry-proved
// auxiliary theorem renamed prior_<i> so names never collide.
inline std::string context_preamble(const std::vector<std::string>& context_lemmas) {
  std::string out;
  for (size_t i = 0; i < context_lemmas.size(); ++i) {
    std::string_view stmt = text::trim(context_lemmas[i]);
    std::string renamed;
    if (text::starts_with_word(stmt, "theorem")) {
      size_t p = 7;
      while (p < stmt.size() && text::is_space(stmt[p])) ++p;
      size_t q = p;
      text::read_name(stmt, q);
      renamed = "theorem prior_" + std::to_string(i) + std::string(stmt.substr(q));
    } else {
      renamed = std::string(stmt);
    }
    out += renamed + " sorry\n\n";
  }
  return out;
}

// Splices extra text immediately before the final statement of an assembled
// candidate source.
inline std::string splice_before_statement(std::string_view assembled,
                                           std::string_view statement,
                                           std::string_view preamble) {
  const size_t p = assembled.rfind(statement);
  if (p == std::string_view::npos)
    return std::string(assembled);  // fall back: statement not found verbatim
  std::string out(assembled.substr(0, p));
  out.append(preamble);
  out.append(assembled.substr(p));
  return out;
}

}  // namespace detail

struct StageResult {
  bool passed = false;  // stage-specific meaning
  std::vector<Diagnostic> diagnostics;
  std::optional<std::string> witness;
};

// Valid iff: zero errors, exactly one sorry warning, and every other warning
// whitelisted. Timeouts and crashes are Invalid with a synthetic diagnostic.
inline StageResult check_syntax(const gen::Candidate& candidate, CheckerBackend& backend,
                                const Timeouts& timeouts = {}) {
  CheckRequest req;
  req.assembled_source =
      detail::fill_slot(candidate.assembled_source, proof_slot_text(ProofSlot::Sorry));
  req.proof_slot = ProofSlot::Sorry;
  req.timeout = timeouts.syntax;
  CheckResult res = backend.run(req);

  StageResult stage;
  stage.diagnostics = res.diagnostics;
  if (res.timed_out) {
    stage.diagnostics.push_back({Severity::Error, "checker timed out", {}, {}});
    return stage;
  }
  if (res.crashed) {
    stage.diagnostics.push_back({Severity::Error, "checker process crashed", {}, {}});
    return stage;
  }
  int errors = 0, sorry_warnings = 0, stray_warnings = 0;
  for (const auto& d : res.diagnostics) {
    if (d.severity == Severity::Error) ++errors;
    else if (detail::is_sorry_warning(d)) ++sorry_warnings;
    else if (d.severity == Severity::Warning && !detail::is_whitelisted_warning(d))
      ++stray_warnings;
  }
  stage.passed = errors == 0 && sorry_warnings == 1 && stray_warnings == 0;
  return stage;
}

// Known iff exact? reports a suggestion; failure to find — including timeout
// and crash — is Novel.
inline StageResult check_novelty(const gen::Candidate& candidate,
                                 const std::vector<std::string>& accumulated,
                                 CheckerBackend& backend, const Timeouts& timeouts = {}) {
  CheckRequest req;
  req.context_lemmas = accumulated;
  std::string source = detail::splice_before_statement(
      candidate.assembled_source, candidate.statement, detail::context_preamble(accumulated));
  req.assembled_source = detail::fill_slot(source, proof_slot_text(ProofSlot::ExactSearch));
  req.proof_slot = ProofSlot::ExactSearch;
  req.timeout = timeouts.exact;
  CheckResult res = backend.run(req);

  StageResult stage;
  stage.diagnostics = res.diagnostics;
  if (res.timed_out)
    stage.diagnostics.push_back({Severity::Info, "exact? search timed out", {}, {}});
  if (res.crashed)
    stage.diagnostics.push_back({Severity::Error, "checker process crashed", {}, {}});
  if (!res.timed_out && !res.crashed) {
    if (auto w = detail::exact_witness(res.diagnostics)) {
      stage.passed = true;  // passed here means Known
      stage.witness = std::move(w);
    }
  }
  return stage;
}

// Trivial iff aesop closes the goal: no errors, no sorry warning, no timeout.
inline StageResult check_triviality(const gen::Candidate& candidate, CheckerBackend& backend,
                                    const Timeouts& timeouts = {}) {
  CheckRequest req;
  req.assembled_source =
      detail::fill_slot(candidate.assembled_source, proof_slot_text(ProofSlot::Aesop));
  req.proof_slot = ProofSlot::Aesop;
  req.timeout = timeouts.aesop;
  CheckResult res = backend.run(req);

  StageResult stage;
  stage.diagnostics = res.diagnostics;
  if (res.timed_out) {
    stage.diagnostics.push_back({Severity::Info, "aesop timed out", {}, {}});
    return stage;  // not proven => NonTrivial
  }
  if (res.crashed) {
    stage.diagnostics.push_back({Severity::Error, "checker process crashed", {}, {}});
    return stage;
  }
  int errors = 0, sorry_warnings = 0;
  for (const auto& d : res.diagnostics) {
    if (d.severity == Severity::Error) ++errors;
    else if (detail::is_sorry_warning(d)) ++sorry_warnings;
  }
  stage.passed = errors == 0 && sorry_warnings == 0;  // passed => Trivial
  if (stage.passed) stage.witness = "aesop";
  return stage;
}

inline Verdict evaluate(const gen::Candidate& candidate,
                        const std::vector<std::string>& accumulated, CheckerBackend& backend,
                        const Timeouts& timeouts = {}) {
  Verdict v;
  StageResult syntax = check_syntax(candidate, backend, timeouts);
  v.diagnostics = std::move(syntax.diagnostics);
  v.syntax = syntax.passed ? SyntaxVerdict::Valid : SyntaxVerdict::Invalid;
  if (!syntax.passed) return v;

  StageResult novelty = check_novelty(candidate, accumulated, backend, timeouts);
  v.diagnostics.insert(v.diagnostics.end(), novelty.diagnostics.begin(),
                       novelty.diagnostics.end());
  v.novelty = novelty.passed ? NoveltyVerdict::Known : NoveltyVerdict::Novel;
  if (novelty.passed) {
    v.witness = novelty.witness;
    return v;
  }

  StageResult triviality = check_triviality(candidate, backend, timeouts);
  v.diagnostics.insert(v.diagnostics.end(), triviality.diagnostics.begin(),
                       triviality.diagnostics.end());
  v.triviality =
      triviality.passed ? TrivialityVerdict::Trivial : TrivialityVerdict::NonTrivial;
  if (triviality.passed) v.witness = triviality.witness;
  return v;
}

}  // namespace conjpipe::check
