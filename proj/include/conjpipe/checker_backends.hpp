#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "conjpipe/checker.hpp"
#include "conjpipe/lean_surface.hpp"
#include "conjpipe/subprocess.hpp"

namespace conjpipe::check {

// Scriptable stub: maps source patterns to canned results so the whole
// pipeline runs hermetically. First matching rule wins; per-slot defaults
// apply otherwise.
class ScriptedChecker : public CheckerBackend {
 public:
  struct Rule {
    std::string pattern;            // substring of the assembled source
    std::optional<ProofSlot> slot;  // restrict to one probe kind
    CheckResult result;
  };

  std::vector<Rule> rules;
  CheckResult default_sorry;
  CheckResult default_exact;
  CheckResult default_aesop;
  // When set, a candidate whose statement matches one of the request's
  // context lemmas (after normalization) is reported Known, mirroring how
  // exact? closes a goal from an in-context duplicate.
  bool detect_self_match = false;

  ScriptedChecker() {
    default_sorry.diagnostics = {
        {Severity::Warning, "declaration uses 'sorry'", 3, 0}};
    default_exact.diagnostics = {{Severity::Error, "exact? could not close the goal", 3, 0}};
    default_aesop.diagnostics = {
        {Severity::Error, "aesop: failed to prove the goal after exhaustive search", 3, 0}};
  }

  // Everything valid, novel, and non-trivial.
  static ScriptedChecker permissive() { return ScriptedChecker{}; }

  // Everything valid but already known to exact?.
  static ScriptedChecker all_known() {
    ScriptedChecker c;
    c.default_exact = CheckResult{
        {{Severity::Info, "Try this: exact known_lemma", 3, 0}}, false, false, ""};
    return c;
  }

  // Everything valid, novel, and closed by aesop.
  static ScriptedChecker all_trivial() {
    ScriptedChecker c;
    c.default_aesop = CheckResult{{}, false, false, ""};
    return c;
  }

  std::string id() const override { return "stub"; }

  CheckResult run(const CheckRequest& request) override {
    if (detect_self_match && request.proof_slot == ProofSlot::ExactSearch) {
      if (auto stmt = last_statement(request.assembled_source)) {
        const std::string key = lean::normalize_statement(*stmt);
        for (size_t i = 0; i < request.context_lemmas.size(); ++i) {
          if (lean::normalize_statement(request.context_lemmas[i]) == key) {
            return CheckResult{
                {{Severity::Info, "Try this: exact prior_" + std::to_string(i), 3, 0}},
                false,
                false,
                ""};
          }
        }
      }
    }
    for (const auto& rule : rules) {
      if (rule.slot && *rule.slot != request.proof_slot) continue;
      if (request.assembled_source.find(rule.pattern) != std::string::npos)
        return rule.result;
    }
    switch (request.proof_slot) {
      case ProofSlot::Sorry: return default_sorry;
      case ProofSlot::ExactSearch: return default_exact;
      case ProofSlot::Aesop: return default_aesop;
      case ProofSlot::Explicit: return CheckResult{};  // clean check
    }
    return CheckResult{};
  }

 private:
  static std::optional<std::string> last_statement(const std::string& source) {
    const auto parsed = lean::parse_file(source);
    for (auto it = parsed.declarations.rbegin(); it != parsed.declarations.rend(); ++it) {
      if (it->kind == lean::DeclKind::Theorem || it->kind == lean::DeclKind::Lemma)
        return lean::render_statement(*it);
    }
    return std::nullopt;
  }
};

struct SubprocessCheckerConfig {
  std::string lean_command = "lake env lean";  // run inside the workspace
  std::string workspace;                       // pre-built Mathlib checkout
  std::filesystem::path scratch_dir;           // temp .lean files land here
  bool keep_logs = false;
};

// Invokes the Lean toolchain on a temp file inside a pre-built workspace and
// parses its diagnostics. Requires a multi-gigabyte toolchain; everything
// hermetic goes through ScriptedChecker instead.
class SubprocessChecker : public CheckerBackend {
 public:
  explicit SubprocessChecker(SubprocessCheckerConfig config) : config_(std::move(config)) {
    if (config_.scratch_dir.empty())
      config_.scratch_dir = std::filesystem::temp_directory_path() / "conj-check";
    std::filesystem::create_directories(config_.scratch_dir);
  }

  std::string id() const override { return "subprocess"; }

  CheckResult run(const CheckRequest& request) override {
    const auto file =
        config_.scratch_dir / ("check_" + std::to_string(counter_++) + ".lean");
    {
      std::ofstream out(file);
      out << request.assembled_source;
    }
    std::string cmd;
    if (!config_.workspace.empty()) cmd += "cd '" + config_.workspace + "' && ";
    cmd += config_.lean_command + " '" + file.string() + "'";
    const proc::CommandResult pr = proc::run_command(cmd, request.timeout);

    CheckResult res;
    res.raw_output = pr.output;
    res.diagnostics = parse_diagnostics(pr.output);
    res.timed_out = pr.timed_out;
    res.crashed = pr.signaled;
    if (config_.keep_logs) {
      std::ofstream log(file.string() + ".log");
      log << pr.output;
    } else {
      std::error_code ec;
      std::filesystem::remove(file, ec);
    }
    return res;
  }

 private:
  SubprocessCheckerConfig config_;
  std::atomic<unsigned long> counter_{0};
};

}  // namespace conjpipe::check
