#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "conjpipe/checker.hpp"
#include "conjpipe/checker_backends.hpp"
#include "conjpipe/genpipe.hpp"

using namespace conjpipe;
using check::ProofSlot;
using check::Severity;

namespace {

gen::Candidate make_candidate(const std::string& statement,
                              const lean::ContextBlock& ctx = {}) {
  gen::Candidate c;
  c.statement = statement;
  c.seed_id = "test";
  c.iteration = 1;
  c.assembled_source = gen::augment(statement, ctx);
  return c;
}

}  // namespace

TEST_CASE("parse_diagnostics: canonical record") {
  const auto ds = check::parse_diagnostics("f.lean:3:0: warning: declaration uses 'sorry'");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].severity == Severity::Warning);
  CHECK(ds[0].message == "declaration uses 'sorry'");
  CHECK(ds[0].line == 3);
  CHECK(ds[0].column == 0);
}

TEST_CASE("parse_diagnostics: empty output") {
  CHECK(check::parse_diagnostics("").empty());
  CHECK(check::parse_diagnostics("\n\n").empty());
}

TEST_CASE("parse_diagnostics: continuation lines fold into the previous message") {
  const auto ds = check::parse_diagnostics(
      "f.lean:1:2: error: unknown identifier\n"
      "  'foo'\n"
      "f.lean:9:4: info: Try this: exact le_refl n\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].severity == Severity::Error);
  CHECK(ds[0].message == "unknown identifier\n  'foo'");
  CHECK(ds[1].severity == Severity::Info);
  CHECK(ds[1].line == 9);
}

TEST_CASE("parse_diagnostics: records without a location") {
  const auto ds = check::parse_diagnostics("error: unknown package 'Foo'\n");
  REQUIRE(ds.size() == 1);
  CHECK_FALSE(ds[0].line.has_value());
  CHECK(ds[0].message == "unknown package 'Foo'");
}

TEST_CASE("parse_diagnostics: leading noise with no record is dropped") {
  const auto ds = check::parse_diagnostics("Building...\nprogress 50%\nf.lean:1:0: error: x\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].message == "x");
}

TEST_CASE("parse_diagnostics: first severity marker wins") {
  const auto ds =
      check::parse_diagnostics("f.lean:2:1: warning: message mentions ' error: ' later\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].severity == Severity::Warning);
  CHECK(ds[0].line == 2);
}

TEST_CASE("check_syntax: single sorry warning is Valid") {
  auto backend = check::ScriptedChecker::permissive();
  const auto c = make_candidate("theorem t : 1 = 1 := by");
  const auto stage = check::check_syntax(c, backend);
  CHECK(stage.passed);
}

TEST_CASE("check_syntax: an error makes it Invalid, diagnostics attached") {
  check::ScriptedChecker backend;
  backend.rules.push_back(
      {"undefined_thing", ProofSlot::Sorry,
       {{{Severity::Error, "unknown identifier 'undefined_thing'", 5, 2},
         {Severity::Warning, "declaration uses 'sorry'", 5, 0}},
        false,
        false,
        ""}});
  const auto c = make_candidate("theorem t : undefined_thing = 1 := by");
  const auto stage = check::check_syntax(c, backend);
  CHECK_FALSE(stage.passed);
  REQUIRE(stage.diagnostics.size() == 2);
}

TEST_CASE("check_syntax: unused-variable warnings are whitelisted, others are not") {
  check::ScriptedChecker backend;
  backend.default_sorry.diagnostics = {
      {Severity::Warning, "unused variable `X`", 2, 0},
      {Severity::Warning, "declaration uses 'sorry'", 4, 0},
      {Severity::Warning, "unused variable `Y`", 2, 4},
  };
  const auto c = make_candidate("theorem t : 1 = 1 := by");
  CHECK(check::check_syntax(c, backend).passed);

  backend.default_sorry.diagnostics.push_back({Severity::Warning, "deprecated: old", 1, 0});
  CHECK_FALSE(check::check_syntax(c, backend).passed);
}

TEST_CASE("check_syntax: two sorry warnings are Invalid") {
  check::ScriptedChecker backend;
  backend.default_sorry.diagnostics = {
      {Severity::Warning, "declaration uses 'sorry'", 4, 0},
      {Severity::Warning, "declaration uses 'sorry'", 9, 0},
  };
  CHECK_FALSE(check::check_syntax(make_candidate("theorem t : 1 = 1 := by"), backend).passed);
}

TEST_CASE("check_syntax: timeout and crash are Invalid with a synthetic diagnostic") {
  check::ScriptedChecker backend;
  backend.default_sorry = {{}, true, false, ""};
  auto stage = check::check_syntax(make_candidate("theorem t : 1 = 1 := by"), backend);
  CHECK_FALSE(stage.passed);
  REQUIRE(stage.diagnostics.size() == 1);
  CHECK(stage.diagnostics[0].message.find("timed out") != std::string::npos);

  backend.default_sorry = {{}, false, true, ""};
  stage = check::check_syntax(make_candidate("theorem t : 1 = 1 := by"), backend);
  CHECK_FALSE(stage.passed);
  CHECK(stage.diagnostics[0].message.find("crashed") != std::string::npos);
}

TEST_CASE("check_novelty: exact? suggestion means Known, with witness") {
  check::ScriptedChecker backend;
  backend.default_exact = {{{Severity::Info, "Try this: exact le_refl n", 3, 0}}, false, false, ""};
  const auto stage =
      check::check_novelty(make_candidate("theorem t : n ≤ n := by"), {}, backend);
  CHECK(stage.passed);  // Known
  REQUIRE(stage.witness.has_value());
  CHECK(*stage.witness == "exact le_refl n");
}

TEST_CASE("check_novelty: failure or timeout means Novel") {
  auto backend = check::ScriptedChecker::permissive();
  CHECK_FALSE(check::check_novelty(make_candidate("theorem t : P := by"), {}, backend).passed);

  check::ScriptedChecker timeout_backend;
  timeout_backend.default_exact = {{}, true, false, ""};
  CHECK_FALSE(
      check::check_novelty(make_candidate("theorem t : P := by"), {}, timeout_backend).passed);
}

TEST_CASE("check_novelty: candidate identical to an accumulated statement is Known") {
  auto backend = check::ScriptedChecker::permissive();
  backend.detect_self_match = true;
  const std::string stmt = "theorem dup (n : Nat) : n = n := by";
  const auto stage = check::check_novelty(make_candidate(stmt), {stmt}, backend);
  CHECK(stage.passed);
  // Renamed copies still match: dedup keys ignore the theorem name.
  const auto renamed =
      check::check_novelty(make_candidate("theorem other (n : Nat) : n = n := by"), {stmt}, backend);
  CHECK(renamed.passed);
}

TEST_CASE("check_novelty: accumulated statements become sorry-proved preamble theorems") {
  struct Capture : check::CheckerBackend {
    std::string seen;
    std::string id() const override { return "capture"; }
    check::CheckResult run(const check::CheckRequest& req) override {
      seen = req.assembled_source;
      return {{{Severity::Error, "exact? could not close the goal", 1, 0}}, false, false, ""};
    }
  } backend;
  const std::string prior = "theorem earlier (n : Nat) : n + 0 = n := by";
  check::check_novelty(make_candidate("theorem t : 1 = 1 := by"), {prior}, backend);
  CHECK(backend.seen.find("theorem prior_0 (n : Nat) : n + 0 = n := by sorry") !=
        std::string::npos);
  // Preamble precedes the candidate, and the probe ends with exact?.
  CHECK(backend.seen.find("prior_0") < backend.seen.find("theorem t"));
  CHECK(backend.seen.find("theorem t : 1 = 1 := by exact?") != std::string::npos);
}

TEST_CASE("check_triviality: aesop success is Trivial with the literal witness") {
  auto backend = check::ScriptedChecker::all_trivial();
  const auto stage = check::check_triviality(make_candidate("theorem t : 1 = 1 := by"), backend);
  CHECK(stage.passed);
  REQUIRE(stage.witness.has_value());
  CHECK(*stage.witness == "aesop");
}

TEST_CASE("check_triviality: failure, sorry leak, and timeout are NonTrivial") {
  auto backend = check::ScriptedChecker::permissive();
  CHECK_FALSE(check::check_triviality(make_candidate("theorem t : P := by"), backend).passed);

  check::ScriptedChecker sorry_leak;
  sorry_leak.default_aesop = {{{Severity::Warning, "declaration uses 'sorry'", 1, 0}},
                              false,
                              false,
                              ""};
  CHECK_FALSE(check::check_triviality(make_candidate("theorem t : P := by"), sorry_leak).passed);

  check::ScriptedChecker timeout_backend;
  timeout_backend.default_aesop = {{}, true, false, ""};
  CHECK_FALSE(
      check::check_triviality(make_candidate("theorem t : P := by"), timeout_backend).passed);
}

TEST_CASE("evaluate: short-circuit on Invalid syntax") {
  check::ScriptedChecker backend;
  backend.default_sorry = {{{Severity::Error, "parse error", 1, 0}}, false, false, ""};
  const auto v = check::evaluate(make_candidate("theorem t : := by"), {}, backend);
  CHECK(v.syntax == check::SyntaxVerdict::Invalid);
  CHECK_FALSE(v.novelty.has_value());
  CHECK_FALSE(v.triviality.has_value());
}

TEST_CASE("evaluate: short-circuit on Known") {
  auto backend = check::ScriptedChecker::all_known();
  const auto v = check::evaluate(make_candidate("theorem t : 1 = 1 := by"), {}, backend);
  CHECK(v.syntax == check::SyntaxVerdict::Valid);
  REQUIRE(v.novelty.has_value());
  CHECK(*v.novelty == check::NoveltyVerdict::Known);
  CHECK_FALSE(v.triviality.has_value());
  CHECK(v.witness.has_value());
}

TEST_CASE("evaluate: full lattice on the permissive stub") {
  auto backend = check::ScriptedChecker::permissive();
  const auto c = make_candidate("theorem t : 1 = 1 := by");
  const auto v = check::evaluate(c, {}, backend);
  CHECK(v.valid());
  CHECK(v.novel());
  CHECK(v.non_trivial());
  // The harness records a verdict; it never rewrites the statement.
  CHECK(c.statement == "theorem t : 1 = 1 := by");
}

TEST_CASE("evaluate: deterministic under stub backends") {
  auto backend = check::ScriptedChecker::permissive();
  const auto c = make_candidate("theorem t : 1 = 1 := by");
  const auto v1 = check::evaluate(c, {}, backend);
  const auto v2 = check::evaluate(c, {}, backend);
  CHECK(v1 == v2);
}

TEST_CASE("evaluate: in-context self-detection property") {
  auto backend = check::ScriptedChecker::permissive();
  backend.detect_self_match = true;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    const std::string stmt =
        "theorem g" + std::to_string(i) + " : " + std::to_string(rng() % 1000) + " = " +
        std::to_string(rng() % 1000) + " := by";
    const auto c = make_candidate(stmt);
    const auto fresh = check::evaluate(c, {}, backend);
    CHECK(fresh.novel());
    const auto replayed = check::evaluate(c, {stmt}, backend);
    REQUIRE(replayed.novelty.has_value());
    CHECK(*replayed.novelty == check::NoveltyVerdict::Known);
  }
}

TEST_CASE("verdict lattice: populated stages always form a prefix") {
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 300; ++i) {
    check::ScriptedChecker backend;
    if (rng() % 3 == 0)
      backend.default_sorry = {{{Severity::Error, "boom", 1, 0}}, false, false, ""};
    if (rng() % 3 == 0)
      backend.default_exact = {{{Severity::Info, "Try this: exact h", 1, 0}}, false, false, ""};
    if (rng() % 2 == 0) backend.default_aesop = {{}, false, false, ""};
    const auto v = check::evaluate(make_candidate("theorem t : 1 = 1 := by"), {}, backend);
    if (v.triviality.has_value()) {
      CHECK(v.novelty.has_value());
      CHECK(*v.novelty == check::NoveltyVerdict::Novel);
    }
    if (v.novelty.has_value()) CHECK(v.syntax == check::SyntaxVerdict::Valid);
  }
}
