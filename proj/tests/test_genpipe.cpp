#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conjpipe/generator_backends.hpp"
#include "conjpipe/genpipe.hpp"
#include "conjpipe/lean_surface.hpp"

using namespace conjpipe;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lean::LeanFileStructure fixture_structure() {
  return lean::parse_file(read_file(std::string(CONJ_TESTDATA_DIR) + "/topology_sets.lean"));
}

bool statement_invariants_hold(const std::string& s) {
  if (!text::starts_with_word(s, "theorem")) return false;
  if (s.find("@[") != std::string::npos) return false;
  for (std::string_view mod : {"protected", "private", "noncomputable", "nonrec"})
    if (text::starts_with_word(s, mod)) return false;
  // Nothing after the final `:= by`.
  return s.size() >= 5 && s.substr(s.size() - 5) == ":= by";
}

}  // namespace

TEST_CASE("system prompt carries the volume directive only when asked") {
  CHECK(gen::system_prompt(true).find("as many as possible") != std::string::npos);
  CHECK(gen::system_prompt(false).find("as many as possible") == std::string::npos);
  CHECK(gen::system_prompt(false).find("Please generate new theorems in Lean 4 format") == 0);
  CHECK(gen::system_prompt(true).find("\\u2200") != std::string::npos);
}

TEST_CASE("build_prompt renders seed theorems and accumulated statements once") {
  const auto seed = fixture_structure();
  const auto bundle = gen::build_prompt(seed, {}, true);
  CHECK(bundle.system_prompt.find("as many as possible") != std::string::npos);
  CHECK(bundle.user_payload.find("semi_open_union") != std::string::npos);
  CHECK(bundle.user_payload.find("SemiOpen (A ∪ B)") != std::string::npos);

  gen::Candidate c1{"theorem extra_one : 1 = 1 := by", "", "s", 1, ""};
  gen::Candidate c2{"theorem extra_two : 2 = 2 := by", "", "s", 1, ""};
  const auto single = gen::build_prompt({"theorem base : 0 = 0 := by"}, //
                                        {c1.statement, c2.statement}, false);
  CHECK(single.system_prompt.find("as many as possible") == std::string::npos);
  // All three statements present, each once.
  for (const auto* needle : {"base", "extra_one", "extra_two"}) {
    const size_t first = single.user_payload.find(needle);
    REQUIRE(first != std::string::npos);
    CHECK(single.user_payload.find(needle, first + 1) == std::string::npos);
  }
}

TEST_CASE("build_prompt with empty seed yields an empty payload") {
  const auto bundle = gen::build_prompt(lean::LeanFileStructure{}, {}, true);
  CHECK(bundle.user_payload.empty());
  CHECK_FALSE(bundle.system_prompt.empty());
}

TEST_CASE("split_chunks: fenced blocks, plain text, emptiness") {
  const auto chunks =
      gen::split_chunks("intro\n```lean\ntheorem a : 1 = 1 := by\n```\nand\n```lean\nx\n```");
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].find("theorem a") != std::string::npos);
  CHECK(gen::split_chunks("no fences at all").size() == 1);
  CHECK(gen::split_chunks("").empty());
  CHECK(gen::split_chunks("   \n\t").empty());
}

TEST_CASE("mutation backend: fixture seed with directive emits several chunks") {
  gen::MutationBackend backend(0);
  const auto bundle = gen::build_prompt(fixture_structure(), {}, true);
  const auto raw = gen::generate(backend, bundle);
  CHECK(raw.backend_id == "mutation");
  CHECK(raw.chunks.size() >= 2);
}

TEST_CASE("mutation backend: empty payload produces zero chunks") {
  gen::MutationBackend backend(0);
  const auto raw = gen::generate(backend, gen::build_prompt(lean::LeanFileStructure{}, {}, true));
  CHECK(raw.chunks.empty());
}

TEST_CASE("mutation backend: directive contrast on a one-theorem seed") {
  const std::vector<std::string> seed = {"theorem t : 1 = 1 := by"};
  gen::MutationBackend backend(0);
  const auto many = gen::generate(backend, gen::build_prompt(seed, {}, true));
  const auto one = gen::generate(backend, gen::build_prompt(seed, {}, false));
  CHECK(many.chunks.size() > 1);
  CHECK(one.chunks.size() == 1);
}

TEST_CASE("mutation backend: fixed seed is deterministic across runs") {
  const auto bundle = gen::build_prompt(fixture_structure(), {}, true);
  gen::MutationBackend a(42), b(42), c(43);
  const auto ra = gen::generate(a, bundle);
  const auto rb = gen::generate(b, bundle);
  CHECK(ra == rb);
  const auto rc = gen::generate(c, bundle);
  CHECK(ra.chunks != rc.chunks);  // seed rotates the rule order
}

TEST_CASE("mutation backend: the rule table produces the expected variant shapes") {
  gen::MutationBackend backend(0, 32);
  const std::vector<std::string> seed = {
      "theorem u {A B : Set X} (hA : SemiOpen A) : SemiOpen (A ∪ interior B) := by"};
  const auto raw = gen::generate(backend, gen::build_prompt(seed, {}, true));
  const auto post = gen::postprocess(raw);
  std::string all;
  for (const auto& s : post.statements) all += s + "\n";

  CHECK(all.find("SemiOpen (A ∩ interior B)") != std::string::npos);  // ∪/∩ swap
  CHECK(all.find("closure B") != std::string::npos);                  // interior/closure dual
  CHECK(all.find("theorem u_gen {A B : Set X} : SemiOpen (A ∪ interior B)") !=
        std::string::npos);                                           // hypothesis dropped
  CHECK(all.find("A' B") != std::string::npos);                       // binder renamed
  CHECK(all.find("∧ True") != std::string::npos);                     // goal conjoined
  CHECK(all.find("{P : Prop}") != std::string::npos);                 // antecedent added
}

TEST_CASE("mutation backend: variants parse back as theorems") {
  gen::MutationBackend backend(1);
  const auto raw = gen::generate(backend, gen::build_prompt(fixture_structure(), {}, true));
  const auto post = gen::postprocess(raw);
  CHECK(post.rejected == 0);
  REQUIRE_FALSE(post.statements.empty());
  for (const auto& s : post.statements) {
    CAPTURE(s);
    CHECK(statement_invariants_hold(s));
    const auto parsed = lean::parse_file(s + " sorry\n");
    REQUIRE(parsed.declarations.size() == 1);
    CHECK_FALSE(parsed.declarations[0].delimiter_warning);
  }
}

TEST_CASE("http generator: unroutable endpoint raises BackendUnavailable") {
  http::ChatEndpoint ep;
  ep.url = "http://127.0.0.1:1/v1/chat/completions";
  ep.model = "none";
  ep.max_retries = 1;
  ep.backoff_ms = 1;
  ep.timeout_s = 2;
  gen::HttpGenerator backend(ep);
  gen::PromptBundle bundle{"system", "user", true};
  CHECK_THROWS_AS((void)backend.complete(bundle), gen::BackendUnavailable);
}

TEST_CASE("postprocess strips fences, attributes, modifiers, and proofs") {
  gen::RawGeneration raw;
  raw.chunks = {"```lean\n@[simp] protected theorem foo : 1 = 1 := by rfl\n```"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 1);
  CHECK(post.statements[0] == "theorem foo : 1 = 1 := by");
  CHECK(post.rejected == 0);
}

TEST_CASE("postprocess rejects non-theorem chunks and counts them") {
  gen::RawGeneration raw;
  raw.chunks = {"def bar := 3"};
  const auto post = gen::postprocess(raw);
  CHECK(post.statements.empty());
  CHECK(post.rejected == 1);
}

TEST_CASE("postprocess rewrites lemma to theorem") {
  gen::RawGeneration raw;
  raw.chunks = {"lemma aux (n : Nat) : n = n := by simp"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 1);
  CHECK(post.statements[0] == "theorem aux (n : Nat) : n = n := by");
}

TEST_CASE("postprocess decodes unicode escapes") {
  gen::RawGeneration raw;
  raw.chunks = {"theorem all : \\u2200 x : Nat, x = x := by rfl"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 1);
  CHECK(post.statements[0].find("∀") != std::string::npos);
  CHECK(post.statements[0].find("\\u2200") == std::string::npos);
}

TEST_CASE("postprocess truncates at the final top-level := by") {
  gen::RawGeneration raw;
  // The default argument carries an inner `:=`; the proof follows the last
  // top-level `:= by`.
  raw.chunks = {"theorem d (n : Nat := 2) : n = n := by\n  rfl\n  simp"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 1);
  CHECK(post.statements[0] == "theorem d (n : Nat := 2) : n = n := by");
}

TEST_CASE("postprocess appends := by when the generator omitted it") {
  gen::RawGeneration raw;
  raw.chunks = {"theorem bare : 1 = 1"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 1);
  CHECK(post.statements[0] == "theorem bare : 1 = 1 := by");
}

TEST_CASE("postprocess canonicalizes a line-broken or padded anchor") {
  gen::RawGeneration raw;
  raw.chunks = {"theorem t : 1 = 1 :=\n  by\n  rfl", "theorem u : 2 = 2 :=  by rfl"};
  const auto post = gen::postprocess(raw);
  REQUIRE(post.statements.size() == 2);
  CHECK(post.statements[0] == "theorem t : 1 = 1 := by");
  CHECK(post.statements[1] == "theorem u : 2 = 2 := by");
}

TEST_CASE("postprocess property: idempotent and invariant-preserving over random decorations") {
  std::mt19937_64 rng(20250808);
  const std::vector<std::string> bases = {
      "theorem a : 1 = 1",
      "theorem b (n : Nat) : n + 0 = n",
      "lemma c {A B : Set X} (h : A ⊆ B) : closure A ⊆ closure B",
      "theorem d : \\u2200 x : Nat, x \\u2264 x",
      "lemma e (f : Nat \\u2192 Nat) (h : f 0 = 0) : f 0 \\u2264 f 0",
  };
  const std::vector<std::string> attrs = {"@[simp]", "@[simp, norm_cast]", "@[mono]"};
  const std::vector<std::string> mods = {"protected", "private", "noncomputable", "nonrec"};
  const std::vector<std::string> proofs = {
      " rfl", "\n  simp_all [foo, bar]\n  <;> aesop", " exact h", "\n  sorry", ""};

  int produced = 0;
  for (int round = 0; round < 1000; ++round) {
    std::string s = bases[rng() % bases.size()];
    if (rng() % 2) s += " := by" + proofs[rng() % proofs.size()];
    for (int m = static_cast<int>(rng() % 3); m > 0; --m)
      s = mods[rng() % mods.size()] + " " + s;
    for (int a = static_cast<int>(rng() % 3); a > 0; --a)
      s = attrs[rng() % attrs.size()] + (rng() % 2 ? "\n" : " ") + s;
    if (rng() % 2) s = "```lean\n" + s + "\n```";
    if (rng() % 4 == 0) s = "Some chatter first.\n" + s;

    gen::RawGeneration raw;
    raw.chunks = gen::split_chunks(s);
    const auto once = gen::postprocess(raw);
    for (const auto& stmt : once.statements) {
      CAPTURE(s);
      CAPTURE(stmt);
      CHECK(statement_invariants_hold(stmt));
      ++produced;
    }
    gen::RawGeneration again;
    again.chunks = once.statements;
    const auto twice = gen::postprocess(again);
    CHECK(twice.statements == once.statements);
    CHECK(twice.rejected == 0);
  }
  CHECK(produced > 500);
}

TEST_CASE("augment: fixed import block leads every candidate") {
  const auto src = gen::augment("theorem t : 1 = 1 := by", lean::ContextBlock{});
  std::istringstream lines(src);
  std::string l1, l2;
  std::getline(lines, l1);
  std::getline(lines, l2);
  CHECK(l1 == "import Mathlib");
  CHECK(l2 == "import Aesop");
  CHECK(src.find("theorem t : 1 = 1 := by") != std::string::npos);
}

TEST_CASE("augment: replayed context precedes the statement") {
  const auto ctx = lean::extract_context(fixture_structure());
  const auto src = gen::augment("theorem t : 1 = 1 := by", ctx);
  const size_t open_pos = src.find("open Topology");
  const size_t var_pos = src.find("variable {X : Type*} [TopologicalSpace X]");
  const size_t stmt_pos = src.find("theorem t");
  REQUIRE(open_pos != std::string::npos);
  REQUIRE(var_pos != std::string::npos);
  REQUIRE(stmt_pos != std::string::npos);
  CHECK(open_pos < stmt_pos);
  CHECK(var_pos < stmt_pos);
  // Context imports are subsumed by the fixed block: no duplicate import lines.
  CHECK(src.find("import Mathlib\nimport Aesop\n") == 0);
  CHECK(src.find("import Mathlib", 1) == std::string::npos);
}

TEST_CASE("augment is injective on statements for a fixed context") {
  const lean::ContextBlock ctx;
  CHECK(gen::augment("theorem a : 1 = 1 := by", ctx) != gen::augment("theorem b : 1 = 1 := by", ctx));
  // Assembled source parses back to the same statement.
  const auto parsed = lean::parse_file(gen::augment("theorem a : 1 = 1 := by", ctx));
  REQUIRE(parsed.declarations.size() == 1);
  CHECK(lean::render_statement(parsed.declarations[0]) == "theorem a : 1 = 1 := by");
}
