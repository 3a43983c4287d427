#include <unistd.h>
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "conjpipe/checker_backends.hpp"
#include "conjpipe/generator_backends.hpp"
#include "conjpipe/looper.hpp"

using namespace conjpipe;
namespace fs = std::filesystem;

namespace {

std::string fixture_path() { return std::string(CONJ_TESTDATA_DIR) + "/topology_sets.lean"; }

lean::LeanFileStructure fixture_structure() {
  std::ifstream in(fixture_path(), std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return lean::parse_file(ss.str());
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("conjpipe-test-" + tag + "-" + std::to_string(::getpid()) +
                                   "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Emits all previously emitted statements plus one fresh one each call:
// productive every round, but mostly repeating itself.
class RepetitiveBackend : public gen::GeneratorBackend {
 public:
  std::string id() const override { return "repetitive"; }
  bool deterministic() const override { return true; }
  std::string complete(const gen::PromptBundle&) override {
    ++calls_;
    std::string out;
    for (int i = 1; i <= calls_; ++i) {
      out += "```lean\ntheorem rep_" + std::to_string(i) + " : " + std::to_string(i) +
             " = " + std::to_string(i) + " := by\n```\n\n";
      // The same statement again under a different name: a normalized dup.
      out += "```lean\ntheorem rep_again_" + std::to_string(i) + " : " + std::to_string(i) +
             " = " + std::to_string(i) + " := by\n```\n\n";
    }
    return out;
  }

 private:
  int calls_ = 0;
};

}  // namespace

TEST_CASE("run_iteration: productive round collects novel candidates") {
  auto state = loop::init_state("topo", fixture_structure());
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  loop::RunConfig cfg;

  const auto outcome = loop::run_iteration(state, generator, checker, cfg);
  CHECK(state.iteration == 1);
  CHECK_FALSE(outcome.newly_novel.empty());
  CHECK(outcome.candidates > 0);
  CHECK(state.records.size() == static_cast<size_t>(outcome.candidates));
  for (const auto& c : state.accumulated) {
    CHECK(c.iteration == 1);
    CHECK(c.seed_id == "topo");
    // Provenance: the raw chunk that produced the statement travels along.
    CHECK(c.raw_text.find("```") != std::string::npos);
    CHECK(gen::postprocess_chunk(c.raw_text) == c.statement);
    CHECK(c.assembled_source.find(c.statement) != std::string::npos);
  }
}

TEST_CASE("run_iteration: all-known checker collects nothing") {
  auto state = loop::init_state("topo", fixture_structure());
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::all_known();
  loop::RunConfig cfg;

  const auto outcome = loop::run_iteration(state, generator, checker, cfg);
  CHECK(outcome.newly_novel.empty());
  CHECK(state.accumulated.empty());
  CHECK(outcome.candidates > 0);  // generated, evaluated, all Known
}

TEST_CASE("run_iteration: identical fixed-seed backends give identical states") {
  auto run_once = [] {
    auto state = loop::init_state("topo", fixture_structure());
    gen::MutationBackend generator(7);
    auto checker = check::ScriptedChecker::permissive();
    loop::RunConfig cfg;
    loop::run_iteration(state, generator, checker, cfg);
    loop::run_iteration(state, generator, checker, cfg);
    return loop::state_to_json(state).dump();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("run_iteration: worker count does not change results") {
  auto run_with = [](int workers) {
    auto state = loop::init_state("topo", fixture_structure());
    gen::MutationBackend generator(3);
    auto checker = check::ScriptedChecker::permissive();
    loop::RunConfig cfg;
    cfg.workers = workers;
    loop::run_iteration(state, generator, checker, cfg);
    return loop::state_to_json(state).dump();
  };
  CHECK(run_with(1) == run_with(4));
}

TEST_CASE("run_iteration: backend outage yields an empty round, recorded") {
  struct DownBackend : gen::GeneratorBackend {
    std::string id() const override { return "down"; }
    std::string complete(const gen::PromptBundle&) override {
      throw gen::BackendUnavailable("connection refused");
    }
  } generator;
  auto state = loop::init_state("topo", fixture_structure());
  auto checker = check::ScriptedChecker::permissive();
  const auto outcome = loop::run_iteration(state, generator, checker, loop::RunConfig{});
  CHECK(outcome.candidates == 0);
  CHECK(outcome.newly_novel.empty());
  REQUIRE(outcome.backend_events.size() == 1);
  CHECK(state.iteration == 1);
}

TEST_CASE("run_iteration refuses a terminated state") {
  auto state = loop::init_state("topo", fixture_structure());
  state.terminated = loop::TerminationReason::Fixpoint;
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  CHECK_THROWS_AS(loop::run_iteration(state, generator, checker, loop::RunConfig{}),
                  std::logic_error);
}

TEST_CASE("build_next_seed renders a parseable aggregate file") {
  loop::IterationState state;
  state.seed_id = "s";
  state.context.opens = {"Topology"};
  state.context.variables = {"{X : Type*} [TopologicalSpace X]"};
  state.accumulated.push_back(
      {"theorem a (A : Set X) : A = A := by", "", "s", 1, ""});
  state.accumulated.push_back(
      {"theorem b (B : Set X) : B ∪ B = B := by", "", "s", 1, ""});

  const std::string next = loop::build_next_seed(state);
  const auto parsed = lean::parse_file(next);
  const auto theorems = lean::extract_theorems(parsed);
  REQUIRE(theorems.size() == 2);

  // Round-trip: the re-extracted statement set matches the accumulation.
  std::vector<std::string> reparsed;
  for (const auto& t : theorems)
    reparsed.push_back(lean::normalize_statement(lean::render_statement(t)));
  std::vector<std::string> expected;
  for (const auto& c : state.accumulated)
    expected.push_back(lean::normalize_statement(c.statement));
  CHECK(reparsed == expected);

  // Context replays too.
  CHECK(parsed.opens == std::vector<std::string>{"Topology"});
  CHECK(parsed.variables == std::vector<std::string>{"{X : Type*} [TopologicalSpace X]"});
}

TEST_CASE("build_next_seed requires a non-empty accumulation") {
  loop::IterationState state;
  CHECK_THROWS_AS((void)loop::build_next_seed(state), std::invalid_argument);
}

TEST_CASE("build_next_seed / extract round-trip on a live run") {
  auto state = loop::init_state("topo", fixture_structure());
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  loop::RunConfig cfg;
  loop::run_iteration(state, generator, checker, cfg);
  REQUIRE_FALSE(state.accumulated.empty());

  const auto theorems = lean::extract_theorems(lean::parse_file(loop::build_next_seed(state)));
  REQUIRE(theorems.size() == state.accumulated.size());
  for (size_t i = 0; i < theorems.size(); ++i) {
    CHECK(lean::normalize_statement(lean::render_statement(theorems[i])) ==
          lean::normalize_statement(state.accumulated[i].statement));
  }
}

TEST_CASE("state snapshot round-trips through JSON") {
  auto state = loop::init_state("topo", fixture_structure());
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  loop::run_iteration(state, generator, checker, loop::RunConfig{});
  state.terminated = loop::TerminationReason::MaxIterations;

  const auto j = loop::state_to_json(state);
  const auto restored = loop::state_from_json(j);
  CHECK(loop::state_to_json(restored) == j);
  CHECK(restored.seen == state.seen);
}

TEST_CASE("run_pipeline: all-known stub terminates with fixpoint at iteration 1") {
  const auto dir = fresh_dir("fixpoint");
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::all_known();
  loop::RunConfig cfg;
  cfg.run_dir = dir;
  const auto result = loop::run_pipeline(fixture_path(), generator, checker, cfg);
  CHECK(result.state.iteration == 1);
  REQUIRE(result.state.terminated.has_value());
  CHECK(*result.state.terminated == loop::TerminationReason::Fixpoint);
  CHECK(fs::exists(dir / "state.snapshot"));
  CHECK(fs::exists(dir / "iter-1" / "candidates.jsonl"));
  CHECK(fs::exists(dir / "iter-1" / "verdicts.jsonl"));
  CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("run_pipeline: productive backend stops at exactly max_iterations") {
  const auto dir = fresh_dir("maxiter");
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  loop::RunConfig cfg;
  cfg.run_dir = dir;
  cfg.max_iterations = 15;
  const auto result = loop::run_pipeline(fixture_path(), generator, checker, cfg);
  CHECK(result.state.iteration == 15);
  REQUIRE(result.state.terminated.has_value());
  CHECK(*result.state.terminated == loop::TerminationReason::MaxIterations);
  CHECK(fs::exists(dir / "iter-15" / "next_seed.lean"));

  // Record conservation: every candidate of every round has a verdict.
  long long total = 0;
  for (const auto& [seed, c] : result.report.per_seed) total += c.total;
  CHECK(total == static_cast<long long>(result.state.records.size()));
}

TEST_CASE("run_pipeline: dedup holds over a 10-iteration repetitive run") {
  const auto dir = fresh_dir("dedup");
  RepetitiveBackend generator;
  auto checker = check::ScriptedChecker::permissive();
  loop::RunConfig cfg;
  cfg.run_dir = dir;
  cfg.max_iterations = 10;
  const auto result = loop::run_pipeline(fixture_path(), generator, checker, cfg);
  CHECK(result.state.iteration == 10);

  std::unordered_set<std::string> keys;
  for (const auto& c : result.state.accumulated)
    CHECK(keys.insert(lean::normalize_statement(c.statement)).second);
  // The backend repeated itself heavily; the accumulation stayed strictly novel.
  CHECK(result.state.records.size() > result.state.accumulated.size());
}

TEST_CASE("run_pipeline: unreadable seed is fatal") {
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::permissive();
  loop::RunConfig cfg;
  cfg.run_dir = fresh_dir("missing");
  CHECK_THROWS_AS(
      loop::run_pipeline("/nonexistent/seed.lean", generator, checker, cfg),
      std::runtime_error);
}

TEST_CASE("crash-resume: resumed run ends byte-identical to an uninterrupted one") {
  loop::RunConfig cfg;
  cfg.max_iterations = 5;
  cfg.seed = 11;

  // Uninterrupted reference run.
  const auto dir_a = fresh_dir("resume-a");
  {
    gen::MutationBackend generator(cfg.seed);
    auto checker = check::ScriptedChecker::permissive();
    auto cfg_a = cfg;
    cfg_a.run_dir = dir_a;
    loop::run_pipeline(fixture_path(), generator, checker, cfg_a);
  }

  // Same run killed after round 2: only the snapshot survives.
  const auto dir_b = fresh_dir("resume-b");
  {
    gen::MutationBackend generator(cfg.seed);
    auto checker = check::ScriptedChecker::permissive();
    auto state = loop::init_state("topology_sets", fixture_structure());
    auto cfg_b = cfg;
    cfg_b.run_dir = dir_b;
    loop::run_iteration(state, generator, checker, cfg_b);
    loop::run_iteration(state, generator, checker, cfg_b);
    loop::save_state(state, dir_b / "state.snapshot");
  }
  {
    gen::MutationBackend generator(cfg.seed);
    auto checker = check::ScriptedChecker::permissive();
    auto cfg_b = cfg;
    cfg_b.run_dir = dir_b;
    loop::run_pipeline(fixture_path(), generator, checker, cfg_b);
  }

  CHECK(slurp(dir_a / "state.snapshot") == slurp(dir_b / "state.snapshot"));
}

TEST_CASE("run_pipeline: resuming a finished run is a no-op") {
  const auto dir = fresh_dir("idempotent");
  gen::MutationBackend generator(0);
  auto checker = check::ScriptedChecker::all_known();
  loop::RunConfig cfg;
  cfg.run_dir = dir;
  const auto first = loop::run_pipeline(fixture_path(), generator, checker, cfg);
  const auto before = slurp(dir / "state.snapshot");
  const auto second = loop::run_pipeline(fixture_path(), generator, checker, cfg);
  CHECK(slurp(dir / "state.snapshot") == before);
  CHECK(second.state.iteration == first.state.iteration);
}

TEST_CASE("directive contrast: fewer candidates without the volume directive") {
  const std::string seed_file = (fresh_dir("contrast") / "one.lean").string();
  {
    std::ofstream out(seed_file);
    out << "theorem lone : 1 = 1 := by rfl\n";
  }
  auto run_with = [&](bool directive) {
    gen::MutationBackend generator(0);
    auto checker = check::ScriptedChecker::permissive();
    loop::RunConfig cfg;
    cfg.run_dir = fresh_dir(directive ? "contrast-many" : "contrast-one");
    cfg.max_iterations = 5;
    cfg.directive_many = directive;
    const auto result = loop::run_pipeline(seed_file, generator, checker, cfg);
    return result.report.aggregate.total;
  };
  const auto without = run_with(false);
  const auto with = run_with(true);
  CHECK(without < with);
}
