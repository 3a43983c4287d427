#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conjpipe/checker.hpp"
#include "conjpipe/genpipe.hpp"
#include "conjpipe/lean_surface.hpp"
#include "conjpipe/parallel.hpp"
#include "conjpipe/reportkit.hpp"
#include "conjpipe/serde.hpp"

// Drives the generate → post-process → evaluate → collect cycle per seed file
// until no new novel conjectures appear or the iteration cap is reached.
// State persists after every round, so an interrupted run resumes from its
// last snapshot and ends in the same final state as an uninterrupted one.
namespace conjpipe::loop {

namespace fs = std::filesystem;

enum class TerminationReason { Fixpoint, MaxIterations };

inline std::string_view termination_name(TerminationReason r) {
  return r == TerminationReason::Fixpoint ? "fixpoint" : "max_iterations";
}

struct IterationState {
  std::string seed_id;
  int iteration = 0;  // completed rounds
  lean::ContextBlock context;
  std::vector<std::string> seed_statements;  // rendered from the original seed
  std::vector<gen::Candidate> accumulated;   // valid ∧ novel, dedup by normalized statement
  std::vector<report::Record> records;       // every candidate with its verdict
  std::optional<TerminationReason> terminated;

  // Derived; rebuilt on load.
  std::unordered_set<std::string> seen;

  std::vector<std::string> accumulated_statements() const {
    std::vector<std::string> out;
    out.reserve(accumulated.size());
    for (const auto& c : accumulated) out.push_back(c.statement);
    return out;
  }
};

struct RunConfig {
  int max_iterations = 15;
  bool directive_many = true;
  int workers = 1;
  check::Timeouts timeouts;
  std::uint64_t seed = 0;
  fs::path run_dir;
  bool keep_logs = false;
};

// kind + detail, wired to the machine-event log by the CLI.
using EventFn = std::function<void(const std::string&, const nlohmann::json&)>;

inline IterationState init_state(std::string seed_id, const lean::LeanFileStructure& seed) {
  IterationState state;
  state.seed_id = std::move(seed_id);
  state.context = lean::extract_context(seed);
  for (const auto& d : lean::extract_theorems(seed))
    state.seed_statements.push_back(lean::render_statement(d));
  return state;
}

inline nlohmann::json state_to_json(const IterationState& state) {
  nlohmann::json j;
  j["seed_id"] = state.seed_id;
  j["iteration"] = state.iteration;
  j["context"] = {{"imports", state.context.imports},
                  {"opens", state.context.opens},
                  {"variables", state.context.variables}};
  j["seed_statements"] = state.seed_statements;
  nlohmann::json acc = nlohmann::json::array();
  for (const auto& c : state.accumulated) acc.push_back(serde::to_json(c));
  j["accumulated"] = std::move(acc);
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& [c, v] : state.records)
    recs.push_back({{"candidate", serde::to_json(c)}, {"verdict", serde::to_json(v)}});
  j["records"] = std::move(recs);
  j["terminated_reason"] =
      state.terminated ? nlohmann::json(std::string(termination_name(*state.terminated)))
                       : nlohmann::json(nullptr);
  return j;
}

inline IterationState state_from_json(const nlohmann::json& j) {
  IterationState state;
  state.seed_id = j.at("seed_id").get<std::string>();
  state.iteration = j.at("iteration").get<int>();
  state.context.imports = j.at("context").at("imports").get<std::vector<std::string>>();
  state.context.opens = j.at("context").at("opens").get<std::vector<std::string>>();
  state.context.variables = j.at("context").at("variables").get<std::vector<std::string>>();
  state.seed_statements = j.at("seed_statements").get<std::vector<std::string>>();
  for (const auto& c : j.at("accumulated"))
    state.accumulated.push_back(serde::candidate_from_json(c));
  for (const auto& r : j.at("records"))
    state.records.emplace_back(serde::candidate_from_json(r.at("candidate")),
                               serde::verdict_from_json(r.at("verdict")));
  if (!j.at("terminated_reason").is_null())
    state.terminated = j.at("terminated_reason").get<std::string>() == "fixpoint"
                           ? TerminationReason::Fixpoint
                           : TerminationReason::MaxIterations;
  for (const auto& c : state.accumulated)
    state.seen.insert(lean::normalize_statement(c.statement));
  return state;
}

inline void save_state(const IterationState& state, const fs::path& file) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << state_to_json(state).dump(2) << "\n";
  }
  fs::rename(tmp, file);
}

inline IterationState load_state(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  nlohmann::json j;
  in >> j;
  return state_from_json(j);
}

struct IterationOutcome {
  std::vector<gen::Candidate> newly_novel;
  int candidates = 0;
  int rejected = 0;
  std::vector<std::string> backend_events;
};

// One full round: prompt from seed content plus accumulation, generate,
// post-process, augment, evaluate against the accumulation, then collect.
// Total backend failure yields an empty round, not a crash.
inline IterationOutcome run_iteration(IterationState& state, gen::GeneratorBackend& generator,
                                      check::CheckerBackend& checker, const RunConfig& config) {
  if (state.terminated)
    throw std::logic_error("run_iteration called on a terminated state");

  IterationOutcome out;
  const int round = state.iteration + 1;
  const std::vector<std::string> accumulated = state.accumulated_statements();
  const gen::PromptBundle prompt =
      gen::build_prompt(state.seed_statements, accumulated, config.directive_many);

  gen::RawGeneration raw;
  try {
    raw = gen::generate(generator, prompt);
  } catch (const gen::BackendError& e) {
    out.backend_events.push_back(e.what());
  }

  std::vector<gen::Candidate> candidates;
  for (const auto& chunk : raw.chunks) {
    if (auto stmt = gen::postprocess_chunk(chunk)) {
      gen::Candidate c;
      c.statement = std::move(*stmt);
      c.raw_text = chunk;
      c.seed_id = state.seed_id;
      c.iteration = round;
      c.assembled_source = gen::augment(c.statement, state.context);
      candidates.push_back(std::move(c));
    } else {
      ++out.rejected;
    }
  }
  out.candidates = static_cast<int>(candidates.size());

  std::vector<check::Verdict> verdicts(candidates.size());
  par::parallel_for(candidates.size(), config.workers, [&](size_t i) {
    try {
      verdicts[i] = check::evaluate(candidates[i], accumulated, checker, config.timeouts);
    } catch (const std::exception& e) {
      check::Verdict v;
      v.syntax = check::SyntaxVerdict::Invalid;
      v.diagnostics.push_back(
          {check::Severity::Error, std::string("checker failed: ") + e.what(), {}, {}});
      verdicts[i] = std::move(v);
    }
  });

  for (size_t i = 0; i < candidates.size(); ++i) {
    state.records.emplace_back(candidates[i], verdicts[i]);
    if (verdicts[i].valid() && verdicts[i].novel()) {
      const std::string key = lean::normalize_statement(candidates[i].statement);
      if (state.seen.insert(key).second) {
        state.accumulated.push_back(candidates[i]);
        out.newly_novel.push_back(candidates[i]);
      }
    }
  }
  state.iteration = round;
  return out;
}

// The aggregated next-round seed file: context plus every accumulated
// conjecture as a sorry-proved theorem. Parses back through the surface
// scanner.
inline std::string build_next_seed(const IterationState& state) {
  if (state.accumulated.empty())
    throw std::invalid_argument("build_next_seed requires accumulated conjectures");
  std::string out = "import Mathlib\nimport Aesop\n\n";
  for (const auto& o : state.context.opens) out += "open " + o + "\n";
  for (const auto& v : state.context.variables) out += "variable " + v + "\n";
  if (!state.context.opens.empty() || !state.context.variables.empty()) out += "\n";
  for (const auto& c : state.accumulated) {
    out += c.statement;
    out += " sorry\n\n";
  }
  return out;
}

struct PipelineResult {
  IterationState state;
  report::RunReport report;
};

namespace detail {

inline void write_round_files(const IterationState& state, const RunConfig& config,
                              size_t record_begin) {
  const fs::path dir = config.run_dir / ("iter-" + std::to_string(state.iteration));
  fs::create_directories(dir);
  std::ofstream cand(dir / "candidates.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream verd(dir / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
  for (size_t i = record_begin; i < state.records.size(); ++i) {
    cand << serde::to_json(state.records[i].first).dump() << "\n";
    verd << serde::to_json(state.records[i].second).dump() << "\n";
  }
  if (!state.accumulated.empty()) {
    std::ofstream next(dir / "next_seed.lean", std::ios::binary | std::ios::trunc);
    next << build_next_seed(state);
  }
}

}  // namespace detail

// Builds the report for a finished (or in-flight) state, stamping iteration
// count and termination reason onto the seed's row.
inline report::RunReport state_report(const IterationState& state) {
  report::RunReport rep = report::summarize(state.records);
  auto& row = rep.per_seed[state.seed_id];  // present even when records are empty
  row.iterations = state.iteration;
  if (state.terminated) row.terminated_reason = std::string(termination_name(*state.terminated));
  rep.aggregate.iterations = state.iteration;
  rep.aggregate.terminated_reason = row.terminated_reason;
  return rep;
}

// Runs (or resumes) the loop for one seed file. A state snapshot in the run
// directory always wins over the seed path: resuming never re-reads the seed.
inline PipelineResult run_pipeline(const fs::path& seed_path, gen::GeneratorBackend& generator,
                                   check::CheckerBackend& checker, const RunConfig& config,
                                   const EventFn& events = {}) {
  if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  fs::create_directories(config.run_dir);
  const fs::path snapshot = config.run_dir / "state.snapshot";

  IterationState state;
  if (fs::exists(snapshot)) {
    state = load_state(snapshot);
    if (events) events("resumed", {{"seed_id", state.seed_id}, {"iteration", state.iteration}});
  } else {
    std::ifstream in(seed_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read seed file " + seed_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    state = init_state(seed_path.stem().string(), lean::parse_file(ss.str()));
    if (events)
      events("seed_loaded", {{"seed_id", state.seed_id},
                             {"theorems", state.seed_statements.size()}});
  }

  while (!state.terminated) {
    const size_t record_begin = state.records.size();
    const IterationOutcome outcome = run_iteration(state, generator, checker, config);
    detail::write_round_files(state, config, record_begin);
    for (const auto& e : outcome.backend_events)
      if (events) events("backend_error", {{"what", e}});
    if (events)
      events("iteration", {{"round", state.iteration},
                           {"candidates", outcome.candidates},
                           {"rejected", outcome.rejected},
                           {"newly_novel", outcome.newly_novel.size()}});
    if (outcome.newly_novel.empty()) {
      state.terminated = TerminationReason::Fixpoint;
    } else if (state.iteration >= config.max_iterations) {
      state.terminated = TerminationReason::MaxIterations;
    }
    save_state(state, snapshot);
  }
  if (events)
    events("terminated", {{"reason", std::string(termination_name(*state.terminated))},
                          {"iterations", state.iteration}});

  PipelineResult result{std::move(state), {}};
  result.report = state_report(result.state);
  {
    std::ofstream rj(config.run_dir / "report.json", std::ios::binary | std::ios::trunc);
    rj << report::to_json(result.report).dump(2) << "\n";
    std::ofstream rt(config.run_dir / "report.txt", std::ios::binary | std::ios::trunc);
    rt << report::render_table(result.report);
  }
  return result;
}

}  // namespace conjpipe::loop
