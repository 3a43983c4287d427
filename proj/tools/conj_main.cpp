// conj: generate, evaluate, iterate on, and prove Lean 4 theorem conjectures
// from seed files.
//
// Subcommands: parse, run, prove, stats, export. Human-readable logs go to
// stderr; machine events land in events.jsonl under the output directory.
// Exit codes: 0 success, 2 usage/input error, 3 corrupt records, 4 backend
// unavailable.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conjpipe/checker_backends.hpp"
#include "conjpipe/config.hpp"
#include "conjpipe/generator_backends.hpp"
#include "conjpipe/genpipe.hpp"
#include "conjpipe/lean_surface.hpp"
#include "conjpipe/looper.hpp"
#include "conjpipe/prover.hpp"
#include "conjpipe/reportkit.hpp"
#include "conjpipe/serde.hpp"

namespace fs = std::filesystem;
using namespace conjpipe;
using nlohmann::json;

namespace {

class EventLog {
 public:
  explicit EventLog(const fs::path& file) : out_(file, std::ios::app) {}
  void emit(const std::string& kind, const json& detail) {
    if (!out_) return;
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    out_ << json{{"ts_ms", now}, {"kind", kind}, {"detail", detail}}.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::unique_ptr<gen::GeneratorBackend> make_generator(const cfg::Config& config) {
  if (config.generator_type == "http")
    return std::make_unique<gen::HttpGenerator>(config.generator_endpoint);
  return std::make_unique<gen::MutationBackend>(config.run.seed);
}

std::unique_ptr<check::CheckerBackend> make_checker(const cfg::Config& config) {
  if (config.checker_type == "subprocess") {
    auto sub = config.checker_subprocess;
    sub.keep_logs = config.run.keep_logs;
    if (sub.scratch_dir.empty()) sub.scratch_dir = config.output_dir / "scratch";
    return std::make_unique<check::SubprocessChecker>(sub);
  }
  return std::make_unique<check::ScriptedChecker>(check::ScriptedChecker::permissive());
}

std::unique_ptr<prove::ProverBackend> make_prover(const cfg::Config& config) {
  if (config.prover_type == "http") return std::make_unique<prove::HttpProver>(config.prover_http);
  auto stub = std::make_unique<prove::StubProver>();
  stub->proofs = config.prover_stub_proofs;
  return stub;
}

std::string slurp_or_throw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Seed arguments may be files or directories; directories contribute their
// .lean files in lexicographic order.
std::vector<fs::path> resolve_seeds(const std::vector<std::string>& args) {
  std::vector<fs::path> seeds;
  for (const auto& arg : args) {
    const fs::path p(arg);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".lean")
          found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      seeds.insert(seeds.end(), found.begin(), found.end());
    } else {
      seeds.push_back(p);
    }
  }
  return seeds;
}

void log_resolution(const cfg::Config& config) {
  std::ostringstream sources;
  sources << "defaults";
  for (const auto& s : config.resolution_log) sources << " < " << s;
  std::cerr << "config: " << sources.str() << "\n";
  std::cerr << "config: effective " << cfg::to_json(config).dump() << "\n";
}

int cmd_parse(const std::string& path) {
  if (!fs::exists(path) || fs::is_directory(path)) {
    std::cerr << "error: no such file: " << path << "\n";
    return cfg::kExitUsage;
  }
  const auto parsed = lean::parse_file(slurp_or_throw(path));
  int theorems = 0, defs = 0, others = 0, warned = 0;
  for (const auto& d : parsed.declarations) {
    if (d.kind == lean::DeclKind::Theorem || d.kind == lean::DeclKind::Lemma) ++theorems;
    else if (d.kind == lean::DeclKind::Def || d.kind == lean::DeclKind::Abbrev) ++defs;
    else ++others;
    if (d.delimiter_warning) ++warned;
  }
  std::cout << "imports: " << parsed.imports.size() << "\n"
            << "opens: " << parsed.opens.size() << "\n"
            << "variables: " << parsed.variables.size() << "\n"
            << "theorems: " << theorems << "\n"
            << "defs: " << defs << "\n"
            << "other declarations: " << others << "\n";
  if (warned > 0)
    std::cout << "warning: " << warned << " declaration(s) with unbalanced delimiters\n";
  if (parsed.source_size > 0 && parsed.declarations.empty() && parsed.imports.empty() &&
      parsed.opens.empty() && parsed.variables.empty())
    std::cout << "warning: no recognizable Lean structure\n";
  return cfg::kExitOk;
}

int cmd_run(const cfg::Config& config, const std::vector<std::string>& seed_args) {
  const auto seeds = resolve_seeds(seed_args);
  if (seeds.empty()) {
    std::cerr << "error: no seed files\n";
    return cfg::kExitUsage;
  }
  fs::create_directories(config.output_dir);
  EventLog events(config.output_dir / "events.jsonl");
  events.emit("config_resolved", cfg::to_json(config));

  auto generator = make_generator(config);
  auto checker = make_checker(config);

  std::vector<report::Record> all_records;
  std::map<std::string, report::SeedCounters> rows;
  int failures = 0;
  bool backend_failure = false;

  for (const auto& seed : seeds) {
    loop::RunConfig run_cfg = config.run;
    run_cfg.run_dir = config.output_dir / seed.stem();
    std::cerr << "run: seed " << seed.string() << " -> " << run_cfg.run_dir.string() << "\n";
    try {
      const auto result = loop::run_pipeline(
          seed, *generator, *checker, run_cfg,
          [&](const std::string& kind, const json& detail) { events.emit(kind, detail); });
      all_records.insert(all_records.end(), result.state.records.begin(),
                         result.state.records.end());
      for (const auto& [id, counters] : result.report.per_seed) rows[id] = counters;
      std::cerr << "run: seed " << result.state.seed_id << " finished after "
                << result.state.iteration << " iteration(s), "
                << result.state.accumulated.size() << " novel\n";
    } catch (const gen::BackendUnavailable& e) {
      ++failures;
      backend_failure = true;
      events.emit("seed_failed", {{"seed", seed.string()}, {"error", e.what()}});
      std::cerr << "error: seed " << seed.string() << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
      ++failures;
      events.emit("seed_failed", {{"seed", seed.string()}, {"error", e.what()}});
      std::cerr << "error: seed " << seed.string() << ": " << e.what() << "\n";
    }
  }

  report::RunReport combined = report::summarize(all_records);
  for (auto& [id, counters] : combined.per_seed) {
    if (const auto it = rows.find(id); it != rows.end()) {
      counters.iterations = it->second.iterations;
      counters.terminated_reason = it->second.terminated_reason;
    }
  }
  {
    std::ofstream rj(config.output_dir / "report.json", std::ios::trunc);
    rj << report::to_json(combined).dump(2) << "\n";
    std::ofstream rt(config.output_dir / "report.txt", std::ios::trunc);
    rt << report::render_table(combined);
  }
  std::cout << report::render_table(combined);
  events.emit("batch_done", {{"seeds", seeds.size()}, {"failed", failures}});

  if (failures == static_cast<int>(seeds.size()))
    return backend_failure ? cfg::kExitBackend : cfg::kExitUsage;
  return cfg::kExitOk;
}

std::vector<std::string> read_dataset_statements(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::vector<std::string> statements;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": unparseable record: " + e.what());
    }
    if (j.contains("type")) continue;  // header / trailer
    if (j.contains("statement")) statements.push_back(j.at("statement").get<std::string>());
  }
  return statements;
}

int cmd_prove(const cfg::Config& config, const std::string& dataset, bool resume) {
  const auto statements = read_dataset_statements(dataset);
  if (statements.empty()) {
    std::cerr << "error: dataset has no statements\n";
    return cfg::kExitUsage;
  }
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  EventLog events(out_dir / "events.jsonl");
  events.emit("config_resolved", cfg::to_json(config));

  auto prover = make_prover(config);
  auto checker = make_checker(config);

  prove::MatrixOptions options;
  options.workers = config.run.workers;
  options.verify_timeout = config.run.timeouts.syntax;

  const fs::path cells_path = out_dir / "cells.jsonl";
  if (resume && fs::exists(cells_path)) {
    std::ifstream in(cells_path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        std::cerr << "error: " << cells_path.string() << ":" << lineno
                  << ": corrupt cell record: " << e.what() << "\n";
        return cfg::kExitCorrupt;
      }
      prove::ProofAttempt a;
      size_t problem = 0;
      try {
        a.statement_id = j.at("statement_id").get<std::string>();
        a.proof_text = j.value("proof_text", std::string{});
        a.verified = j.value("verified", false);
        a.sample_index = j.at("sample_index").get<int>();
        problem = std::stoul(a.statement_id.substr(1));
      } catch (const std::exception& e) {
        std::cerr << "error: " << cells_path.string() << ":" << lineno
                  << ": corrupt cell record: " << e.what() << "\n";
        return cfg::kExitCorrupt;
      }
      if (problem < statements.size()) a.statement = statements[problem];
      options.done[{problem, a.sample_index}] = a;
    }
    events.emit("resume", {{"cells_loaded", options.done.size()}});
    std::cerr << "prove: resuming with " << options.done.size() << " cached cell(s)\n";
  }

  std::ofstream cells(cells_path, std::ios::trunc);
  options.sink = [&](const prove::ProofAttempt& a) {
    json j{{"statement_id", a.statement_id},
           {"sample_index", a.sample_index},
           {"proof_text", a.proof_text},
           {"verified", a.verified},
           {"reward", prove::reward(a)}};
    if (a.error) j["error"] = *a.error;
    cells << j.dump() << "\n";
  };

  const auto matrix = prove::run_matrix(statements, *prover, *checker, config.prove_k, options);
  const auto rate = report::rates(matrix);

  json problems = json::array();
  for (size_t i = 0; i < matrix.problems.size(); ++i)
    problems.push_back({{"id", matrix.problems[i]},
                        {"statement", statements[i]},
                        {"solved", matrix.solved(i)}});
  {
    std::ofstream summary(out_dir / "matrix_summary.json", std::ios::trunc);
    summary << json{{"k", matrix.k}, {"problems", problems}, {"rates", report::to_json(rate)}}
                   .dump(2)
            << "\n";
  }
  events.emit("prove_done", report::to_json(rate));
  std::cout << "proof rate: " << rate.proof_successes << "/" << rate.proof_attempts
            << "\nproblem rate: " << rate.problems_solved << "/" << rate.problems_total << "\n";
  return cfg::kExitOk;
}

// Reads one run directory's records back from its iter-*/ files. Corruption
// reports file and line and aborts the whole stats command.
std::vector<report::Record> read_run_records(const fs::path& run_dir) {
  std::vector<report::Record> records;
  std::vector<std::pair<int, fs::path>> iter_dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("iter-", 0) != 0) continue;
    const std::string digits = name.substr(5);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
      continue;
    iter_dirs.emplace_back(std::stoi(digits), entry.path());
  }
  std::sort(iter_dirs.begin(), iter_dirs.end());
  for (const auto& [round, dir] : iter_dirs) {
    (void)round;
    std::ifstream cand(dir / "candidates.jsonl");
    std::ifstream verd(dir / "verdicts.jsonl");
    if (!cand || !verd)
      throw std::runtime_error(dir.string() + ": missing candidates/verdicts files");
    std::string cline, vline;
    size_t lineno = 0;
    while (true) {
      const bool got_c = static_cast<bool>(std::getline(cand, cline));
      const bool got_v = static_cast<bool>(std::getline(verd, vline));
      ++lineno;
      if (!got_c && !got_v) break;
      if (got_c != got_v)
        throw std::runtime_error((dir / "verdicts.jsonl").string() + ":" +
                                 std::to_string(lineno) + ": record count mismatch");
      try {
        records.emplace_back(serde::candidate_from_json(json::parse(cline)),
                             serde::verdict_from_json(json::parse(vline)));
      } catch (const json::exception& e) {
        throw std::runtime_error((dir / "candidates.jsonl").string() + ":" +
                                 std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  return records;
}

int cmd_stats(const std::vector<std::string>& run_dirs) {
  std::vector<report::Record> all_records;
  std::map<std::string, std::pair<int, std::string>> run_meta;  // seed -> (iters, reason)
  for (const auto& dir : run_dirs) {
    if (!fs::is_directory(dir)) {
      std::cerr << "error: not a run directory: " << dir << "\n";
      return cfg::kExitUsage;
    }
    try {
      auto records = read_run_records(dir);
      all_records.insert(all_records.end(), records.begin(), records.end());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return cfg::kExitCorrupt;
    }
    const fs::path snapshot = fs::path(dir) / "state.snapshot";
    if (fs::exists(snapshot)) {
      try {
        const auto state = loop::load_state(snapshot);
        run_meta[state.seed_id] = {
            state.iteration,
            state.terminated ? std::string(loop::termination_name(*state.terminated)) : ""};
      } catch (const std::exception& e) {
        std::cerr << "error: " << snapshot.string() << ": " << e.what() << "\n";
        return cfg::kExitCorrupt;
      }
    }
  }
  auto combined = report::summarize(all_records);
  for (auto& [seed, counters] : combined.per_seed) {
    if (const auto it = run_meta.find(seed); it != run_meta.end()) {
      counters.iterations = it->second.first;
      counters.terminated_reason = it->second.second;
    }
  }
  // A single run directory reproduces that run's own report exactly,
  // aggregate metadata included.
  if (combined.per_seed.size() == 1 && run_meta.size() == 1) {
    combined.aggregate.iterations = run_meta.begin()->second.first;
    combined.aggregate.terminated_reason = run_meta.begin()->second.second;
  }
  std::cout << report::render_table(combined);
  return cfg::kExitOk;
}

int cmd_export(const std::string& run_dir, const std::string& filter_name,
               std::string out_path) {
  const auto filter = report::filter_from_name(filter_name);
  if (!filter) {
    std::cerr << "error: unknown filter '" << filter_name << "'\n";
    return cfg::kExitUsage;
  }
  const fs::path snapshot = fs::path(run_dir) / "state.snapshot";
  if (!fs::exists(snapshot)) {
    std::cerr << "error: no state.snapshot under " << run_dir << "\n";
    return cfg::kExitUsage;
  }
  loop::IterationState state;
  try {
    state = loop::load_state(snapshot);
  } catch (const std::exception& e) {
    std::cerr << "error: " << snapshot.string() << ": " << e.what() << "\n";
    return cfg::kExitCorrupt;
  }
  if (out_path.empty())
    out_path = (fs::path(run_dir) /
                ("dataset-" + std::string(report::filter_name(*filter)) + ".jsonl"))
                   .string();
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return cfg::kExitUsage;
  }
  const long long count = report::export_dataset(state.records, *filter, out);
  std::cout << "exported " << count << " record(s) to " << out_path << "\n";
  return cfg::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lean 4 conjecture generation, evaluation, and proving pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Configuration file (JSON)");

  cfg::Config config;

  std::string parse_path;
  auto* parse_cmd = app.add_subcommand("parse", "Summarize the structure of a Lean file");
  parse_cmd->add_option("file", parse_path, "Lean source file")->required();

  std::vector<std::string> seed_args;
  auto* run_cmd = app.add_subcommand("run", "Generate and evaluate conjectures per seed");
  run_cmd->add_option("seeds", seed_args, "Seed .lean files or directories")->required();
  run_cmd->add_option("--out", config.output_dir, "Output directory");
  run_cmd->add_option("--max-iterations", config.run.max_iterations, "Iteration cap");
  run_cmd->add_flag("--no-directive-many{false},--directive-many{true}",
                    config.run.directive_many,
                    "Toggle the volume directive in the system prompt");
  run_cmd->add_option("--workers", config.run.workers, "Checker fan-out");
  run_cmd->add_option("--seed", config.run.seed, "Deterministic seed for all randomness");
  run_cmd->add_flag("--keep-logs", config.run.keep_logs, "Retain per-candidate checker output");
  run_cmd->add_option("--generator", config.generator_type, "mutation | http");
  run_cmd->add_option("--checker", config.checker_type, "stub | subprocess");

  std::string dataset_path;
  bool resume = false;
  auto* prove_cmd = app.add_subcommand("prove", "Attempt and verify proofs, pass@k");
  prove_cmd->add_option("dataset", dataset_path, "Dataset (JSONL with statement fields)")
      ->required();
  prove_cmd->add_option("--k", config.prove_k, "Samples per problem");
  prove_cmd->add_option("--out", config.output_dir, "Output directory");
  prove_cmd->add_flag("--resume", resume, "Reuse cells.jsonl from an interrupted run");
  prove_cmd->add_option("--workers", config.run.workers, "Verification fan-out");
  prove_cmd->add_option("--prover", config.prover_type, "stub | http");
  prove_cmd->add_option("--checker", config.checker_type, "stub | subprocess");

  std::vector<std::string> stat_dirs;
  auto* stats_cmd = app.add_subcommand("stats", "Re-aggregate persisted run records");
  stats_cmd->add_option("run_dirs", stat_dirs, "Run directories")->required();

  std::string export_dir, export_filter = "all", export_out;
  auto* export_cmd = app.add_subcommand("export", "Export a dataset from a run directory");
  export_cmd->add_option("run_dir", export_dir, "Run directory")->required();
  export_cmd->add_option("--filter", export_filter, "all | novel_only | nontrivial_only");
  export_cmd->add_option("--out", export_out, "Output file (default under the run dir)");

  // Resolution order: defaults < file < flags < env. The file loads before
  // CLI11 writes flag values, so flags passed on the command line override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cfg::apply_file(config, argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cfg::kExitUsage;
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cfg::kExitOk : cfg::kExitUsage;
  }

  cfg::apply_env(config);
  try {
    cfg::validate(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfg::kExitUsage;
  }
  log_resolution(config);

  try {
    if (*parse_cmd) return cmd_parse(parse_path);
    if (*run_cmd) return cmd_run(config, seed_args);
    if (*prove_cmd) return cmd_prove(config, dataset_path, resume);
    if (*stats_cmd) return cmd_stats(stat_dirs);
    if (*export_cmd) return cmd_export(export_dir, export_filter, export_out);
  } catch (const gen::BackendUnavailable& e) {
    std::cerr << "error: backend unavailable: " << e.what() << "\n";
    return cfg::kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfg::kExitUsage;
  }
  return cfg::kExitUsage;
}
