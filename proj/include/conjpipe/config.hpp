#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "conjpipe/checker_backends.hpp"
#include "conjpipe/http_client.hpp"
#include "conjpipe/looper.hpp"
#include "conjpipe/prover.hpp"

// Effective CLI configuration. Resolution order: built-in defaults, then the
// config file, then command-line flags, then the environment (secrets only).
// The whole thing resolves before any pipeline work starts.
namespace conjpipe::cfg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // usage or input error
inline constexpr int kExitCorrupt = 3;  // corrupt persisted records
inline constexpr int kExitBackend = 4;  // backend unavailability

struct Config {
  loop::RunConfig run;  // run_dir is assigned per seed at execution time
  std::filesystem::path output_dir = "runs";

  std::string generator_type = "mutation";  // mutation | http
  http::ChatEndpoint generator_endpoint{"", "o3", 1.0, "", 3, 250, 120};

  std::string checker_type = "stub";  // stub | subprocess
  check::SubprocessCheckerConfig checker_subprocess;

  std::string prover_type = "stub";  // stub | http
  prove::HttpProverConfig prover_http;
  std::map<std::string, std::string> prover_stub_proofs;
  int prove_k = 128;

  std::vector<std::string> resolution_log;
};

inline void apply_file(Config& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config file " + path.string() + ": " + e.what());
  }

  if (j.contains("max_iterations")) c.run.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("directive_many")) c.run.directive_many = j.at("directive_many").get<bool>();
  if (j.contains("workers")) c.run.workers = j.at("workers").get<int>();
  if (j.contains("seed")) c.run.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("keep_logs")) c.run.keep_logs = j.at("keep_logs").get<bool>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

  if (j.contains("timeouts")) {
    const auto& t = j.at("timeouts");
    if (t.contains("syntax_s")) c.run.timeouts.syntax = std::chrono::seconds(t.at("syntax_s").get<long>());
    if (t.contains("exact_s")) c.run.timeouts.exact = std::chrono::seconds(t.at("exact_s").get<long>());
    if (t.contains("aesop_s")) c.run.timeouts.aesop = std::chrono::seconds(t.at("aesop_s").get<long>());
  }

  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    if (g.contains("type")) c.generator_type = g.at("type").get<std::string>();
    if (g.contains("url")) c.generator_endpoint.url = g.at("url").get<std::string>();
    if (g.contains("model")) c.generator_endpoint.model = g.at("model").get<std::string>();
    if (g.contains("temperature"))
      c.generator_endpoint.temperature = g.at("temperature").get<double>();
    if (g.contains("max_retries")) c.generator_endpoint.max_retries = g.at("max_retries").get<int>();
    if (g.contains("backoff_ms")) c.generator_endpoint.backoff_ms = g.at("backoff_ms").get<int>();
    if (g.contains("timeout_s")) c.generator_endpoint.timeout_s = g.at("timeout_s").get<int>();
  }

  if (j.contains("checker")) {
    const auto& k = j.at("checker");
    if (k.contains("type")) c.checker_type = k.at("type").get<std::string>();
    if (k.contains("lean_command"))
      c.checker_subprocess.lean_command = k.at("lean_command").get<std::string>();
    if (k.contains("workspace")) c.checker_subprocess.workspace = k.at("workspace").get<std::string>();
    if (k.contains("scratch_dir"))
      c.checker_subprocess.scratch_dir = k.at("scratch_dir").get<std::string>();
  }

  if (j.contains("prover")) {
    const auto& p = j.at("prover");
    if (p.contains("type")) c.prover_type = p.at("type").get<std::string>();
    if (p.contains("url")) c.prover_http.endpoint.url = p.at("url").get<std::string>();
    if (p.contains("model")) c.prover_http.endpoint.model = p.at("model").get<std::string>();
    if (p.contains("temperature"))
      c.prover_http.endpoint.temperature = p.at("temperature").get<double>();
    if (p.contains("prompt_template"))
      c.prover_http.prompt_template = p.at("prompt_template").get<std::string>();
    if (p.contains("k")) c.prove_k = p.at("k").get<int>();
    if (p.contains("proofs"))
      c.prover_stub_proofs = p.at("proofs").get<std::map<std::string, std::string>>();
  }

  c.resolution_log.push_back("file " + path.string());
}

// Secrets come from the environment last, never from flags.
inline void apply_env(Config& c) {
  if (const char* key = std::getenv("CONJ_API_KEY"); key && *key) {
    c.generator_endpoint.api_key = key;
    c.prover_http.endpoint.api_key = key;
    c.resolution_log.push_back("env CONJ_API_KEY (secret)");
  }
}

inline void validate(const Config& c) {
  if (c.run.max_iterations < 1) throw std::runtime_error("max_iterations must be >= 1");
  if (c.run.workers < 1) throw std::runtime_error("workers must be >= 1");
  if (c.prove_k < 1) throw std::runtime_error("k must be >= 1");
  if (c.run.timeouts.syntax.count() <= 0 || c.run.timeouts.exact.count() <= 0 ||
      c.run.timeouts.aesop.count() <= 0)
    throw std::runtime_error("timeouts must be positive");
  if (c.generator_type != "mutation" && c.generator_type != "http")
    throw std::runtime_error("unknown generator type '" + c.generator_type + "'");
  if (c.checker_type != "stub" && c.checker_type != "subprocess")
    throw std::runtime_error("unknown checker type '" + c.checker_type + "'");
  if (c.prover_type != "stub" && c.prover_type != "http")
    throw std::runtime_error("unknown prover type '" + c.prover_type + "'");
}

// Effective configuration with secrets masked, for the resolution log.
inline nlohmann::json to_json(const Config& c) {
  return nlohmann::json{
      {"max_iterations", c.run.max_iterations},
      {"directive_many", c.run.directive_many},
      {"workers", c.run.workers},
      {"seed", c.run.seed},
      {"keep_logs", c.run.keep_logs},
      {"output_dir", c.output_dir.string()},
      {"timeouts",
       {{"syntax_s", c.run.timeouts.syntax.count()},
        {"exact_s", c.run.timeouts.exact.count()},
        {"aesop_s", c.run.timeouts.aesop.count()}}},
      {"generator",
       {{"type", c.generator_type},
        {"url", c.generator_endpoint.url},
        {"model", c.generator_endpoint.model},
        {"temperature", c.generator_endpoint.temperature},
        {"api_key", c.generator_endpoint.api_key.empty() ? "" : "***"}}},
      {"checker",
       {{"type", c.checker_type},
        {"lean_command", c.checker_subprocess.lean_command},
        {"workspace", c.checker_subprocess.workspace}}},
      {"prover",
       {{"type", c.prover_type},
        {"url", c.prover_http.endpoint.url},
        {"model", c.prover_http.endpoint.model},
        {"k", c.prove_k},
        {"stub_proofs", c.prover_stub_proofs.size()}}}};
}

}  // namespace conjpipe::cfg
