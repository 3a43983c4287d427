#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conjpipe/checker.hpp"
#include "conjpipe/genpipe.hpp"
#include "conjpipe/http_client.hpp"
#include "conjpipe/parallel.hpp"

// Proof sampling and pass@k accounting. Proof attempts come from a pluggable
// backend; verification reuses the checker; the reward is the binary signal
// an RL consumer trains on.
namespace conjpipe::prove {

class ProverBackend {
 public:
  virtual ~ProverBackend() = default;
  virtual std::string id() const = 0;
  // Proof text for one sample; may be empty. Throws BackendUnavailable.
  virtual std::string attempt(const std::string& statement, int sample_index) = 0;
};

// Scriptable stub. An explicit script wins; otherwise the proof map, then
// the fallback (empty fallback = no proof found).
class StubProver : public ProverBackend {
 public:
  std::map<std::string, std::string> proofs;
  std::string fallback;
  std::function<std::string(const std::string&, int)> script;

  std::string id() const override { return "stub"; }
  std::string attempt(const std::string& statement, int sample_index) override {
    if (script) return script(statement, sample_index);
    if (const auto it = proofs.find(statement); it != proofs.end()) return it->second;
    return fallback;
  }
};

struct HttpProverConfig {
  http::ChatEndpoint endpoint;
  std::string prompt_template =
      "Complete the following Lean 4 theorem with a proof. Reply with the tactic "
      "block only.\n\n{statement}";
};

class HttpProver : public ProverBackend {
 public:
  explicit HttpProver(HttpProverConfig config) : config_(std::move(config)) {}
  std::string id() const override { return "http:" + config_.endpoint.model; }
  std::string attempt(const std::string& statement, int) override {
    std::string user = config_.prompt_template;
    const size_t p = user.find("{statement}");
    if (p != std::string::npos) user.replace(p, 11, statement);
    return http::chat_complete(config_.endpoint, "You prove Lean 4 theorems.", user);
  }

 private:
  HttpProverConfig config_;
};

struct ProofAttempt {
  std::string statement_id;
  std::string statement;
  std::string proof_text;
  bool verified = false;
  int sample_index = 0;
  std::optional<std::string> error;  // backend failure annotation
};

// 1 for a verified proof, 0 otherwise.
inline int reward(const ProofAttempt& attempt) { return attempt.verified ? 1 : 0; }

// True iff the assembled statement+proof checks with zero errors and zero
// sorry warnings. An empty proof never verifies.
inline bool verify_proof(const std::string& statement, const std::string& proof_text,
                         check::CheckerBackend& checker, const lean::ContextBlock& ctx = {},
                         std::chrono::seconds timeout = std::chrono::seconds{120}) {
  std::string_view proof = text::trim(proof_text);
  if (text::starts_with_word(proof, "by")) proof = text::trim(proof.substr(2));
  if (proof.empty()) return false;

  check::CheckRequest req;
  req.proof_slot = check::ProofSlot::Explicit;
  req.timeout = timeout;
  std::string source(text::trim(gen::augment(statement, ctx)));
  source += " ";
  source.append(proof);
  source += "\n";
  req.assembled_source = std::move(source);

  const check::CheckResult res = checker.run(req);
  if (res.timed_out || res.crashed) return false;
  for (const auto& d : res.diagnostics) {
    if (d.severity == check::Severity::Error) return false;
    if (check::detail::is_sorry_warning(d)) return false;
  }
  return true;
}

// Dense per-(problem, sample) outcomes, row-major.
struct AttemptMatrix {
  std::vector<std::string> problems;  // statement ids
  int k = 0;
  std::vector<std::uint8_t> outcomes;

  bool outcome(size_t problem, int sample) const {
    return outcomes[problem * static_cast<size_t>(k) + static_cast<size_t>(sample)] != 0;
  }
  bool solved(size_t problem) const {
    for (int s = 0; s < k; ++s)
      if (outcome(problem, s)) return true;
    return false;
  }
};

struct MatrixOptions {
  int workers = 1;
  lean::ContextBlock context;
  std::chrono::seconds verify_timeout{120};
  // Cells already decided by a previous run, keyed (problem, sample).
  std::map<std::pair<size_t, int>, ProofAttempt> done;
  // Invoked once per cell in (problem, sample) order after the run.
  std::function<void(const ProofAttempt&)> sink;
};

inline std::string problem_id(size_t index) { return "p" + std::to_string(index); }

// Every (problem, sample) pair gets exactly one outcome; backend failures
// become unverified cells with an error annotation rather than aborting.
inline AttemptMatrix run_matrix(const std::vector<std::string>& statements,
                                ProverBackend& prover, check::CheckerBackend& checker, int k,
                                const MatrixOptions& options = {}) {
  const size_t n = statements.size();
  const size_t cells = n * static_cast<size_t>(k);
  std::vector<ProofAttempt> attempts(cells);

  par::parallel_for(cells, options.workers, [&](size_t cell) {
    const size_t problem = cell / static_cast<size_t>(k);
    const int sample = static_cast<int>(cell % static_cast<size_t>(k));
    ProofAttempt& a = attempts[cell];
    if (const auto it = options.done.find({problem, sample}); it != options.done.end()) {
      a = it->second;
      a.statement_id = problem_id(problem);
      a.sample_index = sample;
      return;
    }
    a.statement_id = problem_id(problem);
    a.statement = statements[problem];
    a.sample_index = sample;
    try {
      a.proof_text = prover.attempt(statements[problem], sample);
      a.verified = verify_proof(statements[problem], a.proof_text, checker, options.context,
                                options.verify_timeout);
    } catch (const std::exception& e) {
      a.error = e.what();
      a.verified = false;
    }
  });

  AttemptMatrix matrix;
  matrix.k = k;
  matrix.problems.reserve(n);
  for (size_t i = 0; i < n; ++i) matrix.problems.push_back(problem_id(i));
  matrix.outcomes.assign(cells, 0);
  for (size_t cell = 0; cell < cells; ++cell) {
    matrix.outcomes[cell] = attempts[cell].verified ? 1 : 0;
    if (options.sink) options.sink(attempts[cell]);
  }
  return matrix;
}

}  // namespace conjpipe::prove
