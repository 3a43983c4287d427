#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conjpipe/checker.hpp"
#include "conjpipe/genpipe.hpp"
#include "conjpipe/prover.hpp"
#include "conjpipe/serde.hpp"

// Run accounting: per-seed and aggregate counters for the generation lattice,
// pass@k rate reports, and dataset export.
namespace conjpipe::report {

// Exact rational. Averages like 4130/40 must render as 103.25, never as a
// float with drift.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool operator==(const Rational&) const = default;
  double approx() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string fraction() const { return std::to_string(num) + "/" + std::to_string(den); }

  // Exact decimal when the reduced denominator is 2^a 5^b; the fraction form
  // otherwise.
  std::string to_string() const {
    long long d = den;
    int twos = 0, fives = 0;
    while (d % 2 == 0) {
      d /= 2;
      ++twos;
    }
    while (d % 5 == 0) {
      d /= 5;
      ++fives;
    }
    if (d != 1) return fraction();
    const int decimals = twos > fives ? twos : fives;
    unsigned long long scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const bool negative = num < 0;
    const unsigned long long mag = static_cast<unsigned long long>(negative ? -num : num);
    // mag * scale / den is exact by construction.
    const unsigned long long scaled = mag * scale / static_cast<unsigned long long>(den);
    std::string digits = std::to_string(scaled);
    if (decimals == 0) return (negative ? "-" : "") + digits;
    if (digits.size() <= static_cast<size_t>(decimals))
      digits.insert(0, static_cast<size_t>(decimals) + 1 - digits.size(), '0');
    digits.insert(digits.size() - static_cast<size_t>(decimals), ".");
    return (negative ? "-" : "") + digits;
  }
};

struct SeedCounters {
  long long total = 0;
  long long valid = 0;
  long long novel = 0;
  long long non_trivial = 0;
  int iterations = 0;
  std::string terminated_reason;
  bool operator==(const SeedCounters&) const = default;
};

struct RunReport {
  std::map<std::string, SeedCounters> per_seed;
  SeedCounters aggregate;
  Rational avg_novel_per_seed;
  bool avg_defined = false;  // false when there were no seeds
};

using Record = std::pair<gen::Candidate, check::Verdict>;

// total >= valid >= novel >= non_trivial must hold everywhere; a violation
// means a verdict escaped the lattice and is a bug, not data.
inline void assert_chain(const RunReport& report) {
  auto check_one = [](const std::string& scope, const SeedCounters& c) {
    if (c.total < c.valid || c.valid < c.novel || c.novel < c.non_trivial)
      throw std::logic_error("counter chain violated for " + scope);
  };
  for (const auto& [seed, counters] : report.per_seed) check_one(seed, counters);
  check_one("aggregate", report.aggregate);
}

inline RunReport summarize(const std::vector<Record>& records) {
  RunReport report;
  for (const auto& [candidate, verdict] : records) {
    SeedCounters& c = report.per_seed[candidate.seed_id];
    c.total += 1;
    if (verdict.valid()) c.valid += 1;
    if (verdict.valid() && verdict.novel()) c.novel += 1;
    if (verdict.valid() && verdict.novel() && verdict.non_trivial()) c.non_trivial += 1;
    if (candidate.iteration > c.iterations) c.iterations = candidate.iteration;
  }
  for (const auto& [seed, c] : report.per_seed) {
    report.aggregate.total += c.total;
    report.aggregate.valid += c.valid;
    report.aggregate.novel += c.novel;
    report.aggregate.non_trivial += c.non_trivial;
    if (c.iterations > report.aggregate.iterations) report.aggregate.iterations = c.iterations;
  }
  if (!report.per_seed.empty()) {
    report.avg_novel_per_seed =
        Rational(report.aggregate.novel, static_cast<long long>(report.per_seed.size()));
    report.avg_defined = true;
  }
  assert_chain(report);
  return report;
}

inline nlohmann::json to_json(const RunReport& report) {
  nlohmann::json seeds;
  auto counters_json = [](const SeedCounters& c) {
    return nlohmann::json{{"total", c.total},
                          {"valid", c.valid},
                          {"novel", c.novel},
                          {"non_trivial", c.non_trivial},
                          {"iterations", c.iterations},
                          {"terminated_reason", c.terminated_reason}};
  };
  for (const auto& [seed, c] : report.per_seed) seeds[seed] = counters_json(c);
  return nlohmann::json{
      {"per_seed", seeds},
      {"aggregate", counters_json(report.aggregate)},
      {"avg_novel_per_seed",
       report.avg_defined ? report.avg_novel_per_seed.to_string() : "0"},
      {"avg_novel_per_seed_fraction",
       report.avg_defined ? report.avg_novel_per_seed.fraction() : "0/1"},
      {"avg_defined", report.avg_defined}};
}

// Aligned text table, one row per seed plus the aggregate.
inline std::string render_table(const RunReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Seed", "Total", "Valid", "Novel", "Non-Trivial", "Iter", "Reason"});
  auto row = [](const std::string& name, const SeedCounters& c) {
    return std::vector<std::string>{name,
                                    std::to_string(c.total),
                                    std::to_string(c.valid),
                                    std::to_string(c.novel),
                                    std::to_string(c.non_trivial),
                                    std::to_string(c.iterations),
                                    c.terminated_reason};
  };
  for (const auto& [seed, c] : report.per_seed) rows.push_back(row(seed, c));
  rows.push_back(row("TOTAL", report.aggregate));

  std::vector<size_t> width(rows[0].size(), 0);
  for (const auto& r : rows)
    for (size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());

  std::ostringstream out;
  for (size_t ri = 0; ri < rows.size(); ++ri) {
    for (size_t i = 0; i < rows[ri].size(); ++i) {
      out << rows[ri][i];
      if (i + 1 < rows[ri].size())
        out << std::string(width[i] - rows[ri][i].size() + 2, ' ');
    }
    out << "\n";
    if (ri == 0) {
      size_t total = 0;
      for (size_t i = 0; i < width.size(); ++i) total += width[i] + (i + 1 < width.size() ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  if (report.avg_defined)
    out << "avg novel per seed: " << report.avg_novel_per_seed.to_string() << " ("
        << report.avg_novel_per_seed.fraction() << ")\n";
  else
    out << "avg novel per seed: 0 (no seeds)\n";
  return out.str();
}

struct RateReport {
  long long proof_successes = 0;
  long long proof_attempts = 0;
  long long problems_solved = 0;
  long long problems_total = 0;
  bool operator==(const RateReport&) const = default;
};

inline RateReport rates(const prove::AttemptMatrix& matrix) {
  RateReport r;
  r.problems_total = static_cast<long long>(matrix.problems.size());
  r.proof_attempts = static_cast<long long>(matrix.problems.size()) * matrix.k;
  for (size_t p = 0; p < matrix.problems.size(); ++p) {
    bool any = false;
    for (int s = 0; s < matrix.k; ++s) {
      if (matrix.outcome(p, s)) {
        ++r.proof_successes;
        any = true;
      }
    }
    if (any) ++r.problems_solved;
  }
  if (r.proof_successes > r.proof_attempts || r.problems_solved > r.problems_total)
    throw std::logic_error("rate report out of range");
  return r;
}

inline nlohmann::json to_json(const RateReport& r) {
  return nlohmann::json{{"proof_successes", r.proof_successes},
                        {"proof_attempts", r.proof_attempts},
                        {"problems_solved", r.problems_solved},
                        {"problems_total", r.problems_total}};
}

enum class ExportFilter { All, NovelOnly, NonTrivialOnly };

inline const char* filter_name(ExportFilter f) {
  switch (f) {
    case ExportFilter::All: return "all";
    case ExportFilter::NovelOnly: return "novel_only";
    case ExportFilter::NonTrivialOnly: return "nontrivial_only";
  }
  return "all";
}

inline std::optional<ExportFilter> filter_from_name(std::string_view name) {
  if (name == "all") return ExportFilter::All;
  if (name == "novel_only" || name == "novel") return ExportFilter::NovelOnly;
  if (name == "nontrivial_only" || name == "nontrivial") return ExportFilter::NonTrivialOnly;
  return std::nullopt;
}

// Line-delimited export: a header line, one record per conjecture passing the
// filter, and a trailer whose count equals the matching report counter.
// Returns the record count.
inline long long export_dataset(const std::vector<Record>& records, ExportFilter filter,
                                std::ostream& out) {
  auto keep = [&](const check::Verdict& v) {
    switch (filter) {
      case ExportFilter::All: return true;
      case ExportFilter::NovelOnly: return v.valid() && v.novel();
      case ExportFilter::NonTrivialOnly:
        return v.valid() && v.novel() && v.non_trivial();
    }
    return false;
  };
  out << nlohmann::json{{"type", "header"}, {"filter", filter_name(filter)}}.dump() << "\n";
  long long count = 0;
  for (const auto& [candidate, verdict] : records) {
    if (!keep(verdict)) continue;
    nlohmann::json line{{"statement", candidate.statement},
                        {"seed_id", candidate.seed_id},
                        {"iteration", candidate.iteration}};
    const nlohmann::json v = serde::to_json(verdict);
    line["syntax"] = v.at("syntax");
    line["novelty"] = v.at("novelty");
    line["triviality"] = v.at("triviality");
    line["witness"] = v.at("witness");
    out << line.dump() << "\n";
    ++count;
  }
  out << nlohmann::json{{"type", "trailer"}, {"count", count}}.dump() << "\n";
  return count;
}

}  // namespace conjpipe::report
