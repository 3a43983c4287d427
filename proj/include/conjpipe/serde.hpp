#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "conjpipe/checker.hpp"
#include "conjpipe/genpipe.hpp"

// JSON mapping for the record types that cross file boundaries. Plain
// nlohmann::json keeps keys sorted, so serialized snapshots are byte-stable
// across runs.
namespace conjpipe::serde {

using nlohmann::json;

inline json to_json(const gen::Candidate& c) {
  return json{{"statement", c.statement},
              {"raw_text", c.raw_text},
              {"seed_id", c.seed_id},
              {"iteration", c.iteration},
              {"assembled_source", c.assembled_source}};
}

inline gen::Candidate candidate_from_json(const json& j) {
  gen::Candidate c;
  c.statement = j.at("statement").get<std::string>();
  c.raw_text = j.value("raw_text", std::string{});
  c.seed_id = j.value("seed_id", std::string{});
  c.iteration = j.value("iteration", 0);
  c.assembled_source = j.value("assembled_source", std::string{});
  return c;
}

inline json to_json(const check::Diagnostic& d) {
  json j{{"severity", std::string(check::severity_name(d.severity))},
         {"message", d.message}};
  if (d.line) j["line"] = *d.line;
  if (d.column) j["column"] = *d.column;
  return j;
}

inline check::Diagnostic diagnostic_from_json(const json& j) {
  check::Diagnostic d;
  const auto sev = j.at("severity").get<std::string>();
  d.severity = sev == "warning"  ? check::Severity::Warning
               : sev == "info" ? check::Severity::Info
                               : check::Severity::Error;
  d.message = j.at("message").get<std::string>();
  if (j.contains("line")) d.line = j.at("line").get<int>();
  if (j.contains("column")) d.column = j.at("column").get<int>();
  return d;
}

inline json to_json(const check::Verdict& v) {
  json j;
  j["syntax"] = v.syntax == check::SyntaxVerdict::Valid ? "valid" : "invalid";
  j["novelty"] = nullptr;
  j["triviality"] = nullptr;
  if (v.novelty)
    j["novelty"] = *v.novelty == check::NoveltyVerdict::Novel ? "novel" : "known";
  if (v.triviality)
    j["triviality"] =
        *v.triviality == check::TrivialityVerdict::NonTrivial ? "non_trivial" : "trivial";
  j["witness"] = v.witness ? json(*v.witness) : json(nullptr);
  json diags = json::array();
  for (const auto& d : v.diagnostics) diags.push_back(to_json(d));
  j["diagnostics"] = diags;
  return j;
}

inline check::Verdict verdict_from_json(const json& j) {
  check::Verdict v;
  v.syntax = j.at("syntax").get<std::string>() == "valid" ? check::SyntaxVerdict::Valid
                                                          : check::SyntaxVerdict::Invalid;
  if (j.contains("novelty") && !j.at("novelty").is_null())
    v.novelty = j.at("novelty").get<std::string>() == "novel" ? check::NoveltyVerdict::Novel
                                                              : check::NoveltyVerdict::Known;
  if (j.contains("triviality") && !j.at("triviality").is_null())
    v.triviality = j.at("triviality").get<std::string>() == "non_trivial"
                       ? check::TrivialityVerdict::NonTrivial
                       : check::TrivialityVerdict::Trivial;
  if (j.contains("witness") && !j.at("witness").is_null())
    v.witness = j.at("witness").get<std::string>();
  if (j.contains("diagnostics"))
    for (const auto& d : j.at("diagnostics")) v.diagnostics.push_back(diagnostic_from_json(d));
  return v;
}

}  // namespace conjpipe::serde
