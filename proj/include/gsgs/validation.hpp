#pragma once

#include "gsgs/superres.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace gsgs {

// Outcome of one named check. Non-gating checks are reported but never fail
// a suite.
struct CriterionResult {
  std::string id;
  std::string description;
  bool pass = false;
  bool gating = true;
  std::string detail;
  double seconds = 0.0;
  double time_limit_s = 0.0;  // 0: no limit
  nlohmann::json metrics = nlohmann::json::object();

  // "<id> PASS|FAIL[ (non-gating)] <description>: <detail> [<seconds> s]"
  std::string line() const;
  nlohmann::json to_json() const;
};

struct SuiteReport {
  std::string suite;
  std::vector<CriterionResult> results;

  bool pass() const;  // every gating result passed
  std::string text() const;
  nlohmann::json to_json() const;
};

// operators, conjugate, invariance, toy-hier, superres-desk.
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);
// Throws ConfigError for an unknown suite.
SuiteReport run_suite(const std::string& name);

// T1 .. T7.
const std::vector<std::string>& acceptance_ids();
// Throws ConfigError for an unknown id.
CriterionResult run_acceptance(const std::string& id);

// Shared fixtures, exposed so tests and the CLI can rebuild them.

// 16-pixel periodic deconvolution: S = I, 3-tap blur (1/4, 1/2, 1/4), 1-D
// Laplacian, sinusoidal truth, true gamma_n = 4.
ModelPtr toy_hier_model(std::uint64_t seed);

// 64 x 64 phantom seen through the desk geometry.
ModelPtr desk_model(double gamma_n_true, std::uint64_t seed);

}  // namespace gsgs
