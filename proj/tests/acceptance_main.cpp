#include "gsgs/validation.hpp"

#include <iostream>
#include <string>
#include <vector>

// Runs the named criteria (all of them when none are given) and prints one
// line per criterion. Exits 1 if any gating criterion fails.
int main(int argc, char** argv) {
  std::vector<std::string> ids(argv + 1, argv + argc);
  if (ids.empty()) ids = gsgs::acceptance_ids();
  bool ok = true;
  for (const auto& id : ids) {
    try {
      const gsgs::CriterionResult r = gsgs::run_acceptance(id);
      std::cout << r.line() << std::endl;
      if (r.gating && !r.pass) ok = false;
    } catch (const std::exception& e) {
      std::cout << id << " FAIL error: " << e.what() << std::endl;
      ok = false;
    }
  }
  return ok ? 0 : 1;
}
