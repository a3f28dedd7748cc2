#pragma once

#include <string>
#include <vector>

namespace prpolab {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;  // empty on pass, failure reason otherwise
};

// deterministic self-check battery cross-checking the analytic code paths
// against finite differences, plain re-derivations and exact enumerations
std::vector<VerifyCheck> run_verification();

// pass/fail table for terminal display
std::string verification_report(const std::vector<VerifyCheck>& checks);

}  // namespace prpolab
